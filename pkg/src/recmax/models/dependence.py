"""
Dependence Models
=================
Tagged family of D-norm models together with the compact descriptor
grammar used on the command line.

Descriptor grammar::

    descriptor := family [":" param] [":d=" int]
    family     := "logistic" | "weibull" | "bernoulli" | "mo" | "indep" | "comonotone"

``logistic``, ``weibull``, ``bernoulli`` and ``mo`` require the parameter,
``indep`` and ``comonotone`` take none. The dimension defaults to the
caller-supplied value (2 when absent). ``descriptor`` round-trips through
``parse_model``.
"""

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from .results import DescriptorError, ModelError

# Sampler for custom generators: (rng, n) -> array of shape (n, d)
GeneratorSampler = Callable[[np.random.Generator, int], np.ndarray]

DEFAULT_DIMENSION = 2
MAX_SUBSET_DIMENSION = 20


class Family(str, Enum):
    LOGISTIC = 'logistic'
    WEIBULL = 'weibull'
    BERNOULLI = 'bernoulli'
    MARSHALL_OLKIN = 'mo'
    INDEPENDENCE = 'indep'
    COMONOTONE = 'comonotone'
    CUSTOM = 'custom'


_PARAMETRIC = {Family.LOGISTIC, Family.WEIBULL, Family.BERNOULLI, Family.MARSHALL_OLKIN}


class RestrictedSampler:
    """Picklable coordinate restriction of a custom generator sampler."""

    def __init__(self, sampler: GeneratorSampler, coords: Sequence[int]):
        self.sampler = sampler
        self.coords = tuple(coords)

    def __call__(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.sampler(rng, n)[:, list(self.coords)]


@dataclass(frozen=True)
class DependenceModel:
    """
    A D-norm model of dimension ``dim``.

    ``param`` holds lambda (logistic, > 1), alpha (Weibull, > 0), beta
    (Bernoulli, in (0, 1]) or gamma (Marshall-Olkin, in (0, 1)).
    Custom generators carry a ``sampler`` and optionally an essential-sup
    ``bound``; ``mc_samples``/``mc_seed`` fix their Monte Carlo norm.
    ``truncation`` is the generator quantile level used by the approximate
    point-process sampler for unbounded generators.
    """
    family: Family
    dim: int
    param: Optional[float] = None
    sampler: Optional[GeneratorSampler] = None
    bound: Optional[float] = None
    truncation: Optional[float] = None
    mc_samples: int = 200_000
    mc_seed: int = 0

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ModelError(f"dimension must be an integer >= 1, got {self.dim!r}")
        family = self.family
        if family in _PARAMETRIC:
            if self.param is None:
                raise ModelError(f"{family.value} model requires a parameter")
            p = float(self.param)
            if not np.isfinite(p):
                raise ModelError(f"{family.value} parameter must be finite")
            if family is Family.LOGISTIC and not p > 1:
                raise ModelError(f"logistic lambda must be > 1, got {p}")
            if family is Family.WEIBULL and not p > 0:
                raise ModelError(f"weibull alpha must be > 0, got {p}")
            if family is Family.BERNOULLI and not 0 < p <= 1:
                raise ModelError(f"bernoulli beta must be in (0, 1], got {p}")
            if family is Family.MARSHALL_OLKIN and not 0 < p < 1:
                raise ModelError(f"marshall-olkin gamma must be in (0, 1), got {p}")
        elif self.param is not None:
            raise ModelError(f"{family.value} model takes no parameter")
        if family is Family.CUSTOM:
            if self.sampler is None:
                raise ModelError("custom generator model requires a sampler")
            if self.bound is not None and not self.bound > 0:
                raise ModelError("generator bound must be positive")
        if self.truncation is not None and not 0 < self.truncation < 1:
            raise ModelError("truncation level must lie in (0, 1)")

    # Constructors -----------------------------------------------------------

    @classmethod
    def logistic(cls, lam: float, dim: int = DEFAULT_DIMENSION) -> 'DependenceModel':
        return cls(Family.LOGISTIC, dim, float(lam))

    @classmethod
    def weibull(cls, alpha: float, dim: int = DEFAULT_DIMENSION) -> 'DependenceModel':
        return cls(Family.WEIBULL, dim, float(alpha))

    @classmethod
    def bernoulli(cls, beta: float, dim: int = DEFAULT_DIMENSION) -> 'DependenceModel':
        return cls(Family.BERNOULLI, dim, float(beta))

    @classmethod
    def marshall_olkin(cls, gamma: float, dim: int = DEFAULT_DIMENSION) -> 'DependenceModel':
        return cls(Family.MARSHALL_OLKIN, dim, float(gamma))

    @classmethod
    def independence(cls, dim: int = DEFAULT_DIMENSION) -> 'DependenceModel':
        return cls(Family.INDEPENDENCE, dim)

    @classmethod
    def comonotone(cls, dim: int = DEFAULT_DIMENSION) -> 'DependenceModel':
        return cls(Family.COMONOTONE, dim)

    @classmethod
    def custom(cls, sampler: GeneratorSampler, dim: int, bound: Optional[float] = None,
               truncation: Optional[float] = None, mc_samples: int = 200_000,
               mc_seed: int = 0) -> 'DependenceModel':
        return cls(Family.CUSTOM, dim, None, sampler, bound, truncation, mc_samples, mc_seed)

    # Properties -------------------------------------------------------------

    @property
    def generator_bound(self) -> Optional[float]:
        """Essential supremum c of the generator, None when unbounded."""
        if self.family is Family.BERNOULLI:
            return 1.0 / self.param
        if self.family in (Family.MARSHALL_OLKIN, Family.INDEPENDENCE):
            return float(self.dim)
        if self.family is Family.COMONOTONE:
            return 1.0
        if self.family is Family.CUSTOM:
            return self.bound
        return None

    @property
    def descriptor(self) -> str:
        if self.family is Family.CUSTOM:
            raise DescriptorError("custom generator models have no descriptor")
        head = self.family.value
        if self.param is not None:
            head += f":{self.param!r}"
        return f"{head}:d={self.dim}"

    def __str__(self) -> str:
        return self.descriptor if self.family is not Family.CUSTOM else f"custom:d={self.dim}"

    def check_vector(self, x) -> Tuple[np.ndarray, bool]:
        """Return ``x`` as a 2-D float array plus whether the input was 1-D."""
        from .results import DimensionError
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise DimensionError(
                f"expected vectors of dimension {self.dim}, got shape {np.shape(x)}"
            )
        return arr, single

    def restrict(self, coords: Iterable[int]) -> 'DependenceModel':
        """Same family and parameter on the coordinates ``coords`` (0-based)."""
        coords = tuple(int(c) for c in coords)
        if not coords:
            raise ModelError("margin subset must be nonempty")
        if len(set(coords)) != len(coords) or min(coords) < 0 or max(coords) >= self.dim:
            raise ModelError(f"invalid margin subset {coords} for dimension {self.dim}")
        if self.family is Family.CUSTOM:
            return replace(self, dim=len(coords), sampler=RestrictedSampler(self.sampler, coords))
        return replace(self, dim=len(coords))


def _split_dimension(parts: Sequence[str], text: str) -> Tuple[list, Optional[int]]:
    dim = None
    rest = []
    for part in parts:
        if part.startswith('d='):
            if dim is not None:
                raise DescriptorError(f"duplicate dimension in '{text}'")
            try:
                dim = int(part[2:])
            except ValueError:
                raise DescriptorError(f"dimension must be an integer in '{text}'") from None
        else:
            rest.append(part)
    return rest, dim


_ALIASES = {
    'logistic': Family.LOGISTIC,
    'weibull': Family.WEIBULL,
    'bernoulli': Family.BERNOULLI,
    'mo': Family.MARSHALL_OLKIN,
    'indep': Family.INDEPENDENCE,
    'independence': Family.INDEPENDENCE,
    'comonotone': Family.COMONOTONE,
}


def parse_model(text: str, dim: Optional[int] = None) -> DependenceModel:
    """
    Parse a model descriptor such as ``"logistic:2.0:d=3"``.

    Args:
        text: descriptor string
        dim: dimension to use when the descriptor carries no ``d=`` suffix

    Returns:
        The parsed DependenceModel
    """
    if not text or not text.strip():
        raise DescriptorError("empty model descriptor")
    parts = [p.strip() for p in text.strip().split(':')]
    name = parts[0].lower()
    if name not in _ALIASES:
        known = ', '.join(sorted(set(_ALIASES) - {'independence'}))
        raise DescriptorError(f"unknown model family '{parts[0]}' (expected one of: {known})")
    family = _ALIASES[name]
    rest, suffix_dim = _split_dimension(parts[1:], text)
    d = suffix_dim if suffix_dim is not None else (dim if dim is not None else DEFAULT_DIMENSION)
    if family in _PARAMETRIC:
        if len(rest) != 1:
            raise DescriptorError(f"'{name}' needs exactly one parameter, e.g. '{name}:0.5'")
        try:
            param = float(rest[0])
        except ValueError:
            raise DescriptorError(f"parameter '{rest[0]}' in '{text}' is not a number") from None
    else:
        if rest:
            raise DescriptorError(f"'{name}' takes no parameter, got '{':'.join(rest)}'")
        param = None
    try:
        return DependenceModel(family, d, param)
    except ModelError as e:
        raise DescriptorError(f"{text}: {e}") from None
