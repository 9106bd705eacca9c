"""
Copula Models
=============
Samplable copula families and their descriptor grammar::

    descriptor := "product" | "comonotone" | "gumbel:" lambda | "gaussian:" rho
                | "msc:" model-descriptor          (each with optional ":d=" int)

For ``msc`` the dimension lives inside the model descriptor, e.g.
``msc:logistic:2.0:d=2``.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .dependence import DEFAULT_DIMENSION, DependenceModel, _split_dimension, parse_model
from .results import DescriptorError, ModelError


class CopulaFamily(str, Enum):
    PRODUCT = 'product'
    COMONOTONE = 'comonotone'
    GUMBEL = 'gumbel'
    GAUSSIAN = 'gaussian'
    MAX_STABLE = 'msc'


@dataclass(frozen=True)
class CopulaModel:
    """A copula of dimension ``dim``; ``param`` is lambda (Gumbel) or rho (Gaussian)."""
    family: CopulaFamily
    dim: int
    param: Optional[float] = None
    model: Optional[DependenceModel] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ModelError(f"copula dimension must be >= 1, got {self.dim}")
        if self.family is CopulaFamily.GUMBEL:
            if self.param is None or not self.param > 1:
                raise ModelError(f"gumbel lambda must be > 1, got {self.param}")
        elif self.family is CopulaFamily.GAUSSIAN:
            if self.param is None or not -1 < self.param < 1:
                raise ModelError(f"gaussian rho must be in (-1, 1), got {self.param}")
            if self.dim > 2 and not self.param > -1.0 / (self.dim - 1):
                raise ModelError(
                    f"equicorrelated gaussian needs rho > {-1.0 / (self.dim - 1):.4g} in dimension {self.dim}"
                )
        elif self.family is CopulaFamily.MAX_STABLE:
            if self.model is None:
                raise ModelError("max-stable copula requires a dependence model")
            if self.model.dim != self.dim:
                raise ModelError("max-stable copula dimension must match its model")
        elif self.param is not None:
            raise ModelError(f"{self.family.value} copula takes no parameter")

    @classmethod
    def product(cls, dim: int = DEFAULT_DIMENSION) -> 'CopulaModel':
        return cls(CopulaFamily.PRODUCT, dim)

    @classmethod
    def comonotone(cls, dim: int = DEFAULT_DIMENSION) -> 'CopulaModel':
        return cls(CopulaFamily.COMONOTONE, dim)

    @classmethod
    def gumbel(cls, lam: float, dim: int = DEFAULT_DIMENSION) -> 'CopulaModel':
        return cls(CopulaFamily.GUMBEL, dim, float(lam))

    @classmethod
    def gaussian(cls, rho: float, dim: int = DEFAULT_DIMENSION) -> 'CopulaModel':
        return cls(CopulaFamily.GAUSSIAN, dim, float(rho))

    @classmethod
    def max_stable(cls, model: DependenceModel) -> 'CopulaModel':
        return cls(CopulaFamily.MAX_STABLE, model.dim, None, model)

    @property
    def has_closed_form(self) -> bool:
        """Whether ``copula_cdf`` is available for this copula."""
        if self.family is CopulaFamily.GAUSSIAN:
            return self.dim <= 2
        return True

    def extreme_value_model(self) -> Optional[DependenceModel]:
        """D-norm model of the max-domain of attraction, when known."""
        if self.family is CopulaFamily.PRODUCT:
            return DependenceModel.independence(self.dim)
        if self.family is CopulaFamily.COMONOTONE:
            return DependenceModel.comonotone(self.dim)
        if self.family is CopulaFamily.GUMBEL:
            return DependenceModel.logistic(self.param, self.dim)
        if self.family is CopulaFamily.MAX_STABLE:
            return self.model
        if self.family is CopulaFamily.GAUSSIAN:
            # asymptotic independence for |rho| < 1
            return DependenceModel.independence(self.dim)
        return None

    @property
    def descriptor(self) -> str:
        if self.family is CopulaFamily.MAX_STABLE:
            return f"msc:{self.model.descriptor}"
        head = self.family.value
        if self.param is not None:
            head += f":{self.param!r}"
        return f"{head}:d={self.dim}"

    def __str__(self) -> str:
        return self.descriptor


def parse_copula(text: str, dim: Optional[int] = None) -> CopulaModel:
    """Parse a copula descriptor such as ``"gumbel:2.0:d=2"`` or ``"msc:mo:0.3"``."""
    if not text or not text.strip():
        raise DescriptorError("empty copula descriptor")
    text = text.strip()
    head, _, tail = text.partition(':')
    name = head.lower()
    if name == 'msc':
        if not tail:
            raise DescriptorError("'msc' needs a model descriptor, e.g. 'msc:logistic:2.0'")
        try:
            return CopulaModel.max_stable(parse_model(tail, dim))
        except ModelError as e:
            raise DescriptorError(f"{text}: {e}") from None
    try:
        family = CopulaFamily(name)
    except ValueError:
        raise DescriptorError(
            f"unknown copula family '{head}' (expected product, comonotone, gumbel, gaussian or msc)"
        ) from None
    rest, suffix_dim = _split_dimension(tail.split(':') if tail else [], text)
    d = suffix_dim if suffix_dim is not None else (dim if dim is not None else DEFAULT_DIMENSION)
    param = None
    if family in (CopulaFamily.GUMBEL, CopulaFamily.GAUSSIAN):
        if len(rest) != 1:
            raise DescriptorError(f"'{name}' needs exactly one parameter, e.g. '{name}:0.5'")
        try:
            param = float(rest[0])
        except ValueError:
            raise DescriptorError(f"parameter '{rest[0]}' in '{text}' is not a number") from None
    elif rest:
        raise DescriptorError(f"'{name}' takes no parameter, got '{':'.join(rest)}'")
    try:
        return CopulaModel(family, d, param)
    except ModelError as e:
        raise DescriptorError(f"{text}: {e}") from None


