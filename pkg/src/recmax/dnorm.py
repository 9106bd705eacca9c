"""
D-Norms and Dual D-Norm Functions
=================================
Closed-form evaluation of ||x||_D = E(max_i |x_i| Z_i) and of the dual
function E(min_i |x_i| Z_i) for every named dependence model, the
inclusion-exclusion identities linking the two, generator sampling and the
closed-form limit constants that are known analytically.

All evaluators accept one vector of shape (d,) and return a float, or a
batch of shape (n, d) and return an array of length n.
"""

import math
from functools import lru_cache
from typing import Iterable, List, Optional, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn, gammaln

from .models.dependence import MAX_SUBSET_DIMENSION, DependenceModel, Family
from .models.results import GeneratorSample, ModelError
from .utils.parallel import make_rng


@lru_cache(maxsize=None)
def nonempty_subsets(d: int) -> Tuple[Tuple[int, ...], ...]:
    """All nonempty index subsets of range(d), ordered by bitmask."""
    if d > MAX_SUBSET_DIMENSION:
        raise ModelError(
            f"inclusion-exclusion over 2^{d} subsets refused (dimension limit {MAX_SUBSET_DIMENSION})"
        )
    return tuple(
        tuple(i for i in range(d) if mask >> i & 1) for mask in range(1, 1 << d)
    )


def _rowsum(terms: np.ndarray) -> np.ndarray:
    """Exactly rounded row sums of alternating inclusion-exclusion terms."""
    return np.fromiter((math.fsum(row) for row in terms), dtype=float, count=terms.shape[0])


def _finish(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


def _custom_generator_draws(model: DependenceModel) -> np.ndarray:
    rng = make_rng(model.mc_seed, 0xD0)
    return np.asarray(model.sampler(rng, model.mc_samples), dtype=float)


def _custom_mean(model: DependenceModel, a: np.ndarray, reducer) -> np.ndarray:
    z = _custom_generator_draws(model)
    out = np.empty(a.shape[0])
    for i, row in enumerate(a):
        out[i] = reducer(row * z, axis=1).mean()
    return out


def _norm_rows(model: DependenceModel, a: np.ndarray) -> np.ndarray:
    """Norm of nonnegative rows ``a`` (absolute values already taken)."""
    family = model.family
    if model.dim == 1:
        return a[:, 0].copy()
    if family is Family.INDEPENDENCE:
        return a.sum(axis=1)
    if family is Family.COMONOTONE:
        return a.max(axis=1)
    if family is Family.MARSHALL_OLKIN:
        g = model.param
        return g * a.max(axis=1) + (1.0 - g) * a.sum(axis=1)
    if family is Family.LOGISTIC:
        lam = model.param
        top = a.max(axis=1)
        with np.errstate(divide='ignore', invalid='ignore'):
            scaled = np.where(top[:, None] > 0, a / top[:, None], 0.0)
        return top * np.power(np.power(scaled, lam).sum(axis=1), 1.0 / lam)
    if family is Family.BERNOULLI:
        # rank k (descending) is the largest active coordinate with prob beta(1-beta)^(k-1)
        ordered = -np.sort(-a, axis=1)
        weights = (1.0 - model.param) ** np.arange(model.dim)
        return ordered @ weights
    if family is Family.WEIBULL:
        return np.atleast_1d(norm_from_dual_ie(model, a))
    if family is Family.CUSTOM:
        return _custom_mean(model, a, np.max)
    raise ModelError(f"no norm for family {family}")


def _dual_rows(model: DependenceModel, a: np.ndarray) -> np.ndarray:
    family = model.family
    if model.dim == 1:
        return a[:, 0].copy()
    low = a.min(axis=1)
    if family is Family.INDEPENDENCE:
        return np.zeros(a.shape[0])
    if family is Family.COMONOTONE:
        return low
    if family is Family.MARSHALL_OLKIN:
        return model.param * low
    if family is Family.BERNOULLI:
        return model.param ** (model.dim - 1) * low
    if family is Family.WEIBULL:
        alpha = model.param
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = np.where(low[:, None] > 0, low[:, None] / a, 0.0)
            out = low * np.power(np.power(ratio, alpha).sum(axis=1), -1.0 / alpha)
        return np.where(low > 0, out, 0.0)
    if family is Family.LOGISTIC:
        out = np.atleast_1d(dual_from_norm_ie(model, a))
        return np.where(low > 0, out, 0.0)
    if family is Family.CUSTOM:
        return _custom_mean(model, a, np.min)
    raise ModelError(f"no dual function for family {family}")


def norm_eval(model: DependenceModel, x):
    """
    D-norm ||x||_D of a vector or of each row of a batch.

    WeibullModel norms are computed by inclusion-exclusion over the dual
    (at most 20 coordinates); CustomGenerator norms are Monte Carlo means over
    ``model.mc_samples`` generator draws with the fixed ``model.mc_seed``.
    """
    arr, single = model.check_vector(x)
    return _finish(_norm_rows(model, np.abs(arr)), single)


def dual_eval(model: DependenceModel, x):
    """Dual D-norm function E(min_i |x_i| Z_i); zero whenever some x_i = 0."""
    arr, single = model.check_vector(x)
    a = np.abs(arr)
    out = _dual_rows(model, a)
    out = np.where(a.min(axis=1) > 0, out, 0.0)
    return _finish(out, single)


def margin_model(model: DependenceModel, T: Iterable[int]) -> DependenceModel:
    """Margin of ``model`` on the 0-based coordinate subset ``T``."""
    return model.restrict(T)


def _inclusion_exclusion(model: DependenceModel, x, evaluator) -> Tuple[np.ndarray, bool]:
    arr, single = model.check_vector(x)
    subsets = nonempty_subsets(model.dim)
    terms = np.empty((arr.shape[0], len(subsets)))
    for j, T in enumerate(subsets):
        sign = 1.0 if len(T) % 2 == 1 else -1.0
        terms[:, j] = sign * np.atleast_1d(evaluator(margin_model(model, T), arr[:, list(T)]))
    return _rowsum(terms), single


def dual_from_norm_ie(model: DependenceModel, x):
    """sum over nonempty T of (-1)^(|T|-1) ||x_T||_{D,T}"""
    values, single = _inclusion_exclusion(model, x, norm_eval)
    return _finish(values, single)


def norm_from_dual_ie(model: DependenceModel, x):
    """sum over nonempty T of (-1)^(|T|-1) dual(x_T) on the margin T"""
    values, single = _inclusion_exclusion(model, x, dual_eval)
    return _finish(values, single)


def dual_at_ones(model: DependenceModel) -> float:
    """Dual function at the all-ones vector; positive iff E(N(2)) is infinite in the domain of attraction."""
    return dual_eval(model, np.ones(model.dim))


# Generators ----------------------------------------------------------------

def sample_generators(model: DependenceModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """
    Draw ``n`` independent generator vectors as an (n, d) array.

    Logistic: iid Frechet(lambda) / Gamma(1 - 1/lambda); Weibull: iid
    Weibull(alpha) / Gamma(1 + 1/alpha); Bernoulli: indicators / beta;
    Marshall-Olkin: all-ones with probability gamma, else a random
    permutation of (d, 0, ..., 0); Independence: the permutation alone;
    Comonotone: all-ones.
    """
    d = model.dim
    family = model.family
    if family is Family.COMONOTONE:
        return np.ones((n, d))
    if family is Family.LOGISTIC:
        lam = model.param
        frechet = rng.standard_exponential((n, d)) ** (-1.0 / lam)
        return frechet / gamma_fn(1.0 - 1.0 / lam)
    if family is Family.WEIBULL:
        alpha = model.param
        weibull = rng.standard_exponential((n, d)) ** (1.0 / alpha)
        return weibull / gamma_fn(1.0 + 1.0 / alpha)
    if family is Family.BERNOULLI:
        beta = model.param
        return (rng.random((n, d)) < beta) / beta
    if family in (Family.INDEPENDENCE, Family.MARSHALL_OLKIN):
        z = np.zeros((n, d))
        z[np.arange(n), rng.integers(0, d, size=n)] = d
        if family is Family.MARSHALL_OLKIN:
            z[rng.random(n) < model.param] = 1.0
        return z
    if family is Family.CUSTOM:
        z = np.asarray(model.sampler(rng, n), dtype=float)
        if z.shape != (n, d):
            raise ModelError(f"custom sampler returned shape {z.shape}, expected {(n, d)}")
        if np.any(z < 0):
            raise ModelError("custom sampler produced negative components")
        return z
    raise ModelError(f"no generator for family {family}")


def sample_generator(model: DependenceModel, rng: np.random.Generator) -> GeneratorSample:
    """One generator draw."""
    return GeneratorSample(sample_generators(model, rng, 1)[0])


# Closed forms ----------------------------------------------------------------

def logistic_concurrence_gamma_form(lam: float, d: int) -> float:
    """Gamma(d - 1/lambda) / ((d-1)! Gamma(1 - 1/lambda))"""
    return float(np.exp(gammaln(d - 1.0 / lam) - gammaln(d) - gammaln(1.0 - 1.0 / lam)))


def concurrence_closed_form(model: DependenceModel) -> Optional[float]:
    """Exact extremal concurrence probability E(dual(eta)) where known, else None."""
    d = model.dim
    family = model.family
    if d == 1:
        return 1.0
    if family is Family.LOGISTIC:
        return math.prod(1.0 - 1.0 / (model.param * i) for i in range(1, d))
    if family is Family.COMONOTONE:
        return 1.0
    if family is Family.INDEPENDENCE:
        return 0.0
    if family is Family.MARSHALL_OLKIN:
        g = model.param
        return g / (g + d * (1.0 - g))
    if family is Family.BERNOULLI:
        b = model.param
        return b ** d / (1.0 - (1.0 - b) ** d)
    return None


def expected_norm_closed_form(model: DependenceModel) -> Optional[float]:
    """Exact E||eta||_D (the simple-record constant) where known, else None."""
    d = model.dim
    if d == 1:
        return 1.0
    if model.family is Family.LOGISTIC:
        return math.prod(1.0 + 1.0 / (model.param * i) for i in range(1, d))
    if model.family is Family.COMONOTONE:
        return 1.0
    if model.family is Family.INDEPENDENCE:
        return float(d)
    return None


def bernoulli_concurrence_subset_sum(beta: float, d: int) -> float:
    """
    Alternative binomial-sum expression for the Bernoulli concurrence.

    Kept for comparison reports only: it sums positive subset terms and
    exceeds the generator value (and can exceed 1).
    """
    return math.fsum(
        math.comb(d, k) * beta ** k * (1.0 - beta) ** (d - k) / (1.0 - (1.0 - beta) ** k)
        for k in range(1, d + 1)
    )


def bernoulli_norm_subset_sum(model: DependenceModel, x) -> float:
    """Bernoulli norm as the explicit 2^d subset sum (oracle for the sorted form)."""
    if model.family is not Family.BERNOULLI:
        raise ModelError("subset-sum norm applies to the Bernoulli model only")
    arr, _ = model.check_vector(x)
    a = np.abs(arr[0])
    b = model.param
    d = model.dim
    terms: List[float] = [
        b ** (len(T) - 1) * (1.0 - b) ** (d - len(T)) * max(a[list(T)])
        for T in nonempty_subsets(d)
    ]
    return math.fsum(terms)
