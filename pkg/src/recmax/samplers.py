"""
Max-Stable and Copula Samplers
==============================
Draws of standard max-stable vectors eta with P(eta <= x) = exp(-||x||_D),
x <= 0, and of copula vectors U, for every supported model.

Methods:
- Independence / Comonotone: elementary (negative exponentials).
- Logistic: positive-stable mixture of Frechet variables (exact).
- Bernoulli, Marshall-Olkin, bounded custom generators: Poisson point
  process M = max_k Z^(k) / Gamma_k with an exact stopping rule.
- Weibull and truncated custom generators: the same point process with the
  generator truncated at a high quantile (approximate; see eta_bias_note).
"""

import logging
import math
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .dnorm import norm_eval, sample_generators
from .models.copula import CopulaFamily, CopulaModel
from .models.dependence import DependenceModel, Family
from .models.results import MaxStableSample, ModelError
from .utils.parallel import make_rng

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 1.0 - 1e-6
POINT_CAP = 10_000_000
_UPPER = 1.0 - 2.0 ** -53
_TINY = np.finfo(float).tiny


# Positive stable ----------------------------------------------------------------

def sample_positive_stable(alpha: float, rng: np.random.Generator, size=None):
    """
    Positive alpha-stable variates with Laplace transform exp(-t^alpha).

    Chambers-Mallows-Stuck (Kanter) form with U ~ Uniform(0, pi), W ~ Exp(1):
    S = sin(alpha U) / sin(U)^(1/alpha) * (sin((1 - alpha) U) / W)^((1 - alpha)/alpha)
    """
    if not 0 < alpha < 1:
        raise ModelError(f"positive stable index must lie in (0, 1), got {alpha}")
    u = rng.uniform(0.0, np.pi, size)
    w = rng.standard_exponential(size)
    s = (np.sin(alpha * u) / np.power(np.sin(u), 1.0 / alpha)
         * np.power(np.sin((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha))
    return float(s) if size is None else s


# eta samplers -------------------------------------------------------------------

def logistic_etas(lam: float, d: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, d) exact logistic draws: xi_i = (S / E_i)^(1/lambda), eta = -1/xi."""
    if not lam > 1:
        raise ModelError(f"logistic lambda must be > 1, got {lam}")
    alpha = 1.0 / lam
    s = sample_positive_stable(alpha, rng, n)
    e = rng.standard_exponential((n, d))
    xi = np.power(s[:, None] / e, alpha)
    return -1.0 / xi


def generator_truncation_bound(model: DependenceModel) -> float:
    """Truncation level c_q used for unbounded generators."""
    q = model.truncation if model.truncation is not None else DEFAULT_TRUNCATION
    if model.family is Family.WEIBULL:
        alpha = model.param
        return (-math.log1p(-q)) ** (1.0 / alpha) / math.gamma(1.0 + 1.0 / alpha)
    if model.family is Family.CUSTOM:
        if model.truncation is None:
            raise ModelError("unbounded custom generator needs a truncation level for eta sampling")
        draws = sample_generators(model, make_rng(model.mc_seed, 0xC0), model.mc_samples)
        if model.mc_samples * (1.0 - q) < 10:
            logger.warning("truncation quantile %.3g estimated from only %d generator draws",
                           q, model.mc_samples)
        return float(np.quantile(draws, q))
    raise ModelError(f"{model.family.value} generator needs no truncation")


def eta_bias_note(model: DependenceModel) -> Optional[str]:
    """Bias note for approximate eta samplers, None for exact ones."""
    if model.family is Family.WEIBULL or (model.family is Family.CUSTOM and model.bound is None):
        q = model.truncation if model.truncation is not None else DEFAULT_TRUNCATION
        return (f"truncated point process: generator capped at its {q:.10g} quantile; "
                f"df bias <= {model.dim * (1.0 - q):.3g} per draw")
    return None


def thinning_etas(model: DependenceModel, rng: np.random.Generator, n: int,
                  bound: Optional[float] = None, point_cap: int = POINT_CAP) -> np.ndarray:
    """
    (n, d) draws via the Poisson point process with intensities 1/Gamma_k.

    The running maximum M is final once bound / Gamma_k <= min_i M_i > 0,
    since every later point has a smaller intensity.
    """
    truncated = False
    if bound is None:
        bound = model.generator_bound
        if bound is None:
            bound = generator_truncation_bound(model)
            truncated = True
    d = model.dim
    peak = np.zeros((n, d))
    arrivals = np.zeros(n)
    active = np.arange(n)
    points = 0
    while active.size:
        points += 1
        if points > point_cap:
            raise RuntimeError(f"point-process sampler exceeded {point_cap} points")
        arrivals[active] += rng.standard_exponential(active.size)
        z = sample_generators(model, rng, active.size)
        if truncated:
            np.minimum(z, bound, out=z)
        current = np.maximum(peak[active], z / arrivals[active, None])
        peak[active] = current
        floor = current.min(axis=1)
        done = (floor > 0) & (bound / arrivals[active] <= floor)
        active = active[~done]
    logger.debug("thinning sampler used at most %d points for %d draws", points, n)
    return -1.0 / peak


def sample_etas(model: DependenceModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, d) standard max-stable draws with the method suited to the family."""
    d = model.dim
    family = model.family
    if family is Family.INDEPENDENCE:
        return -rng.standard_exponential((n, d))
    if family is Family.COMONOTONE:
        return np.repeat(-rng.standard_exponential((n, 1)), d, axis=1)
    if family is Family.LOGISTIC:
        return logistic_etas(model.param, d, rng, n)
    if family is Family.CUSTOM and model.bound is None and model.truncation is None:
        raise ModelError("unbounded custom generator needs a truncation level for eta sampling")
    return thinning_etas(model, rng, n)


def sample_eta(model: DependenceModel, rng: np.random.Generator) -> MaxStableSample:
    """One standard max-stable draw."""
    return MaxStableSample(sample_etas(model, rng, 1)[0], eta_bias_note(model))


def sample_eta_logistic(lam: float, d: int, rng: np.random.Generator) -> MaxStableSample:
    return MaxStableSample(logistic_etas(lam, d, rng, 1)[0])


def sample_eta_thinning(model: DependenceModel, rng: np.random.Generator) -> MaxStableSample:
    """One exact point-process draw; the model must declare a generator bound."""
    if model.generator_bound is None:
        raise ModelError(f"{model} has no generator bound; exact thinning is unavailable")
    return MaxStableSample(thinning_etas(model, rng, 1)[0])


# Copulas -------------------------------------------------------------------------

def _gaussian_factor(rho: float, d: int) -> np.ndarray:
    cov = np.full((d, d), rho)
    np.fill_diagonal(cov, 1.0)
    return np.linalg.cholesky(cov)


def sample_copulas(copula: CopulaModel, rng: np.random.Generator, n: int) -> np.ndarray:
    """(n, d) copula draws strictly inside the unit cube."""
    d = copula.dim
    family = copula.family
    if family is CopulaFamily.PRODUCT:
        u = rng.random((n, d))
    elif family is CopulaFamily.COMONOTONE:
        u = np.repeat(rng.random((n, 1)), d, axis=1)
    elif family is CopulaFamily.GUMBEL:
        u = np.exp(logistic_etas(copula.param, d, rng, n))
    elif family is CopulaFamily.GAUSSIAN:
        z = rng.standard_normal((n, d)) @ _gaussian_factor(copula.param, d).T
        u = ndtr(z)
    elif family is CopulaFamily.MAX_STABLE:
        u = np.exp(sample_etas(copula.model, rng, n))
    else:
        raise ModelError(f"no sampler for copula family {family}")
    # numpy's random() can return 0.0; keep everything strictly inside (0, 1)
    return np.clip(u, _TINY, _UPPER)


def sample_copula(copula: CopulaModel, rng: np.random.Generator) -> np.ndarray:
    return sample_copulas(copula, rng, 1)[0]


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _plackett_integrand(theta, a, b):
    c2 = np.cos(theta) ** 2
    return np.exp(-(a * a + b * b - 2.0 * a * b * np.sin(theta)) / (2.0 * c2)) / (2.0 * np.pi)


def bivariate_normal_cdf(a, b, rho: float) -> np.ndarray:
    """
    P(X <= a, Y <= b) for standard bivariate normal with correlation rho.

    Plackett's identity Phi(a)Phi(b) + int_0^asin(rho) phi-kernel d(theta);
    20-point Gauss-Legendre for |rho| <= 0.925, adaptive quadrature beyond.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    base = ndtr(a) * ndtr(b)
    if rho == 0:
        return base
    top = math.asin(rho)
    if abs(rho) <= 0.925:
        theta = 0.5 * top * (_GL_NODES + 1.0)
        vals = _plackett_integrand(theta[None, :], a[:, None], b[:, None])
        return base + 0.5 * top * (vals @ _GL_WEIGHTS)
    extra = np.array([
        integrate.quad(_plackett_integrand, 0.0, top, args=(ai, bi), epsabs=1e-14, epsrel=1e-12, limit=200)[0]
        for ai, bi in zip(a, b)
    ])
    return base + extra


def copula_cdf(copula: CopulaModel, u):
    """
    Closed-form copula df C(u) for one vector or each row of a batch.

    Gaussian copulas are supported for d <= 2 only.
    """
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != copula.dim:
        from .models.results import DimensionError
        raise DimensionError(f"expected vectors of dimension {copula.dim}, got shape {np.shape(u)}")
    if np.any((arr < 0) | (arr > 1)):
        raise ModelError("copula arguments must lie in [0, 1]")
    family = copula.family
    zero = arr.min(axis=1) <= 0
    safe = np.where(arr > 0, arr, 1.0)
    if family is CopulaFamily.PRODUCT:
        out = safe.prod(axis=1)
    elif family is CopulaFamily.COMONOTONE:
        out = safe.min(axis=1)
    elif family is CopulaFamily.GUMBEL:
        lam = copula.param
        out = np.exp(-np.power(np.power(-np.log(safe), lam).sum(axis=1), 1.0 / lam))
    elif family is CopulaFamily.MAX_STABLE:
        out = np.exp(-np.atleast_1d(norm_eval(copula.model, np.log(safe))))
    elif family is CopulaFamily.GAUSSIAN:
        if copula.dim > 2:
            raise ModelError("gaussian copula df is available for d <= 2 only")
        if copula.dim == 1:
            out = safe[:, 0]
        else:
            inner = np.clip(safe, _TINY, _UPPER)
            out = bivariate_normal_cdf(ndtri(inner[:, 0]), ndtri(inner[:, 1]), copula.param)
            # exact margins at the upper boundary
            out = np.where(safe[:, 0] >= 1, safe[:, 1], out)
            out = np.where(safe[:, 1] >= 1, safe[:, 0], out)
            out = np.clip(out, 0.0, 1.0)
    else:
        raise ModelError(f"no df for copula family {family}")
    out = np.where(zero, 0.0, out)
    return float(out[0]) if single else out
