"""
Monte Carlo Estimators
======================
Estimators with standard errors for the record, champion and concurrence
quantities of multivariate i.i.d. observations. Most quantities have at
least two computational routes (generator identities, max-stable draws,
finite-n simulation) so they can be cross-checked.

Every estimator takes ``seed`` and ``workers``; work is split into chunks by
``recmax.utils.parallel.map_chunks`` so values are identical for any worker
count. Custom generator samplers must be picklable when ``workers > 1``.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .dnorm import (
    bernoulli_concurrence_subset_sum, concurrence_closed_form, dual_at_ones, dual_eval,
    expected_norm_closed_form, margin_model, nonempty_subsets, norm_eval, sample_generators,
)
from .models.copula import CopulaFamily, CopulaModel
from .models.dependence import DependenceModel, Family
from .models.results import (
    DimensionError, Estimate, EstimationError, ModelError, round12,
)
from .records import champion_mask, draw_until_exceed, pit_transform, record_indicators
from .samplers import copula_cdf, eta_bias_note, sample_copulas, sample_etas
from .utils.parallel import map_chunks

logger = logging.getLogger(__name__)

INNER_SAMPLES = 64
MEDIAN_OF_MEANS_BLOCKS = 32
REPLICATION_BUDGET = 2_000_000
DIVERGENCE_SLOPE = -1.3
MIN_TAIL_COUNT = 50
MIN_EXCEEDANCES = 50
EMPIRICAL_TOLERANCE = 0.02

# route ids for independent stream families
_ETA, _GENERATOR, _DIRECT = 0, 1, 2


# Aggregation helpers ------------------------------------------------------------------

def _mean_estimate(values: np.ndarray, method: str, seed: int, **extra) -> Estimate:
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return Estimate(float(values.mean()), se, n, method, seed, **extra)


def _ratio_parts(num: np.ndarray, den: np.ndarray):
    """Ratio of means with a delta-method standard error."""
    n = num.shape[0]
    mean_den = float(den.mean())
    if mean_den == 0:
        raise EstimationError("ratio estimator has a zero denominator (no conditioning events observed)")
    ratio = float(num.mean()) / mean_den
    resid = num - ratio * den
    se = float(resid.std(ddof=1) / (math.sqrt(n) * abs(mean_den))) if n > 1 else 0.0
    return ratio, se


def _ratio_estimate(num, den, method: str, seed: int, **extra) -> Estimate:
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    ratio, se = _ratio_parts(num, den)
    return Estimate(ratio, se, num.shape[0], method, seed, **extra)


def _median_of_means(values: np.ndarray, blocks: int = MEDIAN_OF_MEANS_BLOCKS):
    """Median of block means; SE is sqrt(pi/2) times the SE of the block means."""
    n = values.shape[0]
    if n < 2 * blocks:
        return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    means = np.array([part.mean() for part in np.array_split(values, blocks)])
    se = math.sqrt(math.pi / 2.0) * means.std(ddof=1) / math.sqrt(blocks)
    return float(np.median(means)), float(se)


def _closed_form_details(model: DependenceModel, value: Optional[float]) -> Dict[str, Any]:
    details: Dict[str, Any] = {'model': str(model)}
    if value is not None:
        details['closed_form'] = value
    return details


def _check_point(model_dim: int, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (model_dim,):
        raise DimensionError(f"expected a point of dimension {model_dim}, got shape {arr.shape}")
    if np.any(arr > 0):
        raise ModelError("limit dfs are defined for x <= 0")
    return arr


def _replicate(copula: CopulaModel, n: int, size: int, rng: np.random.Generator, reducer) -> np.ndarray:
    """Apply ``reducer`` to (m, n, d) blocks of copula streams, ``size`` streams in total."""
    step = max(1, REPLICATION_BUDGET // (n * copula.dim))
    parts = []
    for start in range(0, size, step):
        m = min(step, size - start)
        blocks = sample_copulas(copula, rng, m * n).reshape(m, n, copula.dim)
        parts.append(reducer(blocks))
    return np.concatenate(parts, axis=0)


# Generator helpers -----------------------------------------------------------------------

def _nested_norm(model: DependenceModel, a: np.ndarray, rng: np.random.Generator,
                 inner: int = INNER_SAMPLES) -> np.ndarray:
    """Norms of the rows of ``a`` as means over ``inner`` fresh generator draws each."""
    out = np.empty(a.shape[0])
    step = max(1, REPLICATION_BUDGET // (inner * model.dim))
    for start in range(0, a.shape[0], step):
        block = a[start:start + step]
        w = sample_generators(model, rng, block.shape[0] * inner).reshape(block.shape[0], inner, model.dim)
        out[start:start + step] = (w * block[:, None, :]).max(axis=2).mean(axis=1)
    return out


def _inverse_reciprocal_norm(model: DependenceModel, z: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """1{z > 0} / ||1/z||_D for each row of ``z``."""
    out = np.zeros(z.shape[0])
    positive = np.all(z > 0, axis=1)
    if not positive.any():
        return out
    reciprocal = 1.0 / z[positive]
    if model.family is Family.CUSTOM:
        norms = _nested_norm(model, reciprocal, rng)
    else:
        norms = np.atleast_1d(norm_eval(model, reciprocal))
    out[positive] = 1.0 / norms
    return out


def _generator_label(model: DependenceModel, base: str) -> str:
    if model.family is Family.CUSTOM:
        return f"{base}; nested norm MC with {INNER_SAMPLES} inner draws"
    return base


# Concurrence ----------------------------------------------------------------------------

def _generator_concurrence_chunk(model, size, rng):
    z = sample_generators(model, rng, size)
    return _inverse_reciprocal_norm(model, z, rng)


def concurrence_via_generator(model: DependenceModel, n_samples: int, seed: int,
                              workers: int = 1) -> Estimate:
    """Extremal concurrence probability as E(1{Z > 0} / ||1/Z||_D) over generator draws."""
    values = map_chunks(partial(_generator_concurrence_chunk, model), n_samples, seed, workers,
                        route=_GENERATOR)
    details = _closed_form_details(model, concurrence_closed_form(model))
    if model.family is Family.BERNOULLI:
        details['binomial_subset_sum'] = bernoulli_concurrence_subset_sum(model.param, model.dim)
    method = _generator_label(model, "generator: E(1{Z>0} / ||1/Z||_D)")
    return _mean_estimate(values, method, seed, details=details)


def _eta_dual_chunk(model, size, rng):
    return np.atleast_1d(dual_eval(model, sample_etas(model, rng, size)))


def concurrence_via_eta(model: DependenceModel, n_samples: int, seed: int,
                        workers: int = 1) -> Estimate:
    """Extremal concurrence probability as the mean dual function of max-stable draws."""
    values = map_chunks(partial(_eta_dual_chunk, model), n_samples, seed, workers, route=_ETA)
    details = _closed_form_details(model, concurrence_closed_form(model))
    return _mean_estimate(values, "eta: E dual(eta)", seed,
                          bias_note=eta_bias_note(model), details=details)


def _champion_chunk(copula, n, size, rng):
    def reducer(blocks):
        has = champion_mask(blocks)
        last = blocks[:, -1, :]
        others = blocks[:, :-1, :].max(axis=1)
        complete_last = np.all(last > others, axis=1)
        return np.column_stack([has, complete_last]).astype(float)
    return _replicate(copula, n, size, rng, reducer)


def concurrence_empirical(copula: CopulaModel, n: int, reps: int, seed: int,
                          workers: int = 1) -> Estimate:
    """
    Fraction of replications of ``n`` copula draws that contain a champion.

    ``details`` carries n times the empirical probability that the last
    draw is a complete record, which estimates the same quantity.
    """
    if n < 2:
        raise ValueError("concurrence_empirical needs n >= 2")
    values = map_chunks(partial(_champion_chunk, copula, n), reps, seed, workers, route=_DIRECT)
    has, complete_last = values[:, 0], values[:, 1]
    estimate = _mean_estimate(has, f"empirical: champion among n={n}", seed)
    details = {
        'copula': str(copula),
        'n': n,
        'n_times_complete_record_prob': n * float(complete_last.mean()),
        'n_times_complete_record_prob_se': n * float(complete_last.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0,
        'finite_n_tolerance': EMPIRICAL_TOLERANCE,
    }
    ev = copula.extreme_value_model()
    if ev is not None and concurrence_closed_form(ev) is not None:
        details['limit_closed_form'] = concurrence_closed_form(ev)
    return Estimate(estimate.value, estimate.std_error, reps, estimate.method, seed, details=details)


# Complete records ---------------------------------------------------------------------

def _eta_norm_chunk(model, size, rng):
    return np.atleast_1d(norm_eval(model, sample_etas(model, rng, size)))


def record_prob_maxstable_exact(model: DependenceModel, n: int, n_samples: int, seed: int,
                                workers: int = 1) -> Estimate:
    """P(the n-th draw of the max-stable copula is a complete record) = E exp(-(n-1) ||eta||_D)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return Estimate(1.0, 0.0, n_samples, "exact: first observation", seed)
    norms = map_chunks(partial(_eta_norm_chunk, model), n_samples, seed, workers, route=_ETA)
    return _mean_estimate(np.exp(-(n - 1) * norms), "eta: E exp(-(n-1)||eta||_D)", seed,
                          bias_note=eta_bias_note(model))


def expected_complete_records_exact(model: DependenceModel, k: int, n_samples: int, seed: int,
                                    workers: int = 1) -> Estimate:
    """
    Expected number of complete records among k max-stable copula draws.

    One pass over eta draws: sum_{i<=k} exp(-(i-1)s) = (1 - e^{-ks}) / (1 - e^{-s}).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    norms = map_chunks(partial(_eta_norm_chunk, model), n_samples, seed, workers, route=_ETA)
    values = np.expm1(-k * norms) / np.expm1(-norms)
    return _mean_estimate(values, "eta: geometric sum of exp(-(i-1)||eta||_D)", seed,
                          bias_note=eta_bias_note(model), details={'k': k})


@dataclass
class RecordGrowth:
    """Expected simple (m) and complete (M) record counts at checkpoints k."""
    copula: str
    n: int
    reps: int
    seed: int
    rows: List[Dict[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return round12(asdict(self))


def default_checkpoints(n: int) -> List[int]:
    points = {n}
    k = 10
    while k < n:
        points.add(k)
        k *= 10
    return sorted(points)


def _growth_chunk(copula, n, checkpoints, size, rng):
    idx = np.asarray(checkpoints) - 1

    def reducer(blocks):
        simple, complete = record_indicators(blocks)
        return np.column_stack([np.cumsum(simple, axis=1)[:, idx], np.cumsum(complete, axis=1)[:, idx]])
    return _replicate(copula, n, size, rng, reducer).astype(float)


def expected_records_growth(copula: CopulaModel, n: int, reps: int, seed: int,
                            checkpoints: Optional[Sequence[int]] = None,
                            workers: int = 1) -> RecordGrowth:
    """
    Simulate ``reps`` streams of length ``n`` and average record counts at checkpoints.

    Each row holds k, E m(k), E M(k) with SEs and both ratios to log k
    (ratios are omitted at k = 1).
    """
    checkpoints = sorted(set(int(k) for k in (checkpoints or default_checkpoints(n))))
    if checkpoints[0] < 1 or checkpoints[-1] > n:
        raise ValueError(f"checkpoints must lie in [1, {n}]")
    counts = map_chunks(partial(_growth_chunk, copula, n, tuple(checkpoints)), reps, seed, workers,
                        route=_DIRECT)
    c = len(checkpoints)
    means = counts.mean(axis=0)
    ses = counts.std(axis=0, ddof=1) / math.sqrt(reps) if reps > 1 else np.zeros(2 * c)
    growth = RecordGrowth(str(copula), n, reps, seed)
    for j, k in enumerate(checkpoints):
        row = {
            'k': k,
            'simple_mean': means[j], 'simple_se': ses[j],
            'complete_mean': means[c + j], 'complete_se': ses[c + j],
        }
        if k > 1:
            log_k = math.log(k)
            row.update({
                'simple_ratio': means[j] / log_k, 'simple_ratio_se': ses[j] / log_k,
                'complete_ratio': means[c + j] / log_k, 'complete_ratio_se': ses[c + j] / log_k,
            })
        growth.rows.append(row)
        logger.info("k=%d: E m=%.6g, E M=%.6g", k, means[j], means[c + j])
    return growth


# Simple records ------------------------------------------------------------------------

SIMPLE_LIMIT_ROUTES = ('eta', 'weibull-generator', 'generator-ie')


def _weibull_generator_norm_chunk(lam, d, size, rng):
    z = sample_generators(DependenceModel.weibull(lam, d), rng, size)
    return np.atleast_1d(norm_eval(DependenceModel.logistic(lam, d), z))


def _generator_ie_chunk(model, size, rng):
    z = sample_generators(model, rng, size)
    subsets = nonempty_subsets(model.dim)
    terms = np.empty((size, len(subsets)))
    for j, T in enumerate(subsets):
        sign = 1.0 if len(T) % 2 == 1 else -1.0
        terms[:, j] = sign * _inverse_reciprocal_norm(margin_model(model, T), z[:, list(T)], rng)
    return terms.sum(axis=1)


def _default_simple_route(model: DependenceModel) -> str:
    if model.family is Family.WEIBULL:
        return 'generator-ie'
    if model.family is Family.CUSTOM and model.bound is None and model.truncation is None:
        return 'generator-ie'
    return 'eta'


def simple_record_limit(model: DependenceModel, n_samples: int, seed: int,
                        route: Optional[str] = None, workers: int = 1) -> Estimate:
    """
    E||eta||_D, the limit of n times the simple-record probability.

    Routes: ``eta`` (mean norm of max-stable draws), ``weibull-generator``
    (logistic only: E||Z||_lambda for a Weibull(lambda) generator) and
    ``generator-ie`` (inclusion-exclusion over margins of
    E(1{Z_T > 0} / ||1/Z_T||)).
    """
    route = route or _default_simple_route(model)
    if route not in SIMPLE_LIMIT_ROUTES:
        raise ValueError(f"unknown route '{route}' (expected one of {', '.join(SIMPLE_LIMIT_ROUTES)})")
    details = _closed_form_details(model, expected_norm_closed_form(model))
    bias_note = None
    if route == 'eta':
        values = map_chunks(partial(_eta_norm_chunk, model), n_samples, seed, workers, route=_ETA)
        method = "eta: E||eta||_D"
        bias_note = eta_bias_note(model)
    elif route == 'weibull-generator':
        if model.family is not Family.LOGISTIC:
            raise ModelError("the weibull-generator route applies to logistic models only")
        values = map_chunks(partial(_weibull_generator_norm_chunk, model.param, model.dim),
                            n_samples, seed, workers, route=_GENERATOR)
        method = "weibull-generator: E||Z_W||_lambda"
    else:
        values = map_chunks(partial(_generator_ie_chunk, model), n_samples, seed, workers,
                            route=_GENERATOR)
        method = _generator_label(model, "generator-ie: sum_T (-1)^(|T|-1) E(1{Z_T>0}/||1/Z_T||)")
    return _mean_estimate(values, method, seed, bias_note=bias_note, details=details)


def _simple_df_chunk(model, x, size, rng):
    eta = sample_etas(model, rng, size)
    num = np.atleast_1d(norm_eval(model, np.minimum(eta, x))) - norm_eval(model, x)
    den = np.atleast_1d(norm_eval(model, eta))
    return np.column_stack([num, den])


def simple_record_limit_df(model: DependenceModel, x, n_samples: int, seed: int,
                           workers: int = 1) -> Estimate:
    """H_D(x) = (E||min(x, eta)||_D - ||x||_D) / E||eta||_D for x <= 0."""
    x = _check_point(model.dim, x)
    values = map_chunks(partial(_simple_df_chunk, model, x), n_samples, seed, workers, route=_ETA)
    return _ratio_estimate(values[:, 0], values[:, 1], "eta: ratio of means (delta-method SE)", seed,
                           bias_note=eta_bias_note(model), details={'x': x.tolist()})


def _argmax_mask(blocks: np.ndarray) -> np.ndarray:
    """(m, n) mask of indices that hold the maximum of at least one coordinate."""
    m, n, d = blocks.shape
    mask = np.zeros((m, n), dtype=bool)
    rows = np.arange(m)
    leaders = blocks.argmax(axis=1)
    for j in range(d):
        mask[rows, leaders[:, j]] = True
    return mask


def _simple_empirical_chunk(copula, x, n, size, rng):
    def reducer(blocks):
        candidates = _argmax_mask(blocks) if n > 1 else np.ones(blocks.shape[:2], dtype=bool)
        below = np.all(n * (blocks - 1.0) <= x, axis=2)
        return np.column_stack([(candidates & below).sum(axis=1), candidates.sum(axis=1)])
    return _replicate(copula, n, size, rng, reducer).astype(float)


def simple_record_df_empirical(copula: CopulaModel, x, n: int, reps: int, seed: int,
                               workers: int = 1) -> Estimate:
    """
    Finite-n df of n(U - 1) at simple records, estimated by simulation.

    By exchangeability every index holding some coordinate maximum is a
    simple-record position, so each replication contributes all of them.
    """
    x = _check_point(copula.dim, x)
    values = map_chunks(partial(_simple_empirical_chunk, copula, x, n), reps, seed, workers,
                        route=_DIRECT)
    return _ratio_estimate(values[:, 0], values[:, 1],
                           f"empirical: simple-record positions among n={n}", seed,
                           details={'x': x.tolist(), 'n': n, 'conditioning_events': int(values[:, 1].sum()),
                                    'finite_n_tolerance': EMPIRICAL_TOLERANCE})


# Champions -------------------------------------------------------------------------------

def _survival_eta_chunk(model, x, size, rng):
    eta = sample_etas(model, rng, size)
    num = np.atleast_1d(dual_eval(model, np.maximum(eta, x)))
    den = np.atleast_1d(dual_eval(model, eta))
    return np.column_stack([num, den])


def _survival_generator_chunk(model, x, size, rng):
    z = sample_generators(model, rng, size)
    weight = _inverse_reciprocal_norm(model, z, rng)
    exponent = np.zeros(size)
    positive = weight > 0
    exponent[positive] = (z[positive] * x).max(axis=1) / weight[positive]
    return np.column_stack([weight * np.exp(exponent), weight])


def _require_concurrence(model: DependenceModel):
    if model.family is Family.INDEPENDENCE and model.dim > 1:
        raise EstimationError("champion survival is undefined for the independence model (zero concurrence)")
    closed = concurrence_closed_form(model)
    if closed is not None and closed == 0:
        raise EstimationError(f"champion survival is undefined for {model} (zero concurrence)")


def champion_survival(model: DependenceModel, x, n_samples: int, seed: int,
                      workers: int = 1) -> Estimate:
    """
    Limiting survival function of a champion, H_bar_D(x), for x <= 0.

    Two routes are always run: E dual(max(eta, x)) / E dual(eta) over
    max-stable draws and the generator form
    1 - E(w exp(max_i x_i Z_i / w)) / E(w) with w = 1{Z>0}/||1/Z||_D.
    The eta route is primary except for Weibull and unbounded custom
    generators, where the generator route is exact.
    """
    x = _check_point(model.dim, x)
    _require_concurrence(model)
    gen = map_chunks(partial(_survival_generator_chunk, model, x), n_samples, seed, workers,
                     route=_GENERATOR)
    ratio, gen_se = _ratio_parts(gen[:, 0], gen[:, 1])
    gen_value = 1.0 - ratio
    details: Dict[str, Any] = {'x': x.tolist(), 'generator_route': {'value': gen_value, 'std_error': gen_se}}
    eta_available = not (model.family is Family.CUSTOM and model.bound is None and model.truncation is None)
    if eta_available:
        eta = map_chunks(partial(_survival_eta_chunk, model, x), n_samples, seed, workers, route=_ETA)
        eta_value, eta_se = _ratio_parts(eta[:, 0], eta[:, 1])
        details['eta_route'] = {'value': eta_value, 'std_error': eta_se}
    generator_primary = model.family is Family.WEIBULL or not eta_available
    if generator_primary:
        return Estimate(gen_value, gen_se, n_samples, _generator_label(model, "generator: 1 - E(w e^{max xZ/w})/E(w)"),
                        seed, details=details)
    return Estimate(eta_value, eta_se, n_samples, "eta: E dual(max(eta,x)) / E dual(eta)", seed,
                    bias_note=eta_bias_note(model), details=details)


def _champion_empirical_chunk(copula, x, n, size, rng):
    def reducer(blocks):
        has = champion_mask(blocks)
        leader = blocks.argmax(axis=1)[:, 0]
        champion = blocks[np.arange(blocks.shape[0]), leader]
        above = np.all(n * (champion - 1.0) > x, axis=1)
        return np.column_stack([has & above, has])
    return _replicate(copula, n, size, rng, reducer).astype(float)


def champion_survival_empirical(copula: CopulaModel, x, n: int, reps: int, seed: int,
                                workers: int = 1) -> Estimate:
    """
    Finite-n survival of n(U - 1) at a champion, estimated by simulation.

    Conditioning on the last draw being a complete record is, by
    exchangeability, the same as conditioning on the champion's position,
    so each replication with a champion contributes it.
    """
    x = _check_point(copula.dim, x)
    values = map_chunks(partial(_champion_empirical_chunk, copula, x, n), reps, seed, workers,
                        route=_DIRECT)
    events = int(values[:, 1].sum())
    if events == 0:
        raise EstimationError("no replication produced a champion")
    return _ratio_estimate(values[:, 0], values[:, 1], f"empirical: champion among n={n}", seed,
                           details={'x': x.tolist(), 'n': n, 'conditioning_events': events,
                                    'finite_n_tolerance': EMPIRICAL_TOLERANCE})


# Record times ----------------------------------------------------------------------------

def _integral_chunk(copula, size, rng):
    u = sample_copulas(copula, rng, size)
    return 1.0 / (1.0 - np.atleast_1d(copula_cdf(copula, u))) + 1.0


def _second_record_time_chunk(copula, cap, size, rng):
    first = sample_copulas(copula, rng, size)
    gap, _, _ = draw_until_exceed(copula, first, rng, cap)
    return gap


def tail_slope(gaps: np.ndarray, cap: int, n_total: int):
    """
    Log-log slope of P(N(2) > k) from k = 10 up to the largest k with
    at least MIN_TAIL_COUNT exceedances. Returns (slope, stderr, k_max).
    """
    counts = np.bincount(np.minimum(gaps, cap + 1), minlength=cap + 2)
    # exceed[k] = #{gap >= k} = #{N(2) > k}
    exceed = counts[::-1].cumsum()[::-1]
    k_all = np.arange(cap + 2)
    usable = np.flatnonzero((exceed >= MIN_TAIL_COUNT) & (k_all >= 1) & (k_all <= cap))
    k_max = int(usable.max()) if usable.size else 0
    if k_max < 20:
        return float('nan'), float('nan'), k_max
    grid = np.unique(np.round(np.geomspace(10, k_max, 20)).astype(int))
    fit = stats.linregress(np.log(grid), np.log(exceed[grid] / n_total))
    return float(fit.slope), float(fit.stderr), k_max


def finiteness_criterion(copula: CopulaModel) -> Tuple[Optional[bool], str]:
    """
    Analytic verdict on E N(2): True if infinite, False if finite, None if
    unknown, with the reason. A positive dual function at the ones vector of
    the limiting model means an infinite mean; a pair with chi_bar inside
    (-1, 1) means a finite one.
    """
    ev = copula.extreme_value_model()
    if ev is None or ev.family is Family.CUSTOM:
        return None, "no analytic criterion for this copula"
    at_ones = float(dual_at_ones(ev))
    if at_ones > 0:
        return True, f"dual function at ones of {ev} is {at_ones:.6g} > 0"
    if copula.family is CopulaFamily.GAUSSIAN:
        return False, f"gaussian pairs have chi_bar = rho = {copula.param:g} in (-1, 1)"
    if ev.family is Family.INDEPENDENCE:
        return False, "independent pairs have chi_bar = 0"
    return None, f"dual function at ones of {ev} is 0 and chi_bar is unknown"


def expected_N2(copula: CopulaModel, n_samples: int, seed: int, cap: int = 1000,
                workers: int = 1) -> Estimate:
    """
    Expected time of the second simple record, E N(2).

    Integral route (closed-form copulas only): median-of-means over 32 blocks
    of 1/(1 - C(U)) + 1. Direct route: simulated N(2) capped at ``cap``,
    giving the tail P(N(2) > k) and a truncated mean.

    ``divergence_flag`` comes from ``finiteness_criterion`` when it gives a
    verdict, otherwise from the log-log tail slope (>= -1.3 means infinite).
    A diverging mean is reported as the truncated mean.
    """
    gaps = map_chunks(partial(_second_record_time_chunk, copula, cap), n_samples, seed, workers,
                      route=_DIRECT)
    n = gaps.shape[0]
    n2 = 1 + gaps
    truncated_mean = float(n2.mean())
    truncated_se = float(n2.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    slope, slope_se, k_max = tail_slope(gaps, cap, n)
    slope_verdict = bool(slope >= DIVERGENCE_SLOPE) if np.isfinite(slope) else None
    verdict, reason = finiteness_criterion(copula)
    if verdict is None:
        diverging = bool(slope_verdict)
        source = 'tail slope'
    else:
        diverging = verdict
        source = 'analytic'
        if slope_verdict is not None and slope_verdict != verdict:
            logger.warning("%s: tail slope %.3g disagrees with the analytic verdict (%s)",
                           copula, slope, reason)
    counts = np.bincount(gaps, minlength=cap + 2)
    exceed = counts[::-1].cumsum()[::-1]
    tail_ks = sorted(set(range(1, min(cap, 100) + 1)) | set(int(k) for k in np.geomspace(100, cap, 10) if k <= cap))
    tail = []
    for k in tail_ks:
        p = exceed[k] / n
        tail.append({'k': k, 'p_exceed': p, 'std_error': math.sqrt(p * (1 - p) / n)})
    details: Dict[str, Any] = {
        'copula': str(copula),
        'cap': cap,
        'censored': int((gaps > cap).sum()),
        'truncated_mean': truncated_mean,
        'truncated_mean_se': truncated_se,
        'tail_slope': slope,
        'tail_slope_se': slope_se,
        'tail_fit_k_max': k_max,
        'criterion': {
            'source': source,
            'infinite_mean': verdict,
            'reason': reason,
            'slope_infinite_mean': slope_verdict,
            'slope_agrees': None if verdict is None or slope_verdict is None else slope_verdict == verdict,
        },
        'tail': tail,
    }
    if copula.has_closed_form:
        values = map_chunks(partial(_integral_chunk, copula), n_samples, seed, workers, route=_ETA)
        mom, mom_se = _median_of_means(values)
        details['integral_route'] = {'value': mom, 'std_error': mom_se}
    else:
        logger.info("%s has no closed-form df; only the direct route is available", copula)
    if diverging or not copula.has_closed_form:
        return Estimate(truncated_mean, truncated_se, n, f"direct: mean of min(N(2), {cap + 1})", seed,
                        divergence_flag=diverging, details=details)
    integral = details['integral_route']
    return Estimate(integral['value'], integral['std_error'], n,
                    f"integral: median of {MEDIAN_OF_MEANS_BLOCKS} block means of 1/(1-C(U)) + 1", seed,
                    divergence_flag=diverging, details=details)


# Tail dependence -------------------------------------------------------------------------

@dataclass
class ChiBarTable:
    source: str
    pair: List[int]
    n_samples: int
    seed: Optional[int]
    rows: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return round12(asdict(self))


def _exceedance_counts(u: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Counts of (first > u, second > u, both > u) for each grid level, flattened."""
    a = u[:, 0][:, None] > grid[None, :]
    b = u[:, 1][:, None] > grid[None, :]
    return np.concatenate([a.sum(axis=0), b.sum(axis=0), (a & b).sum(axis=0)])


def _chi_counts_chunk(copula, pair, grid, size, rng):
    u = sample_copulas(copula, rng, size)[:, list(pair)]
    return _exceedance_counts(u, grid)[None, :]


def _chi_bar_row(level: float, n: int, n_a: int, n_b: int, n_ab: int) -> Dict[str, Any]:
    p1 = (n_a + n_b) / (2.0 * n)
    p12 = n_ab / n
    row = {'u': level, 'joint_exceedances': n_ab, 'marginal_exceedances': n_a + n_b,
           'low_count': n_ab < MIN_EXCEEDANCES}
    if n_ab == 0 or p12 >= 1 or p1 <= 0:
        row.update({'chi_bar': float('nan'), 'std_error': float('nan')})
        return row
    a, b = math.log(p1), math.log(p12)
    value = 2.0 * a / b - 1.0
    # per-observation moments of h = (1{X1>u} + 1{X2>u}) / 2 and j = 1{both > u}
    var_h = (n_a + n_b + 2.0 * n_ab) / (4.0 * n) - p1 * p1
    var_j = p12 - p12 * p12
    cov = p12 - p1 * p12
    g1 = 2.0 / (b * p1)
    g2 = -2.0 * a / (b * b * p12)
    variance = max(g1 * g1 * var_h + 2.0 * g1 * g2 * cov + g2 * g2 * var_j, 0.0) / n
    row.update({'chi_bar': value, 'std_error': math.sqrt(variance)})
    return row


def chi_bar(source: Union[CopulaModel, np.ndarray], u_grid: Sequence[float], n_samples: Optional[int] = None,
            seed: Optional[int] = None, pair: Sequence[int] = (0, 1), workers: int = 1) -> ChiBarTable:
    """
    chi_bar(u) = 2 log P(X1 > u) / log P(X1 > u, X2 > u) - 1 on a grid of levels.

    ``source`` is a copula (sampled ``n_samples`` times) or an (n, d) data
    array, which is moved to the copula scale by (rank - 0.5) / n. The
    marginal probability pools both coordinates of the pair.
    """
    grid = np.asarray(u_grid, dtype=float)
    if grid.size == 0 or np.any((grid <= 0) | (grid >= 1)):
        raise ValueError("u-grid levels must lie strictly inside (0, 1)")
    pair = [int(p) for p in pair]
    if len(pair) != 2 or pair[0] == pair[1]:
        raise ValueError("chi_bar needs two distinct coordinates")
    if isinstance(source, CopulaModel):
        if max(pair) >= source.dim:
            raise DimensionError(f"pair {pair} out of range for dimension {source.dim}")
        if n_samples is None or seed is None:
            raise ValueError("sampling a copula needs n_samples and seed")
        counts = map_chunks(partial(_chi_counts_chunk, source, tuple(pair), grid), n_samples, seed,
                            workers, route=_DIRECT).sum(axis=0)
        label, n = str(source), n_samples
    else:
        data = np.asarray(source, dtype=float)
        if data.ndim != 2 or max(pair) >= data.shape[1]:
            raise DimensionError(f"pair {pair} out of range for data of shape {data.shape}")
        u = pit_transform(data[:, pair], 'rank')
        counts = _exceedance_counts(u, grid)
        label, n = "data", data.shape[0]
    g = grid.size
    table = ChiBarTable(label, pair, n, seed)
    for i, level in enumerate(grid):
        row = _chi_bar_row(float(level), n, int(counts[i]), int(counts[g + i]), int(counts[2 * g + i]))
        if row['low_count']:
            logger.warning("chi_bar at u=%g rests on only %d joint exceedances", level, row['joint_exceedances'])
        table.rows.append(row)
    return table


# Second record -------------------------------------------------------------------------------

def _second_record_formula_chunk(copula, x, size, rng):
    y = sample_copulas(copula, rng, size)
    c_x = copula_cdf(copula, x)
    c_low = np.atleast_1d(copula_cdf(copula, np.minimum(x, y)))
    c_y = np.atleast_1d(copula_cdf(copula, y))
    den = 1.0 - c_y
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(den > 0, (c_x - c_low) / den, 0.0)


def _second_record_inner_chunk(copula, x, inner, size, rng):
    y = sample_copulas(copula, rng, size)
    out = np.empty(size)
    step = max(1, REPLICATION_BUDGET // (inner * copula.dim))
    for start in range(0, size, step):
        ys = y[start:start + step]
        v = sample_copulas(copula, rng, ys.shape[0] * inner).reshape(ys.shape[0], inner, copula.dim)
        escape = np.any(v > ys[:, None, :], axis=2)
        inside = np.all(v <= x, axis=2)
        num = (escape & inside).sum(axis=1)
        den = escape.sum(axis=1)
        out[start:start + step] = np.where(den > 0, num / np.maximum(den, 1), 0.0)
    return out


def _second_record_direct_chunk(copula, x, cap, size, rng):
    first = sample_copulas(copula, rng, size)
    _, second, censored = draw_until_exceed(copula, first, rng, cap)
    hit = np.all(second <= x, axis=1).astype(float)
    hit[censored] = np.nan
    return hit


def second_record_df(copula: CopulaModel, x, n_samples: int, seed: int, cap: int = 100_000,
                     inner: int = 1024, workers: int = 1) -> Estimate:
    """
    P(X_{N(2)} <= x), the df of the observation at the second simple record.

    Formula route: E_y[(C(x) - C(min(x, y))) / (1 - C(y))] with y ~ C, using
    the closed-form df or, without one, ``inner`` nested copula draws per y.
    The direct route simulates the second record (sequences without one
    within ``cap`` draws are dropped and counted).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (copula.dim,):
        raise DimensionError(f"expected a point of dimension {copula.dim}, got shape {x.shape}")
    x = np.clip(x, 0.0, 1.0)
    if copula.has_closed_form:
        values = map_chunks(partial(_second_record_formula_chunk, copula, x), n_samples, seed, workers,
                            route=_ETA)
        method = "formula: E[(C(x) - C(min(x,y))) / (1 - C(y))]"
    else:
        values = map_chunks(partial(_second_record_inner_chunk, copula, x, inner), n_samples, seed,
                            workers, route=_ETA)
        method = f"formula: nested MC with {inner} inner draws per y"
    direct = map_chunks(partial(_second_record_direct_chunk, copula, x, cap), n_samples, seed, workers,
                        route=_DIRECT)
    kept = direct[~np.isnan(direct)]
    details: Dict[str, Any] = {'x': x.tolist(), 'censored': int(np.isnan(direct).sum())}
    if kept.size:
        details['direct_route'] = {
            'value': float(kept.mean()),
            'std_error': float(kept.std(ddof=1) / math.sqrt(kept.size)) if kept.size > 1 else 0.0,
            'n_samples': int(kept.size),
        }
    return _mean_estimate(values, method, seed, details=details)


# Norms ------------------------------------------------------------------------------------------

def _norm_chunk(model, a, size, rng):
    return (sample_generators(model, rng, size) * a).max(axis=1)


def norm_estimate(model: DependenceModel, x, n_samples: int, seed: int, workers: int = 1) -> Estimate:
    """Monte Carlo ||x||_D = E max_i |x_i| Z_i with a standard error."""
    arr, _ = model.check_vector(x)
    if arr.shape[0] != 1:
        raise DimensionError("norm_estimate takes a single vector")
    a = np.abs(arr[0])
    values = map_chunks(partial(_norm_chunk, model, a), n_samples, seed, workers, route=_GENERATOR)
    details = {} if model.family is Family.CUSTOM else {'closed_form': norm_eval(model, a)}
    return _mean_estimate(values, "generator: E max_i |x_i| Z_i", seed, details=details)
