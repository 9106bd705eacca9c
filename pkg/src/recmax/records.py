"""
Records and Champions
=====================
Streaming detection of simple records (strict exceedance of the running
componentwise maximum in at least one coordinate), complete records
(strict exceedance in every coordinate) and champions (an observation that
strictly dominates all others), plus simulation-based checks of the
record-time laws.

Indices reported to users are 1-based, matching record-time notation.
Exact ties never count as exceedances.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .models.copula import CopulaModel
from .models.results import (
    ChampionTieError, DataFormatError, DimensionError, ModelError, RecordSummary, round12,
)
from .samplers import copula_cdf, sample_copulas

logger = logging.getLogger(__name__)

DRAW_BUDGET = 4_000_000


@dataclass
class RecordScanState:
    """Running state of a single-pass record scan."""
    dim: Optional[int] = None
    n: int = 0
    running_max: Optional[np.ndarray] = None
    simple_record_times: List[int] = field(default_factory=list)
    complete_record_times: List[int] = field(default_factory=list)
    # per coordinate: index holding the maximum and the largest value among the others
    leader: Optional[np.ndarray] = None
    runner_up: Optional[np.ndarray] = None

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise DimensionError(f"observation must be a vector, got shape {x.shape}")
        if self.dim is not None and x.shape[0] != self.dim:
            raise DimensionError(
                f"observation {self.n + 1} has dimension {x.shape[0]}, expected {self.dim}"
            )
        return x

    def update(self, x) -> tuple:
        """Consume one observation; returns (is_simple, is_complete)."""
        x = self._check(x)
        simple = is_simple_record(x, self)
        complete = is_complete_record(x, self)
        self.n += 1
        if self.dim is None:
            self.dim = x.shape[0]
            self.running_max = x.copy()
            self.leader = np.full(self.dim, self.n)
            self.runner_up = np.full(self.dim, -np.inf)
        else:
            above = x > self.running_max
            tied = x == self.running_max
            self.runner_up = np.where(above | tied, self.running_max, np.maximum(self.runner_up, x))
            self.leader = np.where(above, self.n, self.leader)
            self.running_max = np.where(above, x, self.running_max)
        if simple:
            self.simple_record_times.append(self.n)
        if complete:
            self.complete_record_times.append(self.n)
        return simple, complete

    @property
    def champion(self) -> Optional[int]:
        """1-based index strictly dominating every other observation, if any."""
        if self.n == 0:
            return None
        if np.all(self.leader == self.leader[0]) and np.all(self.running_max > self.runner_up):
            return int(self.leader[0])
        return None

    def summary(self) -> RecordSummary:
        times = self.simple_record_times
        return RecordSummary(
            n=self.n,
            simple_count=len(times),
            complete_count=len(self.complete_record_times),
            champion_index=self.champion,
            simple_record_times=list(times),
            complete_record_times=list(self.complete_record_times),
            gaps=[b - a for a, b in zip(times, times[1:])],
        )


def is_simple_record(x, state: RecordScanState) -> bool:
    """True for the first observation or when some coordinate strictly exceeds the running max."""
    x = state._check(x)
    if state.n == 0:
        return True
    return bool(np.any(x > state.running_max))


def is_complete_record(x, state: RecordScanState) -> bool:
    """True for the first observation or when every coordinate strictly exceeds the running max."""
    x = state._check(x)
    if state.n == 0:
        return True
    return bool(np.all(x > state.running_max))


def scan(stream: Iterable[Union[Sequence[float], np.ndarray]]) -> RecordSummary:
    """
    Single pass over a stream of observations.

    Items may be single vectors or 2-D blocks of rows; the result does not
    depend on how the stream is chunked.
    """
    state = RecordScanState()
    for item in stream:
        arr = np.asarray(item, dtype=float)
        if arr.ndim == 2:
            for row in arr:
                state.update(row)
        else:
            state.update(arr)
    if state.n == 0:
        raise DataFormatError("cannot scan an empty stream")
    return state.summary()


def champion_index(batch) -> Optional[int]:
    """
    1-based index of the observation strictly dominating all others.

    Raises ChampionTieError when two observations both attain every
    coordinate maximum.
    """
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError("champion_index needs a nonempty (n, d) batch")
    if x.shape[0] == 1:
        return 1
    claimants = np.flatnonzero(np.all(x == x.max(axis=0), axis=1))
    if claimants.size > 1:
        raise ChampionTieError(
            f"observations {', '.join(str(i + 1) for i in claimants)} tie for champion"
        )
    if claimants.size == 0:
        return None
    k = int(claimants[0])
    others = np.delete(x, k, axis=0).max(axis=0)
    return k + 1 if np.all(x[k] > others) else None


def champion_mask(blocks: np.ndarray) -> np.ndarray:
    """For (r, n, d) replications: whether each replication has a champion."""
    if blocks.shape[1] == 1:
        return np.ones(blocks.shape[0], dtype=bool)
    top2 = -np.partition(-blocks, 1, axis=1)[:, :2, :]
    leaders = blocks.argmax(axis=1)
    same = np.all(leaders == leaders[:, :1], axis=1)
    strict = np.all(top2[:, 0, :] > top2[:, 1, :], axis=1)
    return same & strict


def record_indicators(blocks: np.ndarray):
    """(simple, complete) boolean arrays of shape (r, n) for (r, n, d) streams."""
    prev = np.maximum.accumulate(blocks, axis=1)[:, :-1, :]
    later = blocks[:, 1:, :]
    r = blocks.shape[0]
    first = np.ones((r, 1), dtype=bool)
    simple = np.concatenate([first, np.any(later > prev, axis=2)], axis=1)
    complete = np.concatenate([first, np.all(later > prev, axis=2)], axis=1)
    return simple, complete


# Record-time simulation -----------------------------------------------------------

@dataclass
class RecordSequences:
    """
    Simulated record sequences.

    gaps[r, k] is N(k+2) - N(k+1) (0 when not observed); a censored gap is
    stored as gap_cap + 1 and ends its sequence. levels[r, k] is the running
    maximum at the (k+1)-th record time.
    """
    gaps: np.ndarray
    censored: np.ndarray
    levels: np.ndarray
    gap_cap: int


def draw_until_exceed(copula: CopulaModel, level: np.ndarray, rng: np.random.Generator,
                      cap: int):
    """
    For each row of ``level`` draw copula vectors until one is not <= the row.

    Returns (gap, new_value, censored) where censored rows never exceeded
    within ``cap`` draws.
    """
    k, d = level.shape
    gap = np.zeros(k, dtype=np.int64)
    found = np.zeros(k, dtype=bool)
    new = np.full((k, d), np.nan)
    pending = np.arange(k)
    used = 0
    block = 1
    while pending.size and used < cap:
        b = int(min(block, cap - used, max(1, DRAW_BUDGET // (pending.size * d))))
        x = sample_copulas(copula, rng, pending.size * b).reshape(pending.size, b, d)
        exceed = np.any(x > level[pending, None, :], axis=2)
        hit = exceed.any(axis=1)
        first = exceed.argmax(axis=1)
        rows = pending[hit]
        gap[rows] = used + first[hit] + 1
        new[rows] = x[hit, first[hit]]
        found[rows] = True
        pending = pending[~hit]
        used += b
        block *= 2
    censored = ~found
    gap[censored] = cap + 1
    return gap, new, censored


def simulate_record_sequences(copula: CopulaModel, n_gaps: int, reps: int,
                              rng: np.random.Generator, gap_cap: int) -> RecordSequences:
    """Simulate ``reps`` record sequences with up to ``n_gaps`` successive gaps each."""
    if n_gaps < 1 or reps < 1:
        raise ValueError("n_gaps and reps must be positive")
    d = copula.dim
    running = sample_copulas(copula, rng, reps)
    levels = np.full((reps, n_gaps + 1, d), np.nan)
    levels[:, 0] = running
    gaps = np.zeros((reps, n_gaps), dtype=np.int64)
    censored = np.zeros((reps, n_gaps), dtype=bool)
    alive = np.arange(reps)
    for k in range(n_gaps):
        if not alive.size:
            break
        gap, new, cens = draw_until_exceed(copula, running[alive], rng, gap_cap)
        gaps[alive, k] = gap
        censored[alive, k] = cens
        alive = alive[~cens]
        running[alive] = np.maximum(running[alive], new[~cens])
        levels[alive, k + 1] = running[alive]
    n_cens = int(censored.sum())
    if n_cens:
        logger.info("%d record sequences stopped at a gap longer than %d", n_cens, gap_cap)
    return RecordSequences(gaps, censored, levels, gap_cap)


@dataclass
class GapBin:
    lower: float
    upper: float
    n_gaps: int
    chi2: float
    dof: int
    p_value: float
    z_score: float


@dataclass
class GapLawReport:
    """Chi-square comparison of record gaps with Geom(1 - C(level))."""
    copula: str
    n_gaps: int
    max_category: int
    bins: List[GapBin]
    pooled_observed: List[float]
    pooled_expected: List[float]
    passed: bool

    def to_dict(self) -> dict:
        return round12(asdict(self))


def _geometric_cells(c: np.ndarray, max_category: int) -> np.ndarray:
    """(n, K) cell probabilities: P(gap = k) for k < K and P(gap >= K)."""
    k = np.arange(1, max_category)
    probs = np.power(c[:, None], k - 1) * (1.0 - c[:, None])
    tail = np.power(c, max_category - 1)
    return np.column_stack([probs, tail])


def _merge_cells(observed: np.ndarray, expected: np.ndarray, minimum: float = 5.0):
    obs_groups, exp_groups = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= minimum:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp_groups:
            obs_groups[-1] += o_acc
            exp_groups[-1] += e_acc
        else:
            obs_groups.append(o_acc)
            exp_groups.append(e_acc)
    return np.array(obs_groups), np.array(exp_groups)


def conditional_gap_law_check(copula: CopulaModel, n_records: int, reps: int,
                              rng: np.random.Generator, n_bins: int = 20,
                              max_category: int = 30, sigmas: float = 4.0) -> GapLawReport:
    """
    Test that record gaps are Geom(1 - C(m)) given the running maximum m.

    Simulates ``reps`` sequences of ``n_records`` gaps, groups the gaps into
    ``n_bins`` equal-probability bins of C(m) and runs a chi-square test per
    bin over categories 1 .. max_category-1 and ">= max_category".
    """
    if not copula.has_closed_form:
        raise ModelError(f"{copula} has no closed-form df; the gap law check needs C")
    seqs = simulate_record_sequences(copula, n_records, reps, rng, gap_cap=max_category - 1)
    observed_mask = seqs.gaps > 0
    levels = seqs.levels[:, :-1, :][observed_mask]
    gaps = np.minimum(seqs.gaps[observed_mask], max_category)
    c = np.atleast_1d(copula_cdf(copula, levels))
    cells = _geometric_cells(c, max_category)
    edges = np.quantile(c, np.linspace(0.0, 1.0, n_bins + 1))
    which = np.clip(np.searchsorted(edges, c, side='right') - 1, 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        sel = which == b
        if not sel.any():
            continue
        observed = np.bincount(gaps[sel] - 1, minlength=max_category).astype(float)
        expected = cells[sel].sum(axis=0)
        o, e = _merge_cells(observed, expected)
        chi2 = float(np.sum((o - e) ** 2 / e)) if e.size > 1 else 0.0
        dof = max(int(e.size) - 1, 0)
        p_value = float(stats.chi2.sf(chi2, dof)) if dof else 1.0
        z = float(stats.norm.isf(p_value)) if p_value < 1.0 else float('-inf')
        bins.append(GapBin(float(edges[b]), float(edges[b + 1]), int(sel.sum()), chi2, dof, p_value, z))
    total = len(gaps)
    pooled_obs = np.bincount(gaps - 1, minlength=max_category) / total
    pooled_exp = cells.sum(axis=0) / total
    passed = all(b.z_score < sigmas for b in bins)
    return GapLawReport(str(copula), total, max_category, bins,
                        pooled_obs.tolist(), pooled_exp.tolist(), passed)


@dataclass
class MonotonicityReport:
    """Empirical dfs of successive record gaps and their pairwise ordering."""
    copula: str
    t_max: int
    gap_cdfs: List[List[float]]
    sample_sizes: List[int]
    mean_gaps: List[float]
    violations: List[dict]
    passed: bool

    def to_dict(self) -> dict:
        return round12(asdict(self))


def stochastic_monotonicity_check(copula: CopulaModel, max_n: int, reps: int,
                                  rng: np.random.Generator, t_max: int = 50,
                                  gap_cap: int = 100_000, sigmas: float = 4.0) -> MonotonicityReport:
    """
    Check P(N(n+1)-N(n) <= t) >= P(N(n+2)-N(n+1) <= t) for n < max_n, t <= t_max.

    Sequences whose gap exceeds ``gap_cap`` stop there; later gaps use the
    remaining sequences. ``mean_gaps`` are truncated at ``gap_cap + 1``.
    """
    seqs = simulate_record_sequences(copula, max_n, reps, rng, gap_cap=max(gap_cap, t_max))
    t = np.arange(1, t_max + 1)
    cdfs, sizes, means = [], [], []
    for k in range(max_n):
        g = seqs.gaps[:, k]
        g = g[g > 0]
        sizes.append(int(g.size))
        cdfs.append((g[:, None] <= t[None, :]).mean(axis=0) if g.size else np.full(t_max, np.nan))
        means.append(float(g.mean()) if g.size else float('nan'))
    violations = []
    for k in range(max_n - 1):
        f0, f1 = cdfs[k], cdfs[k + 1]
        n0, n1 = sizes[k], sizes[k + 1]
        if not n0 or not n1:
            continue
        se = np.sqrt(f0 * (1 - f0) / n0 + f1 * (1 - f1) / n1)
        bad = f0 < f1 - sigmas * se - 1e-12
        for ti in np.flatnonzero(bad):
            violations.append({'gap': k + 1, 't': int(t[ti]), 'earlier': float(f0[ti]),
                               'later': float(f1[ti]), 'se': float(se[ti])})
    return MonotonicityReport(str(copula), t_max, [list(map(float, c)) for c in cdfs],
                              sizes, means, violations, not violations)


# Probability integral transform ------------------------------------------------------

def _margin_distribution(spec: str):
    parts = spec.strip().lower().split(':')
    name, args = parts[0], parts[1:]
    try:
        values = [float(a) for a in args]
    except ValueError:
        raise ModelError(f"margin '{spec}': parameters must be numbers") from None

    def need(count_min, count_max):
        if not count_min <= len(values) <= count_max:
            raise ModelError(f"margin '{spec}': wrong number of parameters")

    if name == 'rank':
        need(0, 0)
        return None
    if name == 'uniform':
        need(0, 2)
        a, b = (values + [0.0, 1.0][len(values):])[:2] if len(values) != 1 else (values[0], values[0] + 1)
        if not b > a:
            raise ModelError(f"margin '{spec}': upper bound must exceed lower bound")
        return stats.uniform(loc=a, scale=b - a)
    if name == 'normal':
        need(0, 2)
        mu, sigma = (values + [0.0, 1.0][len(values):])[:2]
        if not sigma > 0:
            raise ModelError(f"margin '{spec}': sigma must be positive")
        return stats.norm(loc=mu, scale=sigma)
    if name == 'exponential':
        need(0, 1)
        rate = values[0] if values else 1.0
        if not rate > 0:
            raise ModelError(f"margin '{spec}': rate must be positive")
        return stats.expon(scale=1.0 / rate)
    if name == 'frechet':
        need(1, 2)
        alpha = values[0]
        scale = values[1] if len(values) > 1 else 1.0
        if not (alpha > 0 and scale > 0):
            raise ModelError(f"margin '{spec}': alpha and scale must be positive")
        return stats.invweibull(alpha, scale=scale)
    if name == 'gumbel':
        need(0, 2)
        mu, beta = (values + [0.0, 1.0][len(values):])[:2]
        if not beta > 0:
            raise ModelError(f"margin '{spec}': scale must be positive")
        return stats.gumbel_r(loc=mu, scale=beta)
    raise ModelError(f"unknown margin '{spec}' (uniform, normal, exponential, frechet, gumbel, rank)")


def pit_transform(rows, margins: Union[str, Sequence[str]]) -> np.ndarray:
    """
    Componentwise probability-integral transform to the copula scale.

    ``margins`` is one spec for all coordinates or one per coordinate;
    ``rank`` maps to (rank - 0.5) / n with average ranks for ties.
    """
    x = np.atleast_2d(np.asarray(rows, dtype=float))
    n, d = x.shape
    specs = [margins] * d if isinstance(margins, str) else list(margins)
    if len(specs) != d:
        raise DimensionError(f"{len(specs)} margin specs for {d} coordinates")
    out = np.empty_like(x)
    for j, spec in enumerate(specs):
        dist = _margin_distribution(spec)
        if dist is None:
            out[:, j] = (stats.rankdata(x[:, j]) - 0.5) / n
        else:
            out[:, j] = dist.cdf(x[:, j])
    return out
