"""Multilevel estimator drivers: statistics, allocation, stopping, rates.

The drivers are generic over a pair sampler, an object with

    dimension(level) -> int
    evaluate(level, xi) -> (y, q, work)

where ``xi`` is a (batch, dimension) array of standard normals and the
returned arrays hold the level correction Y_l = Q_l - Q_{l-1} (Y_0 = Q_0),
the fine value Q_l, and the work spent per sample.  Level 0 returns Y_0 = Q_0.

All sample values are retained and aggregated with numpy's pairwise
summation, so accumulation is order-independent to near round-off.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import InsufficientDataError, MaxLevelExceededError
from .sampler import PSEUDO_RANDOM, SOBOL_SCRAMBLED, SampleStream

MC_MODE = "mc"
QMC_MODE = "qmc"


def level_seed(root_seed: int, level: int) -> int:
    """Derived per-level seed; levels own disjoint stream namespaces."""
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=(level,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class LevelRecord:
    """Running per-level statistics of one estimator run.

    Monte Carlo mode keeps flat arrays of Y and Q samples; QMC mode keeps one
    array per randomization (the per-randomization partial means are the
    ``rand_means`` property).  ``work_total`` is in level-0 sweep equivalents.
    """

    level: int
    mode: str = MC_MODE
    n_randomizations: int = 0
    y: np.ndarray = field(default_factory=lambda: np.empty(0))
    q: np.ndarray = field(default_factory=lambda: np.empty(0))
    y_rand: Optional[List[np.ndarray]] = None
    q_rand: Optional[List[np.ndarray]] = None
    work_total: float = 0.0

    def __post_init__(self):
        if self.mode == QMC_MODE:
            if self.n_randomizations < 2:
                raise ValueError("QMC records need at least 2 randomizations")
            if self.y_rand is None:
                self.y_rand = [np.empty(0) for _ in range(self.n_randomizations)]
                self.q_rand = [np.empty(0) for _ in range(self.n_randomizations)]
        elif self.mode != MC_MODE:
            raise ValueError(f"unknown record mode {self.mode!r}")

    # -- sample counts ---------------------------------------------------------

    @property
    def n_samples(self) -> int:
        """MC: samples taken.  QMC: points per randomization."""
        if self.mode == MC_MODE:
            return len(self.y)
        return len(self.y_rand[0])

    @property
    def n_evaluations(self) -> int:
        if self.mode == MC_MODE:
            return len(self.y)
        return sum(len(a) for a in self.y_rand)

    # -- estimates -------------------------------------------------------------

    @property
    def rand_means(self) -> np.ndarray:
        if self.mode != QMC_MODE:
            raise ValueError("rand_means is only defined for QMC records")
        return np.array([np.mean(a) for a in self.y_rand])

    @property
    def mean_y(self) -> float:
        if self.n_samples == 0:
            raise ValueError(f"level {self.level} has no samples")
        if self.mode == MC_MODE:
            return float(np.mean(self.y))
        return float(np.mean(self.rand_means))

    @property
    def var_y(self) -> float:
        """Level variance V_l: unbiased sample variance of Y (MC) or variance
        across randomization means (QMC)."""
        if self.mode == MC_MODE:
            if self.n_samples < 2:
                return 0.0
            return float(np.var(self.y, ddof=1))
        return float(np.var(self.rand_means, ddof=1))

    @property
    def mean_q(self) -> float:
        if self.mode == MC_MODE:
            return float(np.mean(self.q))
        return float(np.mean([np.mean(a) for a in self.q_rand]))

    @property
    def var_q(self) -> float:
        if self.mode == MC_MODE:
            return float(np.var(self.q, ddof=1)) if len(self.q) > 1 else 0.0
        pooled = np.concatenate(self.q_rand)
        return float(np.var(pooled, ddof=1)) if len(pooled) > 1 else 0.0

    @property
    def estimator_variance(self) -> float:
        """Variance of this level's estimator mean."""
        if self.n_samples == 0:
            return math.inf
        if self.mode == MC_MODE:
            return self.var_y / self.n_samples
        return self.var_y / self.n_randomizations

    @property
    def cost_per_sample(self) -> float:
        n = self.n_evaluations
        return self.work_total / n if n else 0.0

    # -- growth ----------------------------------------------------------------

    def extend(self, y: np.ndarray, q: np.ndarray, work: float) -> None:
        if self.mode != MC_MODE:
            raise ValueError("extend() is for MC records")
        self.y = np.concatenate([self.y, np.asarray(y, dtype=float)])
        self.q = np.concatenate([self.q, np.asarray(q, dtype=float)])
        self.work_total += float(work)


def level_estimator_mean(record: LevelRecord) -> float:
    """The level's contribution to the telescoped estimate."""
    return record.mean_y


def optimal_allocation(v: Sequence[float], c: Sequence[float], epsilon: float) -> np.ndarray:
    """Sample counts minimizing total cost subject to sum(V_l/N_l) <= eps^2/2.

    The Lagrange solution rounded up; with all variances zero, one sample per
    level is returned.
    """
    v = np.asarray(v, dtype=float)
    c = np.asarray(c, dtype=float)
    if v.shape != c.shape:
        raise ValueError("variance and cost lists must have equal length")
    if np.any(v < 0.0):
        raise ValueError("variances must be nonnegative")
    if np.any(c <= 0.0):
        raise ValueError("costs must be strictly positive")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if np.all(v == 0.0):
        return np.ones(len(v), dtype=np.int64)
    total = np.sum(np.sqrt(v * c))
    n = np.ceil(2.0 / epsilon ** 2 * np.sqrt(v / c) * total)
    return np.maximum(n, 1).astype(np.int64)


class Regime(enum.Enum):
    """Asymptotic cost regime implied by the fitted rates."""

    BETA_GT_GAMMA = "beta>gamma"   # cost O(eps^-2)
    BETA_EQ_GAMMA = "beta=gamma"   # cost O(eps^-2 log(eps)^2)
    BETA_LT_GAMMA = "beta<gamma"   # cost O(eps^-(2+(gamma-beta)/alpha))


@dataclass(frozen=True)
class RateEstimates:
    """Fitted decay/growth exponents of mean, variance and cost per level."""

    alpha: float
    beta: float
    gamma: float
    levels_used: tuple
    residuals: dict

    ALPHA_FLOOR = 0.5


def _log2_slope(levels, values):
    """Least-squares slope of log2(values) against level; None if underdetermined."""
    levels = np.asarray(levels, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values) & (values > 0.0)
    if np.count_nonzero(ok) < 2:
        return None, float("nan")
    coeffs, res, *_ = np.polyfit(levels[ok], np.log2(values[ok]), 1, full=True)
    ss = float(res[0]) if len(res) else 0.0
    return float(coeffs[0]), ss


def estimate_rates(records: Sequence[LevelRecord],
                   alpha_floor: float = RateEstimates.ALPHA_FLOOR) -> RateEstimates:
    """Fit the per-level decay of |mean Y|, V and growth of cost over levels >= 1.

    Alpha is floored (default 0.5) to keep the Richardson denominator away
    from zero when early data is noisy; with no decay signal at all (all
    corrections exactly zero) the nominal first-order rate is assumed.
    """
    usable = [r for r in records if r.n_samples >= 2]
    if len(usable) < 3:
        raise InsufficientDataError(
            f"rate estimation needs >= 3 levels with >= 2 samples, have {len(usable)}"
        )
    fit = [r for r in usable if r.level >= 1]
    levels = [r.level for r in fit]

    slope_y, res_y = _log2_slope(levels, [abs(r.mean_y) for r in fit])
    slope_v, res_v = _log2_slope(levels, [r.var_y for r in fit])
    slope_c, res_c = _log2_slope(levels, [r.cost_per_sample for r in fit])

    alpha = -slope_y if slope_y is not None else 1.0
    beta = -slope_v if slope_v is not None else 0.0
    gamma = slope_c if slope_c is not None else 0.0
    return RateEstimates(
        alpha=max(alpha, alpha_floor),
        beta=beta,
        gamma=gamma,
        levels_used=tuple(levels),
        residuals={"alpha": res_y, "beta": res_v, "gamma": res_c},
    )


def weak_error_estimate(mean_y_last: float, alpha: float) -> float:
    """Richardson extrapolation of the remaining discretization bias."""
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    return abs(mean_y_last) / (2.0 ** alpha - 1.0)


def regime(rates: RateEstimates) -> Regime:
    """Classify the cost regime; beta and gamma within 0.1 count as equal."""
    if abs(rates.beta - rates.gamma) <= 0.1:
        return Regime.BETA_EQ_GAMMA
    if rates.beta > rates.gamma:
        return Regime.BETA_GT_GAMMA
    return Regime.BETA_LT_GAMMA


@dataclass(frozen=True)
class DriverConfig:
    """Knobs of the adaptive drivers."""

    seed: int = 0
    initial_samples: int = 100    # MC warmup per new level
    initial_points: int = 16      # QMC points per randomization on a new level
    n_randomizations: int = 24
    start_level: int = 2
    max_level: int = 7
    alpha_floor: float = 0.5
    qmc_kind: str = SOBOL_SCRAMBLED


@dataclass
class EstimatorResult:
    """Final estimate with its per-level breakdown and diagnostics."""

    estimate: float
    levels: List[LevelRecord]
    rates: Optional[RateEstimates]
    epsilon: float
    total_work: float
    regime: Optional[Regime]
    method: str

    @property
    def estimator_variance(self) -> float:
        return float(sum(r.estimator_variance for r in self.levels))


def _assemble_result(records: Dict[int, LevelRecord], epsilon: float, method: str,
                     alpha_floor: float) -> EstimatorResult:
    recs = [records[l] for l in sorted(records)]
    estimate = float(np.sum([level_estimator_mean(r) for r in recs]))
    try:
        rates = estimate_rates(recs, alpha_floor)
        reg = regime(rates)
    except InsufficientDataError:
        rates, reg = None, None
    return EstimatorResult(
        estimate=estimate,
        levels=recs,
        rates=rates,
        epsilon=epsilon,
        total_work=float(sum(r.work_total for r in recs)),
        regime=reg,
        method=method,
    )


def mlmc_run(sampler, epsilon: float, config: DriverConfig = DriverConfig()) -> EstimatorResult:
    """Adaptive multilevel Monte Carlo.

    Starts at the configured start level, keeps the per-level sample counts
    at the cost-optimal allocation, and stops once the Richardson-extrapolated
    weak error of the last level drops below eps/sqrt(2); otherwise a level is
    added.  At every exit sum(V_l/N_l) <= eps^2/2 holds.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    top = config.start_level
    records: Dict[int, LevelRecord] = {}
    targets: Dict[int, int] = {}
    streams: Dict[int, SampleStream] = {}

    def add_level(lvl: int) -> None:
        records[lvl] = LevelRecord(level=lvl)
        targets[lvl] = config.initial_samples
        streams[lvl] = SampleStream(
            kind=PSEUDO_RANDOM,
            dimension=sampler.dimension(lvl),
            seed=level_seed(config.seed, lvl),
        )

    for lvl in range(top + 1):
        add_level(lvl)

    while True:
        pending = False
        for lvl in sorted(records):
            rec = records[lvl]
            extra = targets[lvl] - rec.n_samples
            if extra > 0:
                pending = True
                xi = streams[lvl].normals_block(rec.n_samples, extra)
                y, q, work = sampler.evaluate(lvl, xi)
                rec.extend(y, q, float(np.sum(work)))
        levels = sorted(records)
        v = [max(records[l].var_y, 0.0) for l in levels]
        c = [records[l].cost_per_sample for l in levels]
        alloc = optimal_allocation(v, c, epsilon)
        for l, n_opt in zip(levels, alloc):
            targets[l] = max(targets[l], int(n_opt))
        if pending or any(targets[l] > records[l].n_samples for l in levels):
            continue

        rates = estimate_rates([records[l] for l in levels], config.alpha_floor)
        if weak_error_estimate(records[top].mean_y, rates.alpha) < epsilon / math.sqrt(2.0):
            break
        top += 1
        if top > config.max_level:
            raise MaxLevelExceededError(
                f"weak error still above tolerance at max level {config.max_level}",
                partial_result=_assemble_result(records, epsilon, "mlmc", config.alpha_floor),
            )
        add_level(top)

    return _assemble_result(records, epsilon, "mlmc", config.alpha_floor)


def mlqmc_run(sampler, epsilon: float, config: DriverConfig = DriverConfig()) -> EstimatorResult:
    """Adaptive multilevel quasi-Monte Carlo.

    Each level carries randomized QMC point sets (R independent
    randomizations); while the total estimator variance exceeds eps^2/2 the
    point count of the level with the best variance-per-cost profit is
    doubled (ties go to the smaller level).  The weak-error test then decides
    between stopping and adding a level.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    r_count = config.n_randomizations
    top = config.start_level
    records: Dict[int, LevelRecord] = {}
    targets: Dict[int, int] = {}

    def add_level(lvl: int) -> None:
        records[lvl] = LevelRecord(level=lvl, mode=QMC_MODE, n_randomizations=r_count)
        targets[lvl] = config.initial_points

    def grow(lvl: int) -> None:
        rec = records[lvl]
        n_new = targets[lvl]
        dim = sampler.dimension(lvl)
        seed = level_seed(config.seed, lvl)
        for r in range(r_count):
            stream = SampleStream(kind=config.qmc_kind, dimension=dim, seed=seed,
                                  randomization_index=r)
            n_have = len(rec.y_rand[r])
            if n_have == n_new:
                continue
            if config.qmc_kind == SOBOL_SCRAMBLED and n_have > 0:
                # nested: evaluate only the new tail of the sequence
                xi = stream.qmc_normals(n_new)[n_have:]
                y, q, work = sampler.evaluate(lvl, xi)
                rec.y_rand[r] = np.concatenate([rec.y_rand[r], y])
                rec.q_rand[r] = np.concatenate([rec.q_rand[r], q])
            else:
                # lattice points move when N changes: re-evaluate the whole rule
                xi = stream.qmc_normals(n_new)
                y, q, work = sampler.evaluate(lvl, xi)
                rec.y_rand[r] = np.asarray(y, dtype=float)
                rec.q_rand[r] = np.asarray(q, dtype=float)
            rec.work_total += float(np.sum(work))

    for lvl in range(top + 1):
        add_level(lvl)

    while True:
        for lvl in sorted(records):
            grow(lvl)
        levels = sorted(records)
        est_var = np.array([records[l].estimator_variance for l in levels])
        if float(np.sum(est_var)) > epsilon ** 2 / 2.0:
            profit = [records[l].var_y / (records[l].n_samples * max(records[l].cost_per_sample, 1e-300))
                      for l in levels]
            best = levels[int(np.argmax(profit))]  # argmax takes the smallest level on ties
            targets[best] *= 2
            continue

        rates = estimate_rates([records[l] for l in levels], config.alpha_floor)
        if weak_error_estimate(records[top].mean_y, rates.alpha) < epsilon / math.sqrt(2.0):
            break
        top += 1
        if top > config.max_level:
            raise MaxLevelExceededError(
                f"weak error still above tolerance at max level {config.max_level}",
                partial_result=_assemble_result(records, epsilon, "mlqmc", config.alpha_floor),
            )
        add_level(top)

    method = "mlqmc_sobol" if config.qmc_kind == SOBOL_SCRAMBLED else "mlqmc_lattice"
    return _assemble_result(records, epsilon, method, config.alpha_floor)


@dataclass(frozen=True)
class QmcVarianceFit:
    """Estimator variance against point count for one level, plus fitted rate."""

    level: int
    n_values: tuple
    variances: tuple
    rate: float


def qmc_variance_test(sampler, level: int, n_grid: Sequence[int], kind: str,
                      seed: int = 0, n_randomizations: int = 24) -> QmcVarianceFit:
    """Measure how the level-estimator variance decays with the point count.

    For each N the variance across independent randomizations (or across
    independent pseudo-random replicas for the MC reference) is recorded;
    the returned rate is the least-squares slope of log2(variance) against
    log2(N).  MC fits -1, QMC fits below -1 on smooth integrands.
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3:
        raise InsufficientDataError("variance test needs at least 3 point counts")
    if any(n2 <= n1 for n1, n2 in zip(n_grid, n_grid[1:])) or any(
            n & (n - 1) for n in n_grid):
        raise ValueError("point counts must be increasing powers of two")
    dim = sampler.dimension(level)
    seed_l = level_seed(seed, level)
    variances = []
    for n in n_grid:
        means = []
        for r in range(n_randomizations):
            stream = SampleStream(kind=kind, dimension=dim, seed=seed_l,
                                  randomization_index=r)
            if kind == PSEUDO_RANDOM:
                xi = stream.normals_block(0, n)
            else:
                xi = stream.qmc_normals(n)
            y, _, _ = sampler.evaluate(level, xi)
            means.append(float(np.mean(y)))
        variances.append(float(np.var(means, ddof=1)))
    slope, _ = _log2_slope(np.log2(n_grid), variances)
    # the abscissa is log2(N), so the slope is directly the fitted rate;
    # a degenerate (zero-variance) level has no rate
    return QmcVarianceFit(level=level, n_values=tuple(n_grid),
                          variances=tuple(variances),
                          rate=float("nan") if slope is None else float(slope))
