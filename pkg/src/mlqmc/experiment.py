"""Configuration-driven experiment harness emitting analysis-ready CSV files.

A run covers one benchmark case, one random-field parameter set and one
sampling method over a list of accuracy targets, and writes per-level
variance tables, a cost-versus-accuracy table, a run summary, and (for QMC
methods) a point-count variance test.  Artifacts are plain CSV; plotting is
left to the consumer.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .estimators import (
    DriverConfig,
    EstimatorResult,
    Regime,
    _log2_slope,
    mlmc_run,
    mlqmc_run,
    qmc_variance_test,
)
from .grid import DIRICHLET, NEUMANN, EastBoundaryFlux, PointValue, ProblemSpec
from .pde import BasisCache, PdePairSampler, PdeSetup
from .random_field import MaternParams
from .sampler import LATTICE_SHIFTED, PSEUDO_RANDOM, SOBOL_SCRAMBLED

OUTPUT_DIR_ENV = "MLQMC_OUTPUT_DIR"

CASE_NAMES = ("CaseI", "CaseII")
METHOD_KINDS = {
    "MLMC": PSEUDO_RANDOM,
    "MLQMC_Lattice": LATTICE_SHIFTED,
    "MLQMC_Sobol": SOBOL_SCRAMBLED,
}
FIELD_PARAMS = {
    1: MaternParams(nu=0.5, corr_length=0.5, variance=1.0),
    2: MaternParams(nu=0.5, corr_length=1.0, variance=1.0),
    3: MaternParams(nu=1.0, corr_length=0.5, variance=1.0),
    4: MaternParams(nu=1.0, corr_length=1.0, variance=1.0),
}

LEVELS_HEADER = "level,N_l,mean_Y,V_l,mean_Q,Var_Q,C_l"
SUMMARY_HEADER = "epsilon,estimate,total_work,alpha,beta,gamma,regime"
COST_HEADER = "epsilon,estimate,total_work,cost_slope"
QMC_TEST_HEADER = "level,N,estimator_variance,fitted_rate"
COMPARE_HEADER_PREFIX = "level"


def case_problem(case: str) -> ProblemSpec:
    """The two benchmark configurations: a Dirichlet box with a center point
    value, and a west-to-east flow with the east outflow as the quantity."""
    if case == "CaseI":
        return ProblemSpec(
            edge_kind={e: DIRICHLET for e in "WENS"},
            dirichlet_values={"W": 100.0, "E": 0.0, "N": 50.0, "S": 10.0},
            neumann_values={},
            qoi=PointValue(0.5, 0.5),
        )
    if case == "CaseII":
        return ProblemSpec(
            edge_kind={"W": DIRICHLET, "E": DIRICHLET, "N": NEUMANN, "S": NEUMANN},
            dirichlet_values={"W": 100.0, "E": 0.0},
            neumann_values={"N": 0.0, "S": 0.0},
            qoi=EastBoundaryFlux(),
        )
    raise ValueError(f"unknown case {case!r}; expected one of {CASE_NAMES}")


@dataclass(frozen=True)
class RunConfig:
    """Fully validated description of one experiment."""

    case: str
    field_id: int
    method: str
    epsilon_list: Tuple[float, ...] = (0.5, 0.25, 0.125, 0.0625)
    seed: int = 0
    max_level: int = 6
    tau: float = 1e-10
    output_dir: str = "."
    initial_samples: int = 100
    initial_points: int = 16
    n_randomizations: int = 24
    start_level: int = 2
    energy_target: float = 0.99
    fmg_byproduct: bool = True
    force_unit_coefficient: bool = False
    qmc_test_levels: Tuple[int, ...] = (0, 1, 2, 3)
    qmc_test_points: Tuple[int, ...] = (16, 32, 64, 128, 256)

    def __post_init__(self):
        if self.case not in CASE_NAMES:
            raise ConfigError(f"case must be one of {CASE_NAMES}, got {self.case!r}")
        if self.field_id not in FIELD_PARAMS:
            raise ConfigError(f"field_id must be in 1..4, got {self.field_id}")
        if self.method not in METHOD_KINDS:
            raise ConfigError(f"method must be one of {tuple(METHOD_KINDS)}, got {self.method!r}")
        if not self.epsilon_list or any(e <= 0 for e in self.epsilon_list):
            raise ConfigError("epsilon_list must be nonempty positive values")
        if not 0 <= self.start_level <= self.max_level:
            raise ConfigError("need 0 <= start_level <= max_level")
        if not 0.0 < self.tau < 1.0:
            raise ConfigError(f"tau must lie in (0, 1), got {self.tau}")

    @property
    def artifact_prefix(self) -> str:
        return f"{self.method}_{self.case}_field{self.field_id}"


_BOOL_VALUES = {"true": True, "false": False, "1": True, "0": False,
                "yes": True, "no": False}


def _parse_value(key: str, raw: str, lineno: int):
    hints = {f.name: f.type for f in fields(RunConfig)}
    hint = hints[key]
    try:
        if key in ("epsilon_list",):
            return tuple(float(tok) for tok in raw.replace(",", " ").split())
        if key in ("qmc_test_levels", "qmc_test_points"):
            return tuple(int(tok) for tok in raw.replace(",", " ").split())
        if hint in ("int", int):
            return int(raw)
        if hint in ("float", float):
            return float(raw)
        if hint in ("bool", bool):
            if raw.lower() not in _BOOL_VALUES:
                raise ValueError(f"not a boolean: {raw!r}")
            return _BOOL_VALUES[raw.lower()]
        return raw
    except ValueError as err:
        raise ConfigError(f"line {lineno}: invalid value for {key}: {err}") from err


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines ('#' comments allowed) into a RunConfig.

    Unknown keys and malformed values raise :class:`ConfigError` naming the
    line; unset keys take their defaults.
    """
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, lineno)
    missing = {"case", "field_id", "method"} - set(values)
    if missing:
        raise ConfigError(f"missing required keys: {sorted(missing)}")
    return RunConfig(**values)


def serialize_config(config: RunConfig) -> str:
    """Render a config as parseable ``key = value`` text (round-trips)."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(config, f.name)
        if isinstance(value, tuple):
            rendered = ", ".join(f"{v:g}" if isinstance(v, float) else str(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        else:
            rendered = str(value)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def _atomic_write(path: Path, lines: Sequence[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_levels_csv(path: Path, result: EstimatorResult) -> None:
    lines = [LEVELS_HEADER]
    for rec in result.levels:
        lines.append(",".join([
            str(rec.level), str(rec.n_samples), _fmt(rec.mean_y), _fmt(rec.var_y),
            _fmt(rec.mean_q), _fmt(rec.var_q), _fmt(rec.cost_per_sample),
        ]))
    _atomic_write(path, lines)


def _rates_row(result: EstimatorResult) -> List[str]:
    if result.rates is None:
        return ["nan", "nan", "nan", "unknown"]
    return [_fmt(result.rates.alpha), _fmt(result.rates.beta),
            _fmt(result.rates.gamma), result.regime.value]


def write_summary_csv(path: Path, results: Sequence[EstimatorResult]) -> None:
    lines = [SUMMARY_HEADER]
    for res in results:
        lines.append(",".join([_fmt(res.epsilon), _fmt(res.estimate),
                               _fmt(res.total_work)] + _rates_row(res)))
    _atomic_write(path, lines)


def write_cost_csv(path: Path, results: Sequence[EstimatorResult]) -> None:
    eps = [res.epsilon for res in results]
    work = [res.total_work for res in results]
    slope, _ = _log2_slope(np.log2(eps), work)
    slope = float("nan") if slope is None else slope
    lines = [COST_HEADER]
    for res in results:
        lines.append(",".join([_fmt(res.epsilon), _fmt(res.estimate),
                               _fmt(res.total_work), _fmt(slope)]))
    _atomic_write(path, lines)


def write_qmc_test_csv(path: Path, fits) -> None:
    lines = [QMC_TEST_HEADER]
    for fit in fits:
        for n, var in zip(fit.n_values, fit.variances):
            lines.append(",".join([str(fit.level), str(n), _fmt(var), _fmt(fit.rate)]))
    _atomic_write(path, lines)


def _per_epsilon_seed(root_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=(1000, index))
    return int(ss.generate_state(1, np.uint64)[0])


def run_experiment(config: RunConfig, cache: Optional[BasisCache] = None) -> Dict[str, Path]:
    """Execute the configured estimator for every accuracy target.

    Writes (a) a per-level table per epsilon, (b) the cost-versus-epsilon
    table with its fitted slope, (c) the QMC variance test for QMC methods,
    and (d) the run summary.  Returns the artifact paths.  All outputs are a
    pure function of (config, seed).
    """
    out = Path(config.output_dir)
    setup = PdeSetup(
        problem=case_problem(config.case),
        matern=FIELD_PARAMS[config.field_id],
        energy_target=config.energy_target,
        tau=config.tau,
        byproduct=config.fmg_byproduct,
        force_unit_coefficient=config.force_unit_coefficient,
    )
    sampler = PdePairSampler(setup, cache)
    kind = METHOD_KINDS[config.method]
    prefix = config.artifact_prefix
    paths: Dict[str, Path] = {}
    results: List[EstimatorResult] = []

    try:
        for i, eps in enumerate(config.epsilon_list):
            driver = DriverConfig(
                seed=_per_epsilon_seed(config.seed, i),
                initial_samples=config.initial_samples,
                initial_points=config.initial_points,
                n_randomizations=config.n_randomizations,
                start_level=config.start_level,
                max_level=config.max_level,
                qmc_kind=kind if kind != PSEUDO_RANDOM else SOBOL_SCRAMBLED,
            )
            if kind == PSEUDO_RANDOM:
                res = mlmc_run(sampler, eps, driver)
            else:
                res = mlqmc_run(sampler, eps, driver)
            results.append(res)
            levels_path = out / f"{prefix}_levels_eps{eps:g}.csv"
            write_levels_csv(levels_path, res)
            paths[f"levels_eps{eps:g}"] = levels_path

        if kind != PSEUDO_RANDOM:
            fits = []
            for lvl in config.qmc_test_levels:
                if lvl > config.max_level:
                    continue
                fits.append(qmc_variance_test(
                    sampler, lvl, config.qmc_test_points, kind,
                    seed=_per_epsilon_seed(config.seed, 9999),
                    n_randomizations=config.n_randomizations,
                ))
            qmc_path = out / f"{prefix}_qmc_test.csv"
            write_qmc_test_csv(qmc_path, fits)
            paths["qmc_test"] = qmc_path
    finally:
        # always leave whatever summary data exists, even on solver failure
        if results:
            summary_path = out / f"{prefix}_summary.csv"
            write_summary_csv(summary_path, results)
            paths["summary"] = summary_path
            cost_path = out / f"{prefix}_cost.csv"
            write_cost_csv(cost_path, results)
            paths["cost"] = cost_path

    return paths


def _read_csv(path: Path) -> Tuple[List[str], List[List[str]]]:
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


def compare_methods(directory) -> Path:
    """Join the per-level variance tables of every method found in a directory.

    Uses each method's smallest-epsilon levels table, reports per-level
    variance ratios against the first method (alphabetical) and each
    method's fitted variance-decay rate.  Raises FileNotFoundError listing
    what is missing when fewer than two methods are present.
    """
    directory = Path(directory)
    by_method: Dict[str, Tuple[float, Path]] = {}
    for path in sorted(directory.glob("*_levels_eps*.csv")):
        method = path.name.split("_Case")[0]
        eps = float(path.stem.rsplit("eps", 1)[1])
        if method not in by_method or eps < by_method[method][0]:
            by_method[method] = (eps, path)
    if len(by_method) < 2:
        present = sorted(by_method)
        raise FileNotFoundError(
            "method comparison needs per-level tables from >= 2 methods; "
            f"found {present if present else 'none'} in {directory} "
            "(expected files matching '*_levels_eps*.csv')"
        )

    methods = sorted(by_method)
    tables: Dict[str, Dict[int, float]] = {}
    betas: Dict[str, float] = {}
    for method in methods:
        header, rows = _read_csv(by_method[method][1])
        level_col = header.index("level")
        v_col = header.index("V_l")
        table = {int(r[level_col]): float(r[v_col]) for r in rows}
        tables[method] = table
        fit_levels = [l for l in sorted(table) if l >= 1]
        slope, _ = _log2_slope(fit_levels, [table[l] for l in fit_levels])
        betas[method] = float("nan") if slope is None else -slope

    base = methods[0]
    shared = sorted(set.intersection(*(set(t) for t in tables.values())))
    header_cols = [COMPARE_HEADER_PREFIX]
    header_cols += [f"V_{m}" for m in methods]
    header_cols += [f"ratio_{m}_vs_{base}" for m in methods[1:]]
    header_cols += [f"beta_{m}" for m in methods]
    lines = [",".join(header_cols)]
    for lvl in shared:
        row = [str(lvl)]
        row += [_fmt(tables[m][lvl]) for m in methods]
        row += [_fmt(tables[m][lvl] / tables[base][lvl]) for m in methods[1:]]
        row += [_fmt(betas[m]) for m in methods]
        lines.append(",".join(row))
    out_path = directory / "method_comparison.csv"
    _atomic_write(out_path, lines)
    return out_path


def rates_from_levels_csv(path) -> Tuple[float, float, float, str]:
    """Refit (alpha, beta, gamma, regime) from a written per-level table."""
    header, rows = _read_csv(Path(path))
    idx = {name: header.index(name) for name in ("level", "mean_Y", "V_l", "C_l")}
    levels = [int(r[idx["level"]]) for r in rows]
    fit = [(l, r) for l, r in zip(levels, rows) if l >= 1]
    fit_levels = [l for l, _ in fit]
    slope_y, _ = _log2_slope(fit_levels, [abs(float(r[idx["mean_Y"]])) for _, r in fit])
    slope_v, _ = _log2_slope(fit_levels, [float(r[idx["V_l"]]) for _, r in fit])
    slope_c, _ = _log2_slope(fit_levels, [float(r[idx["C_l"]]) for _, r in fit])
    alpha = max(-slope_y, 0.5) if slope_y is not None else 1.0
    beta = -slope_v if slope_v is not None else float("nan")
    gamma = slope_c if slope_c is not None else float("nan")
    if np.isnan(beta) or np.isnan(gamma):
        label = "unknown"
    elif abs(beta - gamma) <= 0.1:
        label = Regime.BETA_EQ_GAMMA.value
    elif beta > gamma:
        label = Regime.BETA_GT_GAMMA.value
    else:
        label = Regime.BETA_LT_GAMMA.value
    return alpha, beta, gamma, label
