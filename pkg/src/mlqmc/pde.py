"""Level-pair sampling of the PDE quantity of interest.

A level-l sample draws the fine coefficient field from the level-l basis,
obtains the coarse field by injection, and evaluates (Q_l, Q_{l-1}) either
from one full-multigrid solve (the coarse value is the converged
next-to-finest iterate, at no extra cost) or from two standalone solves (the
reference path).  Either way the two values share one underlying field, and
the injected coarse field has exactly the law of a level-(l-1) field.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import SolverDivergenceError
from .estimators import DriverConfig, EstimatorResult, mlmc_run, mlqmc_run
from .grid import ProblemSpec, assemble_system, evaluate_qoi, grid_for_level
from .multigrid import DEFAULT_CYCLE_CAP, fmg_solve, solve_coarsest
from .random_field import (
    CoefficientField,
    KLBasis,
    MaternParams,
    build_kl_basis,
    coarsen_field,
    constant_field,
    sample_log_field,
)
from .sampler import PSEUDO_RANDOM

# Cost charged for the dense 16-unknown solve of a level-0 sample, in level-0
# sweep equivalents (LU flops over per-sweep flops); keeps every cost in one unit.
LEVEL0_SOLVE_WORK = 20.0


class BasisCache:
    """Memoizes the per-level KL bases; they are deterministic in their key."""

    def __init__(self):
        self._store: Dict[tuple, KLBasis] = {}

    def get(self, level: int, params: MaternParams, energy_target: float) -> KLBasis:
        key = (level, params.nu, params.corr_length, params.variance, energy_target)
        if key not in self._store:
            self._store[key] = build_kl_basis(grid_for_level(level), params, energy_target)
        return self._store[key]

    def clear(self) -> None:
        self._store.clear()


DEFAULT_BASIS_CACHE = BasisCache()


@dataclass(frozen=True)
class PdeSetup:
    """One benchmark problem: boundary data, field law and solver settings."""

    problem: ProblemSpec
    matern: MaternParams
    energy_target: float = 0.99
    tau: float = 1e-10
    byproduct: bool = True
    force_unit_coefficient: bool = False
    cycle_cap: int = DEFAULT_CYCLE_CAP


class PdePairSampler:
    """Evaluates (Y_l, Q_l) pairs for the estimator drivers."""

    def __init__(self, setup: PdeSetup, cache: Optional[BasisCache] = None):
        self.setup = setup
        self.cache = cache if cache is not None else DEFAULT_BASIS_CACHE

    def dimension(self, level: int) -> int:
        if self.setup.force_unit_coefficient:
            return 1
        return self.cache.get(level, self.setup.matern, self.setup.energy_target).n_terms

    def _field(self, level: int, xi_row: np.ndarray) -> CoefficientField:
        if self.setup.force_unit_coefficient:
            return constant_field(grid_for_level(level))
        basis = self.cache.get(level, self.setup.matern, self.setup.energy_target)
        return sample_log_field(basis, xi_row)

    def _solve_level0(self, field: CoefficientField) -> Tuple[float, float]:
        system = assemble_system(field.grid, field, self.setup.problem)
        u = solve_coarsest(system)
        return evaluate_qoi(u, field, field.grid, self.setup.problem), LEVEL0_SOLVE_WORK

    def _pair(self, level: int, field: CoefficientField) -> Tuple[float, float, float]:
        """(Q_l, Q_{l-1}, work) for one fine-level field."""
        setup = self.setup
        coarse_field = coarsen_field(field)
        if setup.byproduct:
            res = fmg_solve(field, setup.problem, level, setup.tau,
                            cycle_cap=setup.cycle_cap)
            q_fine = evaluate_qoi(res.fine_solution, field, field.grid, setup.problem)
            q_coarse = evaluate_qoi(res.coarse_solution, coarse_field,
                                    coarse_field.grid, setup.problem)
            return q_fine, q_coarse, res.work_units * 4.0 ** level
        fine = fmg_solve(field, setup.problem, level, setup.tau, cycle_cap=setup.cycle_cap)
        q_fine = evaluate_qoi(fine.fine_solution, field, field.grid, setup.problem)
        work = fine.work_units * 4.0 ** level
        if level - 1 == 0:
            q_coarse, w0 = self._solve_level0(coarse_field)
            work += w0
        else:
            coarse = fmg_solve(coarse_field, setup.problem, level - 1, setup.tau,
                               cycle_cap=setup.cycle_cap)
            q_coarse = evaluate_qoi(coarse.fine_solution, coarse_field,
                                    coarse_field.grid, setup.problem)
            work += coarse.work_units * 4.0 ** (level - 1)
        return q_fine, q_coarse, work

    def evaluate(self, level: int, xi: np.ndarray):
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        batch = len(xi)
        y = np.empty(batch)
        q = np.empty(batch)
        work = np.empty(batch)
        for i in range(batch):
            try:
                field = self._field(level, xi[i])
                if level == 0:
                    q[i], work[i] = self._solve_level0(field)
                    y[i] = q[i]
                else:
                    q_fine, q_coarse, work[i] = self._pair(level, field)
                    q[i] = q_fine
                    y[i] = q_fine - q_coarse
            except SolverDivergenceError as err:
                err.context.update({"sample_level": level, "sample_index": i})
                raise
        return y, q, work


def fmg_mlmc_run(setup: PdeSetup, epsilon: float, config: DriverConfig = DriverConfig(),
                 sampling: str = PSEUDO_RANDOM,
                 cache: Optional[BasisCache] = None) -> EstimatorResult:
    """Run the multilevel estimator with the byproduct coarse samples.

    ``sampling`` selects pseudo-random or one of the QMC point kinds; the
    control flow is the corresponding driver's, only the per-sample solve
    changes (one full-multigrid pass per pair, a direct solve on level 0).
    """
    sampler = PdePairSampler(replace(setup, byproduct=True), cache)
    if sampling == PSEUDO_RANDOM:
        return mlmc_run(sampler, epsilon, config)
    return mlqmc_run(sampler, epsilon, replace(config, qmc_kind=sampling))
