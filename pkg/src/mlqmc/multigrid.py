"""Geometric multigrid over the grid hierarchy, with a full-multigrid driver.

Coarse operators are rediscretizations with injected coefficient fields, not
Galerkin products: each coarse system is the legitimate discretization of its
level, which is what lets the full-multigrid pass hand its next-to-finest
solution back as a valid coarse-level sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ._kernels import (
    prolong_correction_kernel,
    prolong_kernel,
    rb_color_sweep,
    residual_kernel,
    restrict_kernel,
)
from .errors import SolverDivergenceError
from .grid import DiscreteSystem, ProblemSpec, assemble_system
from .random_field import CoefficientField, coarsen_field

BOTTOM_TOL = 1e-13
BOTTOM_SWEEP_CAP = 2000
DEFAULT_CYCLE_CAP = 50


@dataclass
class MgHierarchy:
    """Per-level systems from level 0 up to the target level.

    ``systems[t]`` is assembled from the target-level field injected
    ``top_level - t`` times; ``fields[t]`` keeps those fields.
    ``dirichlet_edges`` flags the W/E/S/N edges that pin the solution, which
    the correction transfer needs.
    """

    systems: List[DiscreteSystem]
    fields: List[CoefficientField]
    dirichlet_edges: tuple = (True, True, True, True)

    @property
    def top_level(self) -> int:
        return len(self.systems) - 1


@dataclass
class FmgResult:
    """Solutions and work accounting of one full-multigrid solve.

    ``work_units`` counts smoothing sweeps in units of one sweep over the
    finest grid; ``sweeps_per_level[t]`` is the raw sweep count on level-t
    systems, so ``work_units == sum_t sweeps_per_level[t] * 4**(t - L)``.
    """

    fine_solution: np.ndarray
    coarse_solution: np.ndarray
    work_units: float
    cycles_per_level: List[int]
    sweeps_per_level: List[int]


def build_hierarchy(field: CoefficientField, problem: ProblemSpec, level: int) -> MgHierarchy:
    """Assemble systems for levels 0..level by repeated injection coarsening."""
    if field.grid.level != level:
        raise ValueError(f"field lives on level {field.grid.level}, expected {level}")
    fields = [field]
    while fields[-1].grid.level > 0:
        fields.append(coarsen_field(fields[-1]))
    fields.reverse()
    systems = [assemble_system(f.grid, f, problem) for f in fields]
    dirichlet = tuple(problem.is_dirichlet(edge) for edge in ("W", "E", "S", "N"))
    return MgHierarchy(systems=systems, fields=fields, dirichlet_edges=dirichlet)


def smooth(system: DiscreteSystem, u: np.ndarray, rhs: np.ndarray, sweeps: int) -> np.ndarray:
    """Red-black Gauss-Seidel sweeps; returns the updated iterate."""
    out = np.array(u, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    for _ in range(sweeps):
        rb_color_sweep(out, system.diag, system.west, system.east,
                       system.south, system.north, rhs, 0)
        rb_color_sweep(out, system.diag, system.west, system.east,
                       system.south, system.north, rhs, 1)
    return out


def residual(system: DiscreteSystem, u: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    residual_kernel(u, system.diag, system.west, system.east,
                    system.south, system.north, rhs, out)
    return out


def restrict(fine_vector: np.ndarray) -> np.ndarray:
    """Full-weighting restriction (4-cell average per coarse cell)."""
    n = fine_vector.shape[0]
    if n % 2 != 0:
        raise ValueError(f"cannot restrict an odd-sized grid ({n})")
    out = np.empty((n // 2, n // 2))
    restrict_kernel(np.ascontiguousarray(fine_vector, dtype=float), out)
    return out


def prolong(coarse_vector: np.ndarray, fine_n: Optional[int] = None) -> np.ndarray:
    """Bilinear cell-centered interpolation onto the next finer grid."""
    nc = coarse_vector.shape[0]
    nf = 2 * nc if fine_n is None else fine_n
    if nf != 2 * nc:
        raise ValueError(f"fine size {nf} does not refine coarse size {nc}")
    out = np.empty((nf, nf))
    prolong_kernel(np.ascontiguousarray(coarse_vector, dtype=float), out)
    return out


def _bottom_solve(system: DiscreteSystem, u: np.ndarray, rhs: np.ndarray,
                  tally: Optional[np.ndarray] = None, tol: float = BOTTOM_TOL) -> np.ndarray:
    """Smooth the coarsest system until the relative residual drops below tol.

    Stops early if the residual stagnates at the round-off floor.
    """
    out = np.array(u, dtype=float)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0 and not np.any(out):
        return out
    target = tol * max(rhs_norm, 1e-300)
    best = np.inf
    stalled = 0
    for sweep_count in range(1, BOTTOM_SWEEP_CAP + 1):
        rb_color_sweep(out, system.diag, system.west, system.east,
                       system.south, system.north, rhs, 0)
        rb_color_sweep(out, system.diag, system.west, system.east,
                       system.south, system.north, rhs, 1)
        if tally is not None:
            tally[0] += 1
        rnorm = float(np.linalg.norm(residual(system, out, rhs)))
        if rnorm <= target:
            break
        if rnorm < best * (1.0 - 1e-3):
            best = rnorm
            stalled = 0
        else:
            stalled += 1
            if stalled >= 5:  # round-off floor reached
                break
    return out


def _prolong_correction(coarse: np.ndarray, dirichlet_edges) -> np.ndarray:
    """Correction transfer: as :func:`prolong`, but corrections vanish on
    Dirichlet faces, so ghosts reflect oddly there instead of clamping.

    Clamped (even) extrapolation of corrections loses the boundary decay and
    makes the V-cycle contraction degrade with depth; odd reflection keeps it
    mesh-independent.
    """
    nc = coarse.shape[0]
    out = np.empty((2 * nc, 2 * nc))
    w, e, s, n = dirichlet_edges
    prolong_correction_kernel(np.ascontiguousarray(coarse, dtype=float), out, w, e, s, n)
    return out


def _v_cycle(h: MgHierarchy, level: int, u: np.ndarray, rhs: np.ndarray,
             nu1: int, nu2: int, tally: Optional[np.ndarray]) -> np.ndarray:
    if level == 0:
        return _bottom_solve(h.systems[0], u, rhs, tally)
    system = h.systems[level]
    u = smooth(system, u, rhs, nu1)
    if tally is not None:
        tally[level] += nu1
    coarse_rhs = restrict(residual(system, u, rhs))
    coarse_err = _v_cycle(h, level - 1, np.zeros_like(coarse_rhs), coarse_rhs,
                          nu1, nu2, tally)
    u = u + _prolong_correction(coarse_err, h.dirichlet_edges)
    u = smooth(system, u, rhs, nu2)
    if tally is not None:
        tally[level] += nu2
    return u


def v_cycle(h: MgHierarchy, level: int, u: np.ndarray, rhs: np.ndarray,
            nu1: int = 1, nu2: int = 1) -> np.ndarray:
    """One V(nu1, nu2) cycle on the given level of the hierarchy."""
    if level < 0:
        raise ValueError("level must be >= 0")
    return _v_cycle(h, level, u, rhs, nu1, nu2, None)


def solve_coarsest(system: DiscreteSystem) -> np.ndarray:
    """Direct dense solve of a coarsest-grid system (16 unknowns)."""
    return system.solve_dense()


def fmg_solve(field: CoefficientField, problem: ProblemSpec, level: int, tau: float,
              nu1: int = 1, nu2: int = 1, cycle_cap: int = DEFAULT_CYCLE_CAP) -> FmgResult:
    """Full multigrid: ascend the hierarchy, converging every level to tau.

    Each level t is solved in its own right (rediscretized operator and
    boundary data, injected coefficients) by V-cycles until the relative
    residual drops below tau, then prolonged as the next level's initial
    guess.  The converged level-(level-1) iterate is captured before the
    final prolongation; reusing it is what saves the separate coarse solve.
    """
    if level < 1:
        raise ValueError("full multigrid needs level >= 1")
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    h = build_hierarchy(field, problem, level)
    sweeps = np.zeros(level + 1, dtype=np.int64)
    cycles = [0] * (level + 1)

    u = _bottom_solve(h.systems[0], np.zeros_like(h.systems[0].rhs),
                      h.systems[0].rhs, sweeps[0:1])
    cycles[0] = 1
    coarse_solution = u.copy() if level == 1 else None

    for t in range(1, level + 1):
        system = h.systems[t]
        rhs = system.rhs
        u = prolong(u)
        target = tau * max(float(np.linalg.norm(rhs)), 1e-300)
        history = []
        while True:
            r = residual(system, u, rhs)
            rnorm = float(np.linalg.norm(r))
            history.append(rnorm)
            if rnorm <= target:
                break
            if cycles[t] >= cycle_cap:
                raise SolverDivergenceError(
                    f"level-{t} stage of the level-{level} solve did not reach "
                    f"tau={tau:g} within {cycle_cap} cycles",
                    residual_history=history,
                    context={"stage": t, "level": level},
                )
            # take the V-cycle correction with the residual-minimizing step
            # length: high-contrast fields can push the plain cycle's
            # contraction toward 1, and the optimal step keeps the iteration
            # monotone there at the cost of one operator apply
            direction = _v_cycle(h, t, u, rhs, nu1, nu2, sweeps) - u
            a_dir = system.apply(direction)
            denom = float(np.vdot(a_dir, a_dir))
            step = float(np.vdot(r, a_dir)) / denom if denom > 0.0 else 1.0
            u = u + min(max(step, 0.25), 4.0) * direction
            cycles[t] += 1
        if t == level - 1:
            coarse_solution = u.copy()

    work_units = float(np.sum(sweeps * 4.0 ** (np.arange(level + 1) - level)))
    return FmgResult(
        fine_solution=u,
        coarse_solution=coarse_solution,
        work_units=work_units,
        cycles_per_level=cycles,
        sweeps_per_level=[int(s) for s in sweeps],
    )
