"""Structured grids on the unit square and their finite-volume discretization.

Cells are indexed ``[ix, iy]`` with centers at ``((ix + 0.5) h, (iy + 0.5) h)``;
flattened vectors use C order, so row ``ix * n + iy`` of a dense matrix is the
equation for cell ``(ix, iy)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Union

import numpy as np

EDGES = ("W", "E", "N", "S")
DIRICHLET = "dirichlet"
NEUMANN = "neumann"


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid with ``2**(level + 2)`` cells per dimension."""

    level: int
    cells_per_dim: int
    cell_width: float

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"level must be >= 0, got {self.level}")
        if self.cells_per_dim != 2 ** (self.level + 2):
            raise ValueError(
                f"cells_per_dim must be 2**(level+2) = {2 ** (self.level + 2)}, "
                f"got {self.cells_per_dim}"
            )
        if self.cell_width * self.cells_per_dim != 1.0:
            raise ValueError("cell_width must be exactly 1/cells_per_dim")

    @property
    def n_cells(self) -> int:
        return self.cells_per_dim ** 2

    def centers_1d(self) -> np.ndarray:
        return (np.arange(self.cells_per_dim) + 0.5) * self.cell_width

    def cell_centers(self) -> np.ndarray:
        """All cell centers as an ``(n_cells, 2)`` array in flattening order."""
        c = self.centers_1d()
        x, y = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])


def grid_for_level(level: int) -> GridSpec:
    """Grid of the hierarchy level: 4x4 cells at level 0, doubling per level."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    n = 2 ** (level + 2)
    return GridSpec(level=level, cells_per_dim=n, cell_width=1.0 / n)


@dataclass(frozen=True)
class PointValue:
    """Solution value at an interior point, by bilinear interpolation."""

    x: float
    y: float


@dataclass(frozen=True)
class EastBoundaryFlux:
    """Total outflow through the east boundary (outflow positive)."""


Qoi = Union[PointValue, EastBoundaryFlux]


@dataclass(frozen=True)
class ProblemSpec:
    """Boundary data, source and quantity of interest for the elliptic problem.

    ``edge_kind`` maps each of the edges W/E/N/S to 'dirichlet' or 'neumann'.
    Dirichlet edges read their value from ``dirichlet_values``, Neumann edges
    prescribe the outward normal derivative from ``neumann_values``.  The
    source is a callable ``f(x, y)`` (vectorized) or None for zero.
    """

    edge_kind: Mapping[str, str]
    dirichlet_values: Mapping[str, float]
    neumann_values: Mapping[str, float]
    qoi: Qoi
    source: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if set(self.edge_kind) != set(EDGES):
            raise ValueError(f"edge_kind must define exactly the edges {EDGES}")
        for edge, kind in self.edge_kind.items():
            if kind not in (DIRICHLET, NEUMANN):
                raise ValueError(f"unknown boundary kind {kind!r} on edge {edge}")
            if kind == DIRICHLET and edge not in self.dirichlet_values:
                raise ValueError(f"missing Dirichlet value on edge {edge}")
            if kind == NEUMANN and edge not in self.neumann_values:
                raise ValueError(f"missing Neumann value on edge {edge}")
        if not any(kind == DIRICHLET for kind in self.edge_kind.values()):
            raise ValueError("at least one edge must be Dirichlet")
        if isinstance(self.qoi, PointValue):
            if not (0.0 <= self.qoi.x <= 1.0 and 0.0 <= self.qoi.y <= 1.0):
                raise ValueError(f"QoI point {(self.qoi.x, self.qoi.y)} outside [0,1]^2")

    def is_dirichlet(self, edge: str) -> bool:
        return self.edge_kind[edge] == DIRICHLET


@dataclass
class DiscreteSystem:
    """Five-point finite-volume system, stored per cell.

    Row for cell i reads ``diag*u_i - west*u_W - east*u_E - south*u_S -
    north*u_N = rhs`` with all couplings >= 0 and zero where no neighbor
    exists.  Entries carry the customary 1/h^2 scaling, so for unit
    coefficient the interior stencil is (4, -1, -1, -1, -1)/h^2.
    """

    grid: GridSpec
    diag: np.ndarray
    west: np.ndarray
    east: np.ndarray
    south: np.ndarray
    north: np.ndarray
    rhs: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        """Matrix-vector product on a (n, n) cell array."""
        out = self.diag * u
        out[1:, :] -= self.west[1:, :] * u[:-1, :]
        out[:-1, :] -= self.east[:-1, :] * u[1:, :]
        out[:, 1:] -= self.south[:, 1:] * u[:, :-1]
        out[:, :-1] -= self.north[:, :-1] * u[:, 1:]
        return out

    def residual(self, u: np.ndarray, rhs: Optional[np.ndarray] = None) -> np.ndarray:
        b = self.rhs if rhs is None else rhs
        return b - self.apply(u)

    def to_dense(self) -> np.ndarray:
        """Dense matrix (flattened C order), for small oracles and direct solves."""
        n = self.grid.cells_per_dim
        m = n * n
        a = np.zeros((m, m))
        idx = np.arange(m).reshape(n, n)
        a[idx.ravel(), idx.ravel()] = self.diag.ravel()
        a[idx[1:, :].ravel(), idx[:-1, :].ravel()] = -self.west[1:, :].ravel()
        a[idx[:-1, :].ravel(), idx[1:, :].ravel()] = -self.east[:-1, :].ravel()
        a[idx[:, 1:].ravel(), idx[:, :-1].ravel()] = -self.south[:, 1:].ravel()
        a[idx[:, :-1].ravel(), idx[:, 1:].ravel()] = -self.north[:, :-1].ravel()
        return a

    def solve_dense(self) -> np.ndarray:
        """Exact solve via dense LU; intended for the coarsest grids."""
        n = self.grid.cells_per_dim
        return np.linalg.solve(self.to_dense(), self.rhs.ravel()).reshape(n, n)


def face_transmissibility(k_left: float, k_right: float):
    """Harmonic mean of the two cell coefficients sharing a face.

    Geometric scaling (face length over distance) is applied by the
    assembler, not here.
    """
    k_left = np.asarray(k_left)
    k_right = np.asarray(k_right)
    if np.any(k_left <= 0.0) or np.any(k_right <= 0.0):
        raise ValueError("coefficients must be strictly positive")
    return 2.0 * k_left * k_right / (k_left + k_right)


def assemble_system(grid: GridSpec, field, problem: ProblemSpec) -> DiscreteSystem:
    """Assemble the five-point system for ``-div(k grad u) = f``.

    Interior faces use harmonic-mean transmissibilities.  Dirichlet edges are
    eliminated against a ghost value at half-cell distance (coefficient
    ``2 k / h^2`` folded into diagonal and right-hand side); Neumann edges
    contribute only the prescribed flux to the right-hand side.
    """
    n = grid.cells_per_dim
    h = grid.cell_width
    k = np.asarray(field.values, dtype=float)
    if field.grid.cells_per_dim != n:
        raise ValueError(
            f"field defined on {field.grid.cells_per_dim}^2 cells, grid has {n}^2"
        )
    if k.shape != (n, n):
        raise ValueError(f"field values must have shape {(n, n)}, got {k.shape}")
    if np.any(k <= 0.0):
        raise ValueError("coefficient field must be strictly positive")

    inv_h2 = 1.0 / (h * h)
    tx = face_transmissibility(k[:-1, :], k[1:, :]) * inv_h2
    ty = face_transmissibility(k[:, :-1], k[:, 1:]) * inv_h2

    west = np.zeros((n, n))
    east = np.zeros((n, n))
    south = np.zeros((n, n))
    north = np.zeros((n, n))
    west[1:, :] = tx
    east[:-1, :] = tx
    south[:, 1:] = ty
    north[:, :-1] = ty
    diag = west + east + south + north

    if problem.source is None:
        rhs = np.zeros((n, n))
    else:
        c = grid.centers_1d()
        x, y = np.meshgrid(c, c, indexing="ij")
        rhs = np.asarray(problem.source(x, y), dtype=float) * np.ones((n, n))

    # edge -> (cell slab, coefficient slab)
    slabs = {
        "W": np.s_[0, :],
        "E": np.s_[-1, :],
        "S": np.s_[:, 0],
        "N": np.s_[:, -1],
    }
    for edge, slab in slabs.items():
        k_edge = k[slab]
        if problem.is_dirichlet(edge):
            g = problem.dirichlet_values[edge]
            diag[slab] += 2.0 * k_edge * inv_h2
            rhs[slab] += 2.0 * k_edge * g * inv_h2
        else:
            v = problem.neumann_values[edge]
            rhs[slab] += k_edge * v / h

    return DiscreteSystem(
        grid=grid, diag=diag, west=west, east=east, south=south, north=north, rhs=rhs
    )


def qoi_point_value(solution: np.ndarray, grid: GridSpec, x: float, y: float) -> float:
    """Bilinearly interpolate cell-center values at ``(x, y)``.

    At a cell center the value is returned exactly; within half a cell of the
    boundary the stencil clamps to the one-sided pair.
    """
    if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
        raise ValueError(f"point {(x, y)} outside [0,1]^2")
    n = grid.cells_per_dim
    h = grid.cell_width
    u = np.asarray(solution)

    def axis_weights(coord):
        g = coord / h - 0.5
        i0 = int(np.clip(np.floor(g), 0, n - 2))
        w = float(np.clip(g - i0, 0.0, 1.0))
        return i0, w

    i0, wx = axis_weights(x)
    j0, wy = axis_weights(y)
    return float(
        (1 - wx) * (1 - wy) * u[i0, j0]
        + wx * (1 - wy) * u[i0 + 1, j0]
        + (1 - wx) * wy * u[i0, j0 + 1]
        + wx * wy * u[i0 + 1, j0 + 1]
    )


def qoi_east_flux(solution: np.ndarray, field, grid: GridSpec, problem: ProblemSpec) -> float:
    """Total discrete outflow through the east boundary (outflow positive).

    Uses the same half-cell boundary transmissibility as the assembled
    stencil, so the flux is exactly the one the solved system balances.
    """
    if not problem.is_dirichlet("E"):
        raise ValueError("east-boundary flux requires a Dirichlet east edge")
    g = problem.dirichlet_values["E"]
    u = np.asarray(solution)
    k = np.asarray(field.values)
    # per face: -T (g - u_cell) * h with T = 2k/h, i.e. 2k (u_cell - g)
    return float(np.sum(2.0 * k[-1, :] * (u[-1, :] - g)))


def evaluate_qoi(solution: np.ndarray, field, grid: GridSpec, problem: ProblemSpec) -> float:
    if isinstance(problem.qoi, PointValue):
        return qoi_point_value(solution, grid, problem.qoi.x, problem.qoi.y)
    return qoi_east_flux(solution, field, grid, problem)
