"""Lognormal coefficient fields from a truncated Karhunen-Loeve expansion.

The Gaussian log-field has Matern covariance; its covariance operator is
discretized at the sampling points by the Nystrom method with uniform
cell-area weights and truncated at a prescribed energy fraction.  Coarse
fields are produced from fine ones by injection, which preserves the field's
law exactly because the covariance is stationary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import k1 as _bessel_k1

from .errors import UnsupportedParameterError
from .grid import GridSpec, grid_for_level

SUPPORTED_NU = (0.5, 1.0)

# Discretized covariance matrices are PSD up to round-off; eigenvalues below
# this are treated as corruption rather than noise.
EIGENVALUE_FLOOR = -1e-12


@dataclass(frozen=True)
class MaternParams:
    """Matern covariance parameters: smoothness, correlation length, variance."""

    nu: float
    corr_length: float
    variance: float

    def __post_init__(self):
        if self.corr_length <= 0.0 or self.variance <= 0.0 or self.nu <= 0.0:
            raise ValueError("Matern parameters must be strictly positive")
        if self.nu not in SUPPORTED_NU:
            raise UnsupportedParameterError(
                f"smoothness nu={self.nu} not supported; implemented: {SUPPORTED_NU}"
            )


def matern_covariance(d, params: MaternParams):
    """Matern covariance at separation distance ``d`` (scalar or array).

    nu = 0.5 uses the exact exponential form, nu = 1 the modified Bessel
    function K1; the d = 0 limit returns the variance exactly.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d < 0.0):
        raise ValueError("distances must be nonnegative")
    s2 = params.variance
    lam = params.corr_length
    if params.nu == 0.5:
        out = s2 * np.exp(-d / lam)
    else:
        x = np.sqrt(2.0) * d / lam
        safe = np.where(x > 0.0, x, 1.0)
        out = np.where(x > 0.0, s2 * safe * _bessel_k1(safe), s2)
    return out if out.ndim else float(out)


@dataclass
class KLBasis:
    """Truncated eigenpairs of the discretized covariance operator.

    ``modes`` has one column per retained term, unit-norm under the
    cell-area inner product; ``points`` are the spatial sampling locations,
    one row per entry of a flattened field.
    """

    points: np.ndarray
    eigenvalues: np.ndarray
    modes: np.ndarray
    energy_ratio: float
    energy_target: float
    params: MaternParams
    grid: Optional[GridSpec] = None

    @property
    def n_terms(self) -> int:
        return len(self.eigenvalues)


@dataclass
class CoefficientField:
    """Strictly positive cell values plus the points the log-field was sampled at."""

    grid: GridSpec
    values: np.ndarray
    sample_coords: np.ndarray

    def __post_init__(self):
        n = self.grid.cells_per_dim
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (n, n):
            raise ValueError(f"values must have shape {(n, n)}, got {self.values.shape}")
        if np.any(self.values <= 0.0):
            raise ValueError("coefficient values must be strictly positive")


def constant_field(grid: GridSpec, value: float = 1.0) -> CoefficientField:
    """Spatially constant field (used for debugging and analytic checks)."""
    n = grid.cells_per_dim
    return CoefficientField(
        grid=grid,
        values=np.full((n, n), float(value)),
        sample_coords=grid.cell_centers(),
    )


def _eigendecompose(points: np.ndarray, params: MaternParams, energy_target: float,
                    grid: Optional[GridSpec]) -> KLBasis:
    if not 0.0 < energy_target <= 1.0:
        raise ValueError(f"energy target must lie in (0, 1], got {energy_target}")
    n_pts = len(points)
    weight = 1.0 / n_pts  # uniform cell areas on the unit square

    dist = cdist(points, points)
    cov = matern_covariance(dist, params) * weight
    if not np.all(np.isfinite(cov)):
        raise RuntimeError("covariance matrix contains non-finite entries")
    asym = np.max(np.abs(cov - cov.T))
    if asym > 1e-13 * params.variance:
        raise RuntimeError(f"covariance matrix asymmetry {asym:.3e}")

    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = eigvals[::-1].copy()
    eigvecs = eigvecs[:, ::-1]
    if eigvals[-1] < EIGENVALUE_FLOOR:
        raise RuntimeError(f"covariance eigenvalue {eigvals[-1]:.3e} below round-off floor")
    np.clip(eigvals, 0.0, None, out=eigvals)

    total_energy = params.variance  # sigma^2 * |Omega| with |Omega| = 1
    cum = np.cumsum(eigvals) / total_energy
    n_terms = int(min(np.searchsorted(cum, energy_target) + 1, n_pts))

    modes = eigvecs[:, :n_terms] / np.sqrt(weight)
    # fix the sign convention so the basis is reproducible across runs
    anchor = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[anchor, np.arange(n_terms)])
    signs[signs == 0.0] = 1.0
    modes = modes * signs

    return KLBasis(
        points=np.array(points, dtype=float),
        eigenvalues=eigvals[:n_terms].copy(),
        modes=modes,
        energy_ratio=float(cum[n_terms - 1]),
        energy_target=energy_target,
        params=params,
        grid=grid,
    )


def build_kl_basis(grid: GridSpec, params: MaternParams, energy_target: float = 0.99) -> KLBasis:
    """Eigendecompose the covariance at the grid's cell centers and truncate."""
    return _eigendecompose(grid.cell_centers(), params, energy_target, grid)


def kl_basis_at_points(points: np.ndarray, params: MaternParams,
                       energy_target: float = 0.99,
                       grid: Optional[GridSpec] = None) -> KLBasis:
    """As :func:`build_kl_basis` but at arbitrary distinct evaluation points.

    Pass ``grid`` when the points sample that grid's cells (e.g. a uniformly
    shifted copy of its centers) so the basis can generate fields on it.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    if grid is not None and len(points) != grid.n_cells:
        raise ValueError("number of points must match the grid's cell count")
    rounded = np.round(points / 1e-12).astype(np.int64)
    if len(np.unique(rounded, axis=0)) != len(points):
        raise ValueError("evaluation points must be distinct")
    return _eigendecompose(points, params, energy_target, grid)


def sample_log_field(basis: KLBasis, xi: np.ndarray) -> CoefficientField:
    """Realize ``exp(sum_i sqrt(theta_i) phi_i(x) xi_i)`` on the basis grid."""
    if basis.grid is None:
        raise ValueError("basis carries no grid; cannot lay out a field")
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (basis.n_terms,):
        raise ValueError(f"xi must have shape ({basis.n_terms},), got {xi.shape}")
    n = basis.grid.cells_per_dim
    log_k = basis.modes @ (np.sqrt(basis.eigenvalues) * xi)
    return CoefficientField(
        grid=basis.grid,
        values=np.exp(log_k).reshape(n, n),
        sample_coords=basis.points,
    )


def inject_values(values: np.ndarray) -> np.ndarray:
    """Injection coarsening of a cell array: keep the lower-left fine cell
    of every 2x2 block (1-based ``(2I-1, 2J-1)``)."""
    values = np.asarray(values)
    n = values.shape[0]
    if values.shape != (n, n) or n % 2 != 0 or n < 4:
        raise ValueError(f"expected a square array with even size >= 4, got {values.shape}")
    return values[0::2, 0::2]


def coarsen_field(fine: CoefficientField) -> CoefficientField:
    """Transfer a field one level down by injection.

    The returned ``sample_coords`` are the fine-cell centers that were
    selected, not the coarse-cell centers: the coarse field remains a sample
    of the continuous field at known locations.
    """
    n = fine.grid.cells_per_dim
    if n < 8 or n % 2 != 0:
        raise ValueError(f"cannot coarsen a grid with {n} cells per dimension")
    coarse_grid = grid_for_level(fine.grid.level - 1)
    coords = fine.sample_coords.reshape(n, n, 2)[0::2, 0::2].reshape(-1, 2)
    return CoefficientField(
        grid=coarse_grid,
        values=inject_values(fine.values).copy(),
        sample_coords=coords,
    )


def injected_points(fine_grid: GridSpec) -> np.ndarray:
    """The fine-cell centers that injection from ``fine_grid`` selects.

    These are the coarse-cell centers shifted by minus a quarter coarse cell
    per dimension; by stationarity a field sampled there has exactly the law
    of one sampled at the coarse centers.
    """
    n = fine_grid.cells_per_dim
    if n < 8:
        raise ValueError("need at least an 8x8 fine grid")
    centers = fine_grid.cell_centers().reshape(n, n, 2)
    return centers[0::2, 0::2].reshape(-1, 2)


KL_CACHE_FORMAT_VERSION = 1


def save_kl_basis(path, basis: KLBasis) -> None:
    """Write a basis to a binary cache file with a versioned header."""
    np.savez(
        path,
        format_version=np.int64(KL_CACHE_FORMAT_VERSION),
        level=np.int64(basis.grid.level if basis.grid is not None else -1),
        nu=basis.params.nu,
        corr_length=basis.params.corr_length,
        variance=basis.params.variance,
        energy_target=basis.energy_target,
        energy_ratio=basis.energy_ratio,
        points=basis.points,
        eigenvalues=basis.eigenvalues,
        modes=basis.modes,
    )


def load_kl_basis(path) -> KLBasis:
    """Read a basis written by :func:`save_kl_basis`; validates the header."""
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != KL_CACHE_FORMAT_VERSION:
            raise ValueError(f"unsupported cache format version {version}")
        level = int(data["level"])
        params = MaternParams(
            nu=float(data["nu"]),
            corr_length=float(data["corr_length"]),
            variance=float(data["variance"]),
        )
        return KLBasis(
            points=data["points"],
            eigenvalues=data["eigenvalues"],
            modes=data["modes"],
            energy_ratio=float(data["energy_ratio"]),
            energy_target=float(data["energy_target"]),
            params=params,
            grid=grid_for_level(level) if level >= 0 else None,
        )
