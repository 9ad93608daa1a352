"""Compiled stencil kernels for the multigrid solver.

The update order inside a sweep is fixed (rows ascending, columns ascending
within each color) so that results are reproducible bit for bit.
"""

from numba import njit


@njit(cache=True)
def rb_color_sweep(u, diag, west, east, south, north, rhs, color):
    """One Gauss-Seidel pass over the cells of one checkerboard color.

    ``color`` 0 updates cells with even ix+iy, 1 the odd ones.  Couplings are
    zero where no neighbor exists, so no boundary branches are needed beyond
    index guards.
    """
    n = u.shape[0]
    for i in range(n):
        for j in range((color + i) % 2, n, 2):
            acc = rhs[i, j]
            if i > 0:
                acc += west[i, j] * u[i - 1, j]
            if i < n - 1:
                acc += east[i, j] * u[i + 1, j]
            if j > 0:
                acc += south[i, j] * u[i, j - 1]
            if j < n - 1:
                acc += north[i, j] * u[i, j + 1]
            u[i, j] = acc / diag[i, j]


@njit(cache=True)
def residual_kernel(u, diag, west, east, south, north, rhs, out):
    n = u.shape[0]
    for i in range(n):
        for j in range(n):
            acc = diag[i, j] * u[i, j]
            if i > 0:
                acc -= west[i, j] * u[i - 1, j]
            if i < n - 1:
                acc -= east[i, j] * u[i + 1, j]
            if j > 0:
                acc -= south[i, j] * u[i, j - 1]
            if j < n - 1:
                acc -= north[i, j] * u[i, j + 1]
            out[i, j] = rhs[i, j] - acc


@njit(cache=True)
def restrict_kernel(fine, out):
    """Full weighting of cell-centered values: average each 2x2 block."""
    nc = out.shape[0]
    for i in range(nc):
        for j in range(nc):
            out[i, j] = 0.25 * (
                fine[2 * i, 2 * j]
                + fine[2 * i + 1, 2 * j]
                + fine[2 * i, 2 * j + 1]
                + fine[2 * i + 1, 2 * j + 1]
            )


@njit(cache=True)
def prolong_kernel(coarse, out):
    """Bilinear interpolation to the four children of each coarse cell.

    Neighbor indices clamp at the boundary, which degenerates to constant
    extrapolation there.
    """
    nc = coarse.shape[0]
    nf = out.shape[0]
    for i in range(nf):
        ci = i // 2
        di = 1 if (i % 2 == 1) else -1
        ni = ci + di
        if ni < 0:
            ni = 0
        elif ni > nc - 1:
            ni = nc - 1
        for j in range(nf):
            cj = j // 2
            dj = 1 if (j % 2 == 1) else -1
            nj = cj + dj
            if nj < 0:
                nj = 0
            elif nj > nc - 1:
                nj = nc - 1
            out[i, j] = (
                9.0 * coarse[ci, cj]
                + 3.0 * coarse[ni, cj]
                + 3.0 * coarse[ci, nj]
                + coarse[ni, nj]
            ) / 16.0


@njit(cache=True)
def prolong_correction_kernel(coarse, out, west_d, east_d, south_d, north_d):
    """Bilinear prolongation of a coarse-grid *correction*.

    Corrections vanish on Dirichlet faces, so out-of-range neighbors reflect
    with a sign flip there (ghost = -interior); Neumann faces reflect evenly,
    which reduces to the clamped value.
    """
    nc = coarse.shape[0]
    nf = out.shape[0]
    for i in range(nf):
        ci = i // 2
        ni = ci + (1 if (i % 2 == 1) else -1)
        sx = 1.0
        if ni < 0:
            ni = 0
            if west_d:
                sx = -1.0
        elif ni > nc - 1:
            ni = nc - 1
            if east_d:
                sx = -1.0
        for j in range(nf):
            cj = j // 2
            nj = cj + (1 if (j % 2 == 1) else -1)
            sy = 1.0
            if nj < 0:
                nj = 0
                if south_d:
                    sy = -1.0
            elif nj > nc - 1:
                nj = nc - 1
                if north_d:
                    sy = -1.0
            out[i, j] = (
                9.0 * coarse[ci, cj]
                + 3.0 * sx * coarse[ni, cj]
                + 3.0 * sy * coarse[ci, nj]
                + sx * sy * coarse[ni, nj]
            ) / 16.0
