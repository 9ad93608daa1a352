#!/usr/bin/env python3
"""Construct the rank-1 lattice generating vector shipped with the package.

Component-by-component construction minimizing the worst-case error in the
weighted Korobov space of smoothness alpha = 2 with product weights
gamma_j = j^-2 (kernel omega(x) = 2 pi^2 (x^2 - x + 1/6)).  The number of
points is fixed at N = 2^12; the resulting vector is also serviceable for
nearby N since all components are odd.

This is an offline tool: the package reads the frozen table, it never runs
the construction.
"""

import pathlib

import numpy as np

N = 4096
MAX_DIM = 2048
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "mlqmc" / "data" / "lattice_generating_vector.txt"


def omega(x):
    return 2.0 * np.pi ** 2 * (x * x - x + 1.0 / 6.0)


def main():
    k = np.arange(N)
    # candidates: odd z up to N/2 (z and N - z give mirrored point sets)
    cands = np.arange(1, N // 2 + 1, 2, dtype=np.int64)
    omega_table = omega(((cands[:, None] * k[None, :]) % N) / N)  # (n_cand, N)

    z = np.zeros(MAX_DIM, dtype=np.int64)
    z[0] = 1
    gamma1 = 1.0
    prod = 1.0 + gamma1 * omega((k * z[0] % N) / N)
    for d in range(2, MAX_DIM + 1):
        scores = omega_table @ prod
        best = int(np.argmin(scores))
        z[d - 1] = cands[best]
        gamma = 1.0 / d ** 2
        prod = prod * (1.0 + gamma * omega_table[best])
        if d % 256 == 0:
            err2 = (prod.sum() / N) - 1.0
            print(f"d={d}: z_d={z[d - 1]}, squared worst-case error {err2:.6e}")

    err2 = (prod.sum() / N) - 1.0
    lines = [
        "# rank-1 lattice generating vector, format version 1",
        f"# CBC construction, weighted Korobov space alpha=2, weights gamma_j = j^-2, N = {N}",
        f"# dimensions: {MAX_DIM}; final squared worst-case error {err2:.6e}",
        "# one component per line",
    ] + [str(v) for v in z]
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
