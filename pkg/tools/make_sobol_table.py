#!/usr/bin/env python3
"""Export Sobol' direction-number seeds to the package's plain-text table.

Writes the first MAX_DIM dimensions of the Joe & Kuo (2008) "new-joe-kuo-6"
direction-number table (the dataset shipped with scipy.stats.qmc) in the
format read by mlqmc.sampler: one line per dimension d >= 2 containing

    d  s  a  m_1 ... m_s

where s is the degree of the primitive polynomial, a encodes its inner
coefficients, and m_k are the initial direction-number seeds.  Dimension 1
(all m_k = 1) is implicit.
"""

import pathlib

import numpy as np
from scipy.stats._sobol import get_poly_vinit

MAX_DIM = 2048
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "mlqmc" / "data" / "sobol_direction_numbers.txt"


def main():
    poly = get_poly_vinit("poly", np.uint32)
    vinit = get_poly_vinit("vinit", np.uint32)
    lines = [
        "# sobol direction numbers, format version 1",
        "# source: S. Joe and F. Y. Kuo, new-joe-kuo-6.21201 direction numbers",
        "#         (as distributed with scipy.stats.qmc), first %d dimensions" % MAX_DIM,
        "# columns: dimension  degree_s  poly_a  m_1 ... m_s",
    ]
    for d in range(2, MAX_DIM + 1):
        p = int(poly[d - 1])
        s = p.bit_length() - 1
        a = (p - (1 << s) - 1) // 2
        m = [int(v) for v in vinit[d - 1, :s]]
        assert all(mk % 2 == 1 and mk < (1 << (k + 1)) for k, mk in enumerate(m)), (d, m)
        lines.append(" ".join(str(x) for x in [d, s, a] + m))
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT} ({MAX_DIM - 1} lines of data)")


if __name__ == "__main__":
    main()
