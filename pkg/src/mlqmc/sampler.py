"""Stochastic input generators: pseudo-random normals and randomized QMC points.

Every generator is a pure function of its identifying tuple, so any index
range can be re-enumerated bit-identically.  Monte Carlo and QMC share the
same inverse-CDF map to normals, which isolates the effect of the point set.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.special import ndtri

from .errors import UnsupportedDimensionError

SOBOL_BITS = 32
UNIFORM_FLOOR = 2.0 ** -64

PSEUDO_RANDOM = "pseudo_random"
LATTICE_SHIFTED = "lattice_shifted"
SOBOL_SCRAMBLED = "sobol_scrambled"

_KIND_IDS = {PSEUDO_RANDOM: 0, LATTICE_SHIFTED: 1, SOBOL_SCRAMBLED: 2}

# sub-stream purposes within one (kind, dimension, seed, randomization) tuple
_PURPOSE_POINTS = 0
_PURPOSE_SHIFT = 1
_PURPOSE_SCRAMBLE = 2


def _read_data_lines(name):
    text = resources.files("mlqmc.data").joinpath(name).read_text()
    return [ln for ln in text.splitlines() if ln and not ln.startswith("#")]


@functools.lru_cache(maxsize=1)
def lattice_generating_vector() -> np.ndarray:
    """The embedded rank-1 lattice generating vector (see data file header)."""
    return np.array([int(ln) for ln in _read_data_lines("lattice_generating_vector.txt")],
                    dtype=np.int64)


@functools.lru_cache(maxsize=1)
def _sobol_seed_table():
    """Per-dimension (degree, poly coefficients a, initial m values)."""
    rows = []
    for ln in _read_data_lines("sobol_direction_numbers.txt"):
        parts = [int(tok) for tok in ln.split()]
        d, s, a, m = parts[0], parts[1], parts[2], parts[3:]
        assert len(m) == s and d == len(rows) + 2
        rows.append((s, a, m))
    return rows


@functools.lru_cache(maxsize=8)
def _direction_integers(d: int) -> np.ndarray:
    """Direction numbers for d dimensions as (d, SOBOL_BITS) uint64 integers.

    Column k holds v_k scaled by 2**SOBOL_BITS.  Dimension 1 uses m_k = 1;
    the rest follow the primitive-polynomial recurrence from the table seeds.
    """
    table = _sobol_seed_table()
    if d > len(table) + 1:
        raise UnsupportedDimensionError(
            f"{d} dimensions requested, direction-number table has {len(table) + 1}"
        )
    v = np.zeros((d, SOBOL_BITS), dtype=np.uint64)
    v[0] = 1 << (SOBOL_BITS - 1 - np.arange(SOBOL_BITS, dtype=np.uint64))
    for dim in range(2, d + 1):
        s, a, m_init = table[dim - 2]
        m = list(m_init)
        for k in range(s, SOBOL_BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= m[k - i] << i
            m.append(new)
        m = np.array(m[:SOBOL_BITS], dtype=np.uint64)
        v[dim - 1] = m << (SOBOL_BITS - 1 - np.arange(SOBOL_BITS, dtype=np.uint64))
    return v


def _scramble_directions(directions: np.ndarray, rng: np.random.Generator):
    """Left-multiply each dimension's direction matrix by a random unit
    lower-triangular bit matrix (linear matrix scramble), and draw a digital
    shift per dimension.

    Lower triangular is in digit order: output digit i mixes only input
    digits j <= i (the more significant bit positions), so the first m digits
    of every point transform bijectively and the digital-net structure of any
    2^m prefix survives the scramble.
    """
    d, bits = directions.shape
    scrambled = np.zeros_like(directions)
    rows = np.arange(bits, dtype=np.uint64)
    diag_bit = np.uint64(1) << (np.uint64(bits - 1) - rows)
    full = np.uint64((1 << bits) - 1)
    above_mask = (~((diag_bit << np.uint64(1)) - np.uint64(1))) & full
    for dim in range(d):
        random_rows = rng.integers(0, 1 << bits, size=bits, dtype=np.uint64)
        matrix_rows = diag_bit | (random_rows & above_mask)
        parity = np.bitwise_count(directions[dim][None, :] & matrix_rows[:, None]) & np.uint64(1)
        scrambled[dim] = np.sum(parity.astype(np.uint64) << (np.uint64(bits - 1) - rows)[:, None],
                                axis=0, dtype=np.uint64)
    shift = rng.integers(0, 1 << bits, size=d, dtype=np.uint64)
    return scrambled, shift


@dataclass(frozen=True)
class QmcPointSet:
    """A deterministic point set in [0,1)^d plus the data that generated it."""

    points: np.ndarray
    kind: str
    generating_data: np.ndarray


def lattice_points(n_points: int, d: int, z: np.ndarray, shift: np.ndarray) -> QmcPointSet:
    """Rank-1 lattice rule: point i = frac(i * z / N + shift)."""
    if n_points < 1:
        raise ValueError("need at least one point")
    z = np.asarray(z, dtype=np.int64)
    if len(z) < d:
        raise ValueError(f"generating vector has {len(z)} components, need {d}")
    shift = np.asarray(shift, dtype=float)
    if shift.shape != (d,) or np.any(shift < 0.0) or np.any(shift >= 1.0):
        raise ValueError(f"shift must lie in [0,1)^{d}")
    i = np.arange(n_points, dtype=np.int64)
    frac = ((i[:, None] * z[None, :d]) % n_points) / float(n_points)
    pts = frac + shift
    pts -= np.floor(pts)
    return QmcPointSet(points=pts, kind=LATTICE_SHIFTED, generating_data=z[:d].copy())


def sobol_points(n_points: int, d: int, scramble_seed=None) -> QmcPointSet:
    """Gray-code Sobol' points from the embedded direction numbers.

    With a scramble seed, applies a linear matrix scramble plus a digital
    shift, both derived deterministically from the seed; with None the raw
    sequence is returned (first point is the origin).
    """
    if n_points < 1 or n_points > 2 ** SOBOL_BITS:
        raise ValueError(f"point count must lie in [1, 2^{SOBOL_BITS}]")
    directions = _direction_integers(d)
    if scramble_seed is None:
        shift = np.zeros(d, dtype=np.uint64)
    else:
        rng = np.random.Generator(np.random.Philox(scramble_seed))
        directions, shift = _scramble_directions(directions, rng)

    idx = np.arange(n_points, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    acc = np.broadcast_to(shift, (n_points, d)).copy()
    for bit in range(SOBOL_BITS):
        mask = (gray >> np.uint64(bit)) & np.uint64(1) == 1
        if not np.any(mask):
            break
        acc[mask] ^= directions[:, bit]
    pts = acc.astype(np.float64) * 2.0 ** -SOBOL_BITS
    return QmcPointSet(points=pts, kind=SOBOL_SCRAMBLED, generating_data=directions)


def to_normals(points) -> np.ndarray:
    """Map uniforms to standard normals by the inverse CDF, coordinate-wise.

    Zero coordinates (the unrandomized origin) are floored at 2^-64 so the
    map is total.
    """
    u = points.points if isinstance(points, QmcPointSet) else np.asarray(points, dtype=float)
    u = np.clip(u, UNIFORM_FLOOR, 1.0 - 1e-16)
    return ndtri(u)


def randomized_qmc_mean(values):
    """Combine per-randomization means: overall mean and its variance estimate."""
    values = np.asarray(values, dtype=float).ravel()
    r = len(values)
    if r < 2:
        raise ValueError(f"need at least 2 randomizations, got {r}")
    return float(np.mean(values)), float(np.var(values, ddof=1) / r)


@dataclass(frozen=True)
class SampleStream:
    """Identifies one reproducible stream of stochastic inputs.

    Streams are pure functions of (kind, dimension, seed, randomization
    index, point index): enumerating any index range twice yields
    bit-identical values.
    """

    kind: str
    dimension: int
    seed: int
    randomization_index: int = 0

    def __post_init__(self):
        if self.kind not in _KIND_IDS:
            raise ValueError(f"unknown stream kind {self.kind!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def _seed_seq(self, purpose: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            entropy=self.seed,
            spawn_key=(_KIND_IDS[self.kind], self.dimension,
                       self.randomization_index, purpose),
        )

    # -- pseudo-random normals ------------------------------------------------

    def normals_block(self, start: int, count: int) -> np.ndarray:
        """Standard normals for sample indices [start, start + count).

        Each index owns a whole number of counter blocks, so block draws and
        per-index draws agree bit for bit.
        """
        if self.kind != PSEUDO_RANDOM:
            raise ValueError(f"normals_block on a {self.kind} stream")
        d = self.dimension
        per_sample = -(-d // 4) * 4  # one Philox block yields 4 doubles
        bitgen = np.random.Philox(self._seed_seq(_PURPOSE_POINTS))
        bitgen.advance(start * (per_sample // 4))
        u = np.random.Generator(bitgen).random(count * per_sample)
        u = u.reshape(count, per_sample)[:, :d]
        return ndtri(np.clip(u, UNIFORM_FLOOR, 1.0 - 1e-16))

    # -- randomized QMC uniforms ----------------------------------------------

    def uniforms(self, n_points: int) -> np.ndarray:
        """The stream's randomized point set with n_points points.

        Sobol' streams are prefix-consistent: the first N points of a larger
        request equal the N-point request.  Lattice streams are not (the
        whole rule depends on N); callers re-evaluate on growth.
        """
        if self.kind == LATTICE_SHIFTED:
            rng = np.random.Generator(np.random.Philox(self._seed_seq(_PURPOSE_SHIFT)))
            shift = rng.random(self.dimension)
            return lattice_points(n_points, self.dimension,
                                  lattice_generating_vector(), shift).points
        if self.kind == SOBOL_SCRAMBLED:
            scramble_seed = self._seed_seq(_PURPOSE_SCRAMBLE)
            return sobol_points(n_points, self.dimension, scramble_seed).points
        raise ValueError(f"uniforms() on a {self.kind} stream")

    def qmc_normals(self, n_points: int) -> np.ndarray:
        return to_normals(self.uniforms(n_points))


def pseudo_random_normals(stream: SampleStream, index: int) -> np.ndarray:
    """The d-vector of standard normals for one sample index of a stream."""
    return stream.normals_block(index, 1)[0]
