"""Haar-random unitaries and the second-order Weingarten moments.

Random streams
--------------
An :class:`RngSeed` ``(seed, stream)`` names one independent stream.  It is
mapped to ``numpy.random.Philox`` (a counter-based generator) keyed by
``SeedSequence(seed, spawn_key=(stream,))``.  Uniform doubles come from
``Generator.random``; standard normals are produced from those uniforms with
the Box-Muller transform ``r = sqrt(-2 ln(1 - u1))``, ``(r cos 2 pi u2,
r sin 2 pi u2)``.  The pinned transform (rather than numpy's ziggurat) keeps
the draw sequence reproducible from the uniform stream alone.

Because every draw consumes a fixed number of uniforms, a stream sampled in
chunks yields exactly the same unitaries as one large draw.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple

import numpy as np

_U64 = 2**64
_U32 = 2**32


@dataclass(frozen=True)
class RngSeed:
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < _U64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not 0 <= self.stream < _U32:
            raise ValueError("stream index must be a 32-bit unsigned integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, offset: int) -> "RngSeed":
        return RngSeed(self.seed, (self.stream + offset) % _U32)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngSeed(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


def standard_normal_pairs(gen: np.random.Generator, shape) -> tuple[np.ndarray, np.ndarray]:
    """Two independent N(0,1) arrays of ``shape`` via Box-Muller on uniforms."""
    # pairs interleaved so the stream order does not depend on the batch shape
    u = gen.random(tuple(np.atleast_1d(shape)) + (2,))
    r = np.sqrt(-2.0 * np.log1p(-u[..., 0]))
    ang = 2.0 * np.pi * u[..., 1]
    return r * np.cos(ang), r * np.sin(ang)


def ginibre(gen: np.random.Generator, d: int, n: int) -> np.ndarray:
    """``n`` complex d x d matrices with i.i.d. N(0,1) real and imaginary parts."""
    re, im = standard_normal_pairs(gen, (n, d, d))
    return re + 1j * im


def _qr_to_haar(z: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(diag)
    phase = np.where(mag == 0, 1.0, diag / np.where(mag == 0, 1.0, mag))
    return q * phase[..., None, :]


def sample_haar_batch(d: int, n: int, rng) -> np.ndarray:
    """Draw ``n`` Haar unitaries of size ``d`` as an array of shape (n, d, d).

    Follows the Ginibre + QR recipe: Z with N(0,1) real/imag parts, Z = QR,
    D_kk = R_kk/|R_kk| (1 when R_kk = 0), U = QD.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    gen = as_generator(rng)
    if n == 0:
        return np.zeros((0, d, d), dtype=complex)
    return _qr_to_haar(ginibre(gen, d, n))


def sample_haar(d: int, rng) -> np.ndarray:
    """One Haar-random unitary; the first element of the stream named by ``rng``."""
    return sample_haar_batch(d, 1, rng)[0]


def haar_chunks(d: int, n: int, rng, chunk: int = 8192) -> Iterator[np.ndarray]:
    """Yield the ``n`` draws of one stream in blocks of at most ``chunk``."""
    gen = as_generator(rng)
    done = 0
    while done < n:
        k = min(chunk, n - done)
        yield sample_haar_batch(d, k, gen)
        done += k


# Weingarten calculus, q = 2

ONE_ONE = "1^2"
TWO = "2"


def weingarten_value(partition: str, d: int) -> Fraction:
    """Wg(1^2, d) = 1/(d^2-1) and Wg(2, d) = -1/(d(d^2-1)); exact rationals."""
    if d < 2:
        raise ValueError("Weingarten values for q=2 need d >= 2")
    if partition in (ONE_ONE, "OneOne", "11"):
        return Fraction(1, d * d - 1)
    if partition in (TWO, "Two"):
        return Fraction(-1, d * (d * d - 1))
    raise ValueError(f"unknown partition {partition!r}")


class MomentIndex(NamedTuple):
    """Indices of E[U_{i1 j1} U_{i2 j2} conj(U_{i1p j1p}) conj(U_{i2p j2p})], 0-based."""

    i1: int
    j1: int
    i2: int
    j2: int
    i1p: int
    j1p: int
    i2p: int
    j2p: int


def _check_index(idx: MomentIndex, d: int) -> None:
    if any(not 0 <= k < d for k in idx):
        raise ValueError(f"moment index {tuple(idx)} out of range for d={d}")


def fourth_moment_analytic(idx: MomentIndex, d: int) -> Fraction:
    """Exact Haar average of the indexed product of four unitary entries."""
    if d < 2:
        raise ValueError("need d >= 2")
    idx = MomentIndex(*idx)
    _check_index(idx, d)
    i1, j1, i2, j2, i1p, j1p, i2p, j2p = idx
    rows_id = i1 == i1p and i2 == i2p
    rows_sw = i1 == i2p and i2 == i1p
    cols_id = j1 == j1p and j2 == j2p
    cols_sw = j1 == j2p and j2 == j1p
    same = int(rows_id and cols_id) + int(rows_sw and cols_sw)
    cross = int(rows_id and cols_sw) + int(rows_sw and cols_id)
    return same * weingarten_value(ONE_ONE, d) + cross * weingarten_value(TWO, d)


def _moment_samples(u: np.ndarray, idx: MomentIndex) -> np.ndarray:
    i1, j1, i2, j2, i1p, j1p, i2p, j2p = idx
    return u[:, i1, j1] * u[:, i2, j2] * np.conj(u[:, i1p, j1p]) * np.conj(u[:, i2p, j2p])


def fourth_moment_mc_many(indices, d: int, samples: int, rng, chunk: int = 65536):
    """Monte-Carlo means and standard errors for several index patterns at once.

    Returns two arrays ``(means, stderrs)``; the standard error of a complex
    mean is ``sqrt(E|x - mean|^2 / n)``.
    """
    indices = [MomentIndex(*i) for i in indices]
    for idx in indices:
        _check_index(idx, d)
    s1 = np.zeros(len(indices), dtype=complex)
    s2 = np.zeros(len(indices))
    for u in haar_chunks(d, samples, rng, chunk):
        for k, idx in enumerate(indices):
            x = _moment_samples(u, idx)
            s1[k] += x.sum()
            s2[k] += np.sum(np.abs(x) ** 2)
    mean = s1 / samples
    var = np.maximum(s2 / samples - np.abs(mean) ** 2, 0.0) * samples / (samples - 1)
    return mean, np.sqrt(var / samples)


def fourth_moment_mc(idx: MomentIndex, d: int, samples: int, rng) -> tuple[complex, float]:
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    mean, err = fourth_moment_mc_many([idx], d, samples, rng)
    return complex(mean[0]), float(err[0])


def reduced_fourth_moment(a: int, j: int, k: int, b: int, d: int, summed: bool = False) -> Fraction:
    """E[conj(U_ia) U_ij conj(U_ik) U_ib] = (d_ja d_bk + d_jk d_ba) / (d(d+1)).

    The value does not depend on the row index ``i``.  With ``summed=True`` the
    sum over ``i`` is returned instead, which carries an extra factor ``d``.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    if any(not 0 <= x < d for x in (a, j, k, b)):
        raise ValueError("index out of range")
    hits = int(j == a and b == k) + int(j == k and b == a)
    val = Fraction(hits, d * (d + 1))
    return val * d if summed else val


# Row (or column) index classes used to enumerate verification patterns:
# same -> all four equal, direct -> (x, y | x, y), swapped -> (x, y | y, x),
# broken -> primed indices not a permutation of the unprimed ones.
INDEX_CLASSES = {
    "same": (0, 0, 0, 0),
    "direct": (0, 1, 0, 1),
    "swapped": (0, 1, 1, 0),
    "broken": (0, 0, 1, 0),
}


def verification_patterns() -> list[tuple[str, MomentIndex]]:
    """The 16 row-class x column-class patterns, as (label, MomentIndex)."""
    out = []
    for (rname, r), (cname, c) in itertools.product(INDEX_CLASSES.items(), repeat=2):
        i1, i2, i1p, i2p = r
        j1, j2, j1p, j2p = c
        out.append((f"rows={rname};cols={cname}", MomentIndex(i1, j1, i2, j2, i1p, j1p, i2p, j2p)))
    return out
