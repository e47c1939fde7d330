"""Generators for analytically known and randomized test instances.

Cycle Laplacians come with their closed-form spectrum and serve as golden
fixtures for the spectral oracle; cycle-union incidence streams and
indicator-row streams reproduce the classic hard row-order instances;
random PSD and random sparse matrices drive the statistical estimator
tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import MatrixStream, schatten_norm_exact
from .errors import InvalidParameterError
from .rand import mix64, uniform_open01

SPECTRUM_PROFILES = ("uniform", "powerlaw", "prescribed")


@dataclass
class FixtureSpec:
    """A named fixture kind plus its kind-specific parameters."""

    kind: str
    params: dict = field(default_factory=dict)


def cycle_laplacian(m: int, copies: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal Laplacian of ``copies`` disjoint m-cycles.

    Returns the matrix together with its known spectrum
    ``{4 sin^2(j pi / m) : j = 0..m-1}``, each value with multiplicity
    ``copies``, sorted descending.
    """
    if m < 3:
        raise InvalidParameterError("cycle length must be at least 3")
    if copies < 1:
        raise InvalidParameterError("copies must be at least 1")
    block = np.zeros((m, m))
    np.fill_diagonal(block, 2.0)
    for v in range(m):
        block[v, (v + 1) % m] = -1.0
        block[(v + 1) % m, v] = -1.0
    n = m * copies
    out = np.zeros((n, n))
    for c in range(copies):
        out[c * m:(c + 1) * m, c * m:(c + 1) * m] = block
    spectrum = np.array(
        [4.0 * math.sin(j * math.pi / m) ** 2 for j in range(m)] * copies)
    return out, np.sort(spectrum)[::-1]


def cycle_union_incidence(cycle_length: int, copies: int = 1) -> MatrixStream:
    """Row-order incidence stream of a union of disjoint cycles.

    Rows are edges in cycle order; each row carries the two endpoint
    entries, oriented (+1 at the lower-indexed node, -1 at the higher), so
    that the Gram matrix of the stream is exactly the cycle-union Laplacian
    whatever the cycle length. Each row has exactly two non-zeros.
    """
    if cycle_length < 3:
        raise InvalidParameterError("cycle length must be at least 3")
    if copies < 1:
        raise InvalidParameterError("copies must be at least 1")
    n = cycle_length * copies
    rows, cols, vals = [], [], []
    edge = 0
    for c in range(copies):
        base = c * cycle_length
        for e in range(cycle_length):
            u = base + e
            v = base + (e + 1) % cycle_length
            lo, hi = (u, v) if u < v else (v, u)
            rows.extend((edge, edge))
            cols.extend((lo, hi))
            vals.extend((1.0, -1.0))
            edge += 1
    return MatrixStream(n, n, "roworder", rows, cols, vals)


def schatten_gap(t: int, p: float, n: int | None = None
                 ) -> tuple[float, float, float]:
    """Norm powers of the two cycle-union Laplacian types on ``n`` nodes.

    Type (a) is ``n/(2t+1)`` copies of the (2t+1)-cycle Laplacian, type (b)
    is ``n/(4t+2)`` copies of the (4t+2)-cycle Laplacian. For non-integer p
    the two differ by a constant factor; the ratio is independent of ``n``
    because both scale linearly in the number of copies. All values come
    from the exact spectral oracle.
    """
    if t < 2:
        raise InvalidParameterError("t must be at least 2")
    if p <= 0:
        raise InvalidParameterError("p must be positive")
    if float(p) == int(p):
        raise InvalidParameterError("schatten_gap requires non-integer p")
    short, long_ = 2 * t + 1, 4 * t + 2
    if n is None:
        n = long_
    if n % short or n % long_:
        raise InvalidParameterError(
            f"n must be divisible by lcm({short}, {long_}) = {long_}")
    mat_a, _ = cycle_laplacian(short, n // short)
    mat_b, _ = cycle_laplacian(long_, n // long_)
    value_a = schatten_norm_exact(mat_a, p)
    value_b = schatten_norm_exact(mat_b, p)
    return value_a, value_b, value_a / value_b


def indicator_rows(sets, n: int) -> MatrixStream:
    """Row-order stream with one standard-basis row per set element.

    Disjoint sets give all-ones singular values; an element shared by k
    sets contributes a singular value sqrt(k). Rows beyond the sets are
    implicit zeros, padding the matrix to n x n.
    """
    rows, cols, vals = [], [], []
    r = 0
    for s in sets:
        for j in sorted(s):
            if not 0 <= j < n:
                raise InvalidParameterError(
                    f"set element {j} outside [0, {n})")
            if r >= n:
                raise InvalidParameterError(
                    f"more than {n} indicator rows requested")
            rows.append(r)
            cols.append(j)
            vals.append(1.0)
            r += 1
    return MatrixStream(n, n, "roworder", rows, cols, vals)


def _rotation_angles(n: int, seed: int) -> np.ndarray:
    count = n * (n - 1) // 2
    u = uniform_open01(mix64(seed, 0x60), np.arange(count, dtype=np.uint64))
    return 2.0 * math.pi * u


def random_psd(n: int, spectrum_profile: str = "uniform", seed: int = 0,
               alpha: float = 1.0, eigenvalues=None) -> np.ndarray:
    """Seeded PSD matrix U diag(lambda) U^T with a prescribed spectrum.

    The orthogonal factor is a composition of n(n-1)/2 seeded Givens
    rotations, so orthogonality holds by construction. Profiles:
    ``uniform`` draws eigenvalues from (0, 1); ``powerlaw`` uses
    ``(i+1)^-alpha``; ``prescribed`` takes ``eigenvalues`` verbatim.
    """
    if spectrum_profile not in SPECTRUM_PROFILES:
        raise InvalidParameterError(
            f"unknown spectrum profile {spectrum_profile!r}")
    if spectrum_profile == "prescribed":
        lam = np.asarray(eigenvalues, dtype=np.float64)
        if lam.shape != (n,):
            raise InvalidParameterError(
                f"prescribed spectrum must have length {n}")
        if np.any(lam < 0):
            raise InvalidParameterError("prescribed eigenvalues must be >= 0")
    elif spectrum_profile == "powerlaw":
        lam = (np.arange(n, dtype=np.float64) + 1.0) ** (-alpha)
    else:
        lam = uniform_open01(mix64(seed, 0x61), np.arange(n, dtype=np.uint64))
    A = np.diag(lam).copy()
    angles = _rotation_angles(n, seed)
    idx = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            c = math.cos(angles[idx])
            s = math.sin(angles[idx])
            idx += 1
            col_i = A[:, i].copy()
            col_j = A[:, j].copy()
            A[:, i] = c * col_i - s * col_j
            A[:, j] = s * col_i + c * col_j
            row_i = A[i, :].copy()
            row_j = A[j, :].copy()
            A[i, :] = c * row_i - s * row_j
            A[j, :] = s * row_i + c * row_j
    return (A + A.T) / 2.0


def _seeded_permutation(n: int, seed: int) -> np.ndarray:
    perm = np.arange(n)
    u = uniform_open01(seed, np.arange(n, dtype=np.uint64))
    for i in range(n - 1, 0, -1):
        j = int(u[i] * (i + 1))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def random_sparse(n: int, s_a: int, seed: int = 0) -> MatrixStream:
    """Row-order stream with exactly ``s_a`` non-zeros per row and column.

    The support is a union of ``s_a`` pairwise-disjoint random permutation
    matrices (resampled until disjoint); values are seeded signed
    magnitudes in [0.5, 1.5].
    """
    if not 1 <= s_a <= n:
        raise InvalidParameterError("need 1 <= s_a <= n")
    perms: list[np.ndarray] = []
    attempt = 0
    while len(perms) < s_a:
        if attempt > 200 * s_a:
            raise InvalidParameterError(
                f"could not build {s_a} disjoint permutations of {n}")
        cand = _seeded_permutation(n, mix64(seed, 0x70, attempt))
        attempt += 1
        if all(np.all(cand != p) for p in perms):
            perms.append(cand)
    support = np.stack(perms, axis=1)  # row i -> its s_a column indices
    rows, cols, vals = [], [], []
    for i in range(n):
        cs = np.sort(support[i])
        u = uniform_open01(mix64(seed, 0x71, i), np.arange(2 * s_a, dtype=np.uint64))
        mag = 0.5 + u[:s_a]
        sign = np.where(u[s_a:] < 0.5, -1.0, 1.0)
        for k, j in enumerate(cs):
            rows.append(i)
            cols.append(int(j))
            vals.append(float(mag[k] * sign[k]))
    return MatrixStream(n, n, "roworder", rows, cols, vals)
