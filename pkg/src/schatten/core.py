"""Matrix streams, the exact spectral oracle, and stream reductions.

A matrix is presented as an ordered sequence of ``(row, col, value)`` items
under one of three access modes:

* ``turnstile`` -- each item adds ``value`` to the entry (items may repeat);
* ``entrywise`` -- each item assigns the final entry value, any order, each
  entry at most once;
* ``roworder`` -- like entrywise, but items are sorted by (row, col).

Everything in this module is deterministic and pure: streams are immutable
once constructed, replays are independent iterators, and the spectral
oracle is a self-contained cyclic Jacobi eigensolver (no external
eigenroutine), used by the test suite as ground truth for the sketching
estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import (
    DuplicateEntryError,
    IndexOutOfRangeError,
    InvalidParameterError,
    ModeMismatchError,
    NoConvergenceError,
    ShapeMismatchError,
)
from .rand import mix64, mix64_array

STREAM_MODES = ("turnstile", "entrywise", "roworder")

DEFAULT_CHUNK = 1 << 16


class MatrixUpdate(NamedTuple):
    row_index: int
    col_index: int
    value: float


class MatrixStream:
    """An in-memory, replayable update stream for an n x m matrix.

    Iterating yields :class:`MatrixUpdate` items; every iteration starts
    from the beginning, so concurrent replays do not interfere.
    """

    __slots__ = ("n", "m", "mode", "rows", "cols", "vals", "replayable")

    def __init__(self, n: int, m: int, mode: str, rows, cols, vals,
                 replayable: bool = True):
        if n < 1 or m < 1:
            raise InvalidParameterError("matrix dimensions must be positive")
        if mode not in STREAM_MODES:
            raise InvalidParameterError(f"unknown stream mode {mode!r}")
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
            raise InvalidParameterError("rows/cols/vals must be equal-length 1-D")
        if rows.size:
            if rows.min() < 0 or rows.max() >= n:
                raise IndexOutOfRangeError(
                    f"row index outside [0, {n}) in stream")
            if cols.min() < 0 or cols.max() >= m:
                raise IndexOutOfRangeError(
                    f"column index outside [0, {m}) in stream")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("stream values must be finite")
        if mode == "roworder" and rows.size > 1:
            key = rows * m + cols
            if np.any(np.diff(key) < 0):
                bad = int(np.argmax(np.diff(key) < 0)) + 1
                raise ModeMismatchError(
                    f"row-order stream not sorted at item {bad}: "
                    f"({rows[bad]}, {cols[bad]})")
        self.n = int(n)
        self.m = int(m)
        self.mode = mode
        self.rows = rows
        self.cols = cols
        self.vals = vals
        self.replayable = replayable

    @classmethod
    def from_updates(cls, n: int, m: int, mode: str,
                     updates: Iterable[tuple]) -> "MatrixStream":
        items = list(updates)
        if items:
            rows, cols, vals = zip(*items)
        else:
            rows, cols, vals = (), (), ()
        return cls(n, m, mode, rows, cols, vals)

    def __len__(self) -> int:
        return self.rows.size

    def __iter__(self) -> Iterator[MatrixUpdate]:
        for i, j, v in zip(self.rows, self.cols, self.vals):
            yield MatrixUpdate(int(i), int(j), float(v))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.rows, self.cols, self.vals

    def iter_chunks(self, chunk: int = DEFAULT_CHUNK):
        for lo in range(0, self.rows.size, chunk):
            hi = lo + chunk
            yield self.rows[lo:hi], self.cols[lo:hi], self.vals[lo:hi]


class GramStream:
    """Lazy turnstile stream of A^T A built from a row-order stream of A.

    Each incoming row ``a`` contributes the updates of the outer product
    ``a^T a`` (one update per pair of non-zeros), so the stream materializes
    to the Gram matrix while the transformation itself holds only one row at
    a time.
    """

    __slots__ = ("source", "n", "m", "mode", "replayable")

    def __init__(self, source):
        if source.mode != "roworder":
            raise ModeMismatchError(
                f"gram_stream requires a roworder source, got {source.mode!r}")
        self.source = source
        self.n = source.m
        self.m = source.m
        self.mode = "turnstile"
        self.replayable = source.replayable

    def _iter_row_blocks(self):
        rows, cols, vals = self.source.arrays()
        if rows.size == 0:
            return
        # Row-order sorting makes row segments contiguous.
        boundaries = np.flatnonzero(np.diff(rows)) + 1
        for seg in np.split(np.arange(rows.size), boundaries):
            c = cols[seg]
            v = vals[seg]
            k = c.size
            a = np.repeat(c, k)
            b = np.tile(c, k)
            yield a, b, np.outer(v, v).ravel()

    def __iter__(self) -> Iterator[MatrixUpdate]:
        for a, b, v in self._iter_row_blocks():
            for i, j, x in zip(a, b, v):
                yield MatrixUpdate(int(i), int(j), float(x))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        blocks = list(self._iter_row_blocks())
        if not blocks:
            z = np.zeros(0)
            return z.astype(np.int64), z.astype(np.int64), z
        a = np.concatenate([blk[0] for blk in blocks])
        b = np.concatenate([blk[1] for blk in blocks])
        v = np.concatenate([blk[2] for blk in blocks])
        return a, b, v

    def iter_chunks(self, chunk: int = DEFAULT_CHUNK):
        buf_a, buf_b, buf_v, size = [], [], [], 0
        for a, b, v in self._iter_row_blocks():
            buf_a.append(a)
            buf_b.append(b)
            buf_v.append(v)
            size += a.size
            if size >= chunk:
                yield (np.concatenate(buf_a), np.concatenate(buf_b),
                       np.concatenate(buf_v))
                buf_a, buf_b, buf_v, size = [], [], [], 0
        if size:
            yield (np.concatenate(buf_a), np.concatenate(buf_b),
                   np.concatenate(buf_v))


def gram_stream(row_stream) -> GramStream:
    """Turnstile stream of A^T A from a row-order stream of A.

    Uses that the Gram matrix is the sum of per-row outer products, so the
    Schatten (p/2)-norm power of the output equals the Schatten p-norm power
    of the input matrix.
    """
    return GramStream(row_stream)


def stream_content_hash(stream) -> int:
    """Order-sensitive 64-bit hash of a stream's update sequence."""
    h = np.uint64(0)
    offset = 0
    for rows, cols, vals in stream.iter_chunks():
        pos = np.arange(offset, offset + rows.size, dtype=np.uint64)
        word = mix64_array(mix64(0xC0DE), pos)
        word ^= mix64_array(mix64(0x501), rows.astype(np.uint64))
        word ^= mix64_array(mix64(0x502), cols.astype(np.uint64))
        word ^= mix64_array(mix64(0x503), vals.view(np.uint64))
        if word.size:
            h ^= np.bitwise_xor.reduce(word)
        offset += rows.size
    return mix64(int(h), offset)


def materialize(stream) -> np.ndarray:
    """Dense n x m matrix from a stream (desk-scale oracle support).

    Turnstile updates are summed; entry-wise / row-order values are
    assigned; unspecified entries are zero.
    """
    n, m = stream.n, stream.m
    out = np.zeros((n, m))
    rows, cols, vals = stream.arrays()
    if stream.mode == "turnstile":
        np.add.at(out, (rows, cols), vals)
        return out
    keys = rows * m + cols
    uniq, counts = np.unique(keys, return_counts=True)
    if np.any(counts > 1):
        k = int(uniq[np.argmax(counts > 1)])
        raise DuplicateEntryError(
            f"entry ({k // m}, {k % m}) appears more than once in "
            f"{stream.mode} stream")
    out[rows, cols] = vals
    return out


# ---------------------------------------------------------------------------
# Exact spectral oracle.


@dataclass
class SpectralResult:
    """Singular values sorted descending, plus solver diagnostics."""

    singular_values: np.ndarray
    iterations: int
    off_diagonal_residual: float


_MAX_SWEEPS = 100


def _off_diagonal_norm(S: np.ndarray) -> float:
    d = S.copy()
    np.fill_diagonal(d, 0.0)
    return math.sqrt(float((d * d).sum()))


def _jacobi_eigenvalues(S: np.ndarray, rel_tol: float) -> tuple[np.ndarray, int, float]:
    """Cyclic Jacobi diagonalization of a symmetric matrix (in place).

    Terminates when the off-diagonal Frobenius mass drops to
    ``rel_tol * ||S||_F``; raises after 100 full sweeps otherwise.
    """
    n = S.shape[0]
    fro = math.sqrt(float((S * S).sum()))
    tol_abs = rel_tol * fro
    if n == 1 or fro == 0.0:
        return np.diag(S).copy(), 0, _off_diagonal_norm(S) if n > 1 else 0.0
    # If every pivot is below this, the total off-diagonal mass is <= tol_abs,
    # so a sweep that rotates nothing has already converged.
    pivot_skip = tol_abs / math.sqrt(n * (n - 1))
    sweeps = 0
    while True:
        off = _off_diagonal_norm(S)
        if off <= tol_abs:
            return np.diag(S).copy(), sweeps, off
        if sweeps >= _MAX_SWEEPS:
            raise NoConvergenceError(
                f"Jacobi sweep cap reached (off-diagonal {off:.3e} > "
                f"target {tol_abs:.3e})")
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p, q]
                if abs(apq) <= pivot_skip:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = S[:, p].copy()
                col_q = S[:, q].copy()
                S[:, p] = c * col_p - s * col_q
                S[:, q] = s * col_p + c * col_q
                row_p = S[p, :].copy()
                row_q = S[q, :].copy()
                S[p, :] = c * row_p - s * row_q
                S[q, :] = s * row_p + c * row_q
                S[p, q] = 0.0
                S[q, p] = 0.0
        sweeps += 1


def singular_values(A, tol: float = 1e-12) -> SpectralResult:
    """Singular values of a dense matrix via cyclic Jacobi.

    Symmetric inputs are diagonalized directly and the singular values are
    the absolute eigenvalues. Otherwise the solver runs on the smaller Gram
    matrix and takes clamped square roots, which costs roughly
    sqrt(machine-eps) * sigma_1 of absolute accuracy on tiny singular
    values -- fine at the desk scales this oracle serves.

    ``tol`` is relative to the Frobenius norm of the matrix handed to the
    eigensolver; the reported residual is absolute.
    """
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeMismatchError("expected a 2-D matrix")
    if not np.all(np.isfinite(A)):
        raise InvalidParameterError("matrix entries must be finite")
    n, m = A.shape
    if n == m and np.array_equal(A, A.T):
        eigvals, sweeps, off = _jacobi_eigenvalues(A.copy(), tol)
        sigma = np.sort(np.abs(eigvals))[::-1]
        return SpectralResult(sigma, sweeps, off)
    gram = A @ A.T if n <= m else A.T @ A
    eigvals, sweeps, off = _jacobi_eigenvalues(gram, tol)
    sigma = np.sqrt(np.clip(eigvals, 0.0, None))
    sigma = np.sort(sigma)[::-1][: min(n, m)]
    return SpectralResult(sigma, sweeps, off)


def schatten_norm_exact(A, p: float, tol: float = 1e-12) -> float:
    """Sum of the p-th powers of the singular values (the norm's p-th power).

    Callers wanting the norm itself take the p-th root. Singular values at
    the numerical-rank cutoff (relative to sigma_1) are treated as exact
    zeros and contribute nothing for any p > 0; without the cutoff,
    round-off zeros would pollute small-p sums.
    """
    if p <= 0:
        raise InvalidParameterError("p must be positive")
    res = singular_values(A, tol=tol)
    sigma = res.singular_values
    if sigma.size == 0:
        return 0.0
    cutoff = max(A.shape) * np.finfo(np.float64).eps * float(sigma[0])
    live = sigma[sigma > cutoff]
    return float(np.sum(live ** p))


def trace_power(A, p: int) -> float:
    """Trace of the p-th matrix power by repeated dense multiplication.

    Equals the Schatten p-norm power for PSD matrices or even p; used as
    ground truth for estimator unbiasedness.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatchError("trace_power requires a square matrix")
    if int(p) != p or p < 1:
        raise InvalidParameterError("p must be a positive integer")
    M = A
    for _ in range(int(p) - 1):
        M = M @ A
    return float(np.trace(M))


def symmetric_embed(A) -> np.ndarray:
    """The symmetric block matrix [[0, A], [A^T, 0]].

    Its non-zero singular values are those of A, each with multiplicity
    two, so for even p the Schatten p-norm power doubles.
    """
    A = np.asarray(A, dtype=np.float64)
    n, m = A.shape
    out = np.zeros((n + m, n + m))
    out[:n, n:] = A
    out[n:, :n] = A.T
    return out


def stream_from_dense(A, mode: str = "roworder") -> MatrixStream:
    """Stream of a dense matrix's non-zero entries in row-major order."""
    A = np.asarray(A, dtype=np.float64)
    rows, cols = np.nonzero(A)
    return MatrixStream(A.shape[0], A.shape[1], mode, rows, cols, A[rows, cols])


def embed_stream(stream) -> MatrixStream:
    """Turnstile stream of the symmetric embedding of an n x m stream."""
    rows, cols, vals = stream.arrays()
    n = stream.n
    emb_rows = np.concatenate([rows, cols + n])
    emb_cols = np.concatenate([cols + n, rows])
    emb_vals = np.concatenate([vals, vals])
    return MatrixStream(n + stream.m, n + stream.m, "turnstile",
                        emb_rows, emb_cols, emb_vals)
