"""One-pass row-order estimator for p = 4k+2 on sparse square matrices.

While rows of A scan by, the state maintains, in sublinear space:

* the exact Frobenius mass of A (row order permits exact accumulation);
* a bucketed sign sketch estimating the Frobenius mass of B = A^T A from
  the on-the-fly Gram updates;
* a count-sketch of B's entries per sampling group, scaled by the group's
  per-row precision-sampling weights, for approximate row recovery;
* bucketed second-level sign sketches estimating each B-row's squared norm;
* a weighted reservoir of A-rows plus the set of largest-norm A-rows.

After the scan, heavy B-rows form the always-kept set, each sampling group
contributes its precision-sampled rows, and the final importance-weighted
sum over all index tuples estimates the Schatten p-norm power. Powers
divisible by four instead reduce to the one-pass turnstile estimator on
the Gram stream.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .core import gram_stream
from .errors import (
    IndexOutOfRangeError,
    InvalidParameterError,
    ModeMismatchError,
    NotFinalizedError,
    SparsityExceededError,
    UnsupportedPError,
)
from .onepass import SchattenEstimate, new_onepass
from .rand import (
    TAG_PRECISION,
    TAG_RESERVOIR,
    mix64,
    uniform_half_open01,
    uniform_open01,
)

DEFAULT_C_T = 1.0
DEFAULT_C_W = 8.0
DEFAULT_C_D = 5.0
FROB_REPS = 7
ROW_NORM_HASHINGS = 3
ROW_NORM_SUBWIDTH = 8
HEAVY_CAP_FACTOR = 10
GRAM_FLUSH = 8192


_M31 = np.uint64((1 << 31) - 1)
_M61 = np.uint64((1 << 61) - 1)


class _HashFamily:
    """Stacked degree-3 polynomial hashes over a Mersenne prime field.

    One 4-wise independent field element per (depth, key) supplies both the
    bucket (multiply-shift of its top bits) and the sign (its low bit); for
    distinct keys the joint values are 4-wise independent, which is what
    the second-moment arguments for these sketches consume. The field is
    2^31 - 1 when the key universe fits (native 64-bit products), else
    2^61 - 1.
    """

    __slots__ = ("depth", "width", "coeffs", "wide")

    def __init__(self, depth: int, width: int, seed: int, universe: int):
        self.depth = int(depth)
        self.width = int(width)
        self.wide = universe >= int(_M31)
        prime = int(_M61 if self.wide else _M31)
        self.coeffs = np.array(
            [[mix64(seed, 0x0C, d, k) % prime for k in range(4)]
             for d in range(depth)],
            dtype=np.uint64,
        )

    def _values(self, keys: np.ndarray) -> np.ndarray:
        # Horner over the field; result shape (depth, len(keys)).
        if self.wide:
            from .rand import _fold61, _mulmod61
            acc = np.broadcast_to(self.coeffs[:, :1], (self.depth, keys.size)).copy()
            for k in range(1, 4):
                acc = _fold61(_mulmod61(acc, keys[None, :]) + self.coeffs[:, k:k + 1])
            return acc
        acc = np.broadcast_to(self.coeffs[:, :1], (self.depth, keys.size)).copy()
        for k in range(1, 4):
            r = acc * keys[None, :] + self.coeffs[:, k:k + 1]  # < 2^63
            r = (r & _M31) + (r >> np.uint64(31))
            r = (r & _M31) + (r >> np.uint64(31))
            acc = r - (r >= _M31).astype(np.uint64) * _M31
        return acc

    def bucket_sign(self, keys) -> tuple[np.ndarray, np.ndarray]:
        keys = np.asarray(keys, dtype=np.uint64).reshape(-1)
        v = self._values(keys)
        if self.wide:
            top = v >> np.uint64(29)
            buckets = ((top * np.uint64(self.width)) >> np.uint64(32))
        else:
            buckets = ((v * np.uint64(self.width)) >> np.uint64(31))
        signs = 1.0 - 2.0 * (v & np.uint64(1)).astype(np.float64)
        return buckets.astype(np.int64), signs

    def buckets_only(self, keys) -> np.ndarray:
        return self.bucket_sign(keys)[0]


class CountSketch:
    """Linear hashed-bucket sketch with sign-corrected median recovery."""

    def __init__(self, width: int, depth: int, seed: int,
                 universe: int = 1 << 62):
        if width < 1 or depth < 1:
            raise InvalidParameterError("count-sketch needs width, depth >= 1")
        self.width = int(width)
        self.depth = int(depth)
        self._fam = _HashFamily(depth, width, mix64(seed, 0x01), universe)
        self.cells = np.zeros((depth, width))

    def update(self, keys, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        b, s = self._fam.bucket_sign(keys)
        flat = (np.arange(self.depth, dtype=np.int64)[:, None] * self.width + b)
        np.add.at(self.cells.reshape(-1), flat.reshape(-1),
                  (s * values[None, :]).reshape(-1))

    def query(self, keys) -> np.ndarray:
        """Median-over-depth estimate of each key's value."""
        keys = np.asarray(keys, dtype=np.uint64)
        shape = keys.shape
        b, s = self._fam.bucket_sign(keys.reshape(-1))
        est = s * self.cells[np.arange(self.depth)[:, None], b]
        return np.median(est, axis=0).reshape(shape)


class FrobeniusSketch:
    """Bucketed sign sketch of squared Frobenius mass, median of repetitions.

    Each repetition folds every key into one of ``ceil(72/eps^2)`` signed
    buckets; the sum of squared buckets is an unbiased second-moment
    estimate whose relative error is within eps/3 with constant
    probability, and the median over 7 repetitions makes that reliable.
    """

    def __init__(self, epsilon: float, seed: int, reps: int = FROB_REPS,
                 universe: int = 1 << 62):
        if not 0.0 < epsilon < 1.0:
            raise InvalidParameterError("epsilon must lie in (0, 1)")
        self.width = math.ceil(72.0 / (epsilon * epsilon))
        self.reps = int(reps)
        self._fam = _HashFamily(reps, self.width, mix64(seed, 0x03), universe)
        self.cells = np.zeros((reps, self.width))

    def update(self, keys, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        b, s = self._fam.bucket_sign(keys)
        flat = (np.arange(self.reps, dtype=np.int64)[:, None] * self.width + b)
        np.add.at(self.cells.reshape(-1), flat.reshape(-1),
                  (s * values[None, :]).reshape(-1))

    def estimate(self) -> float:
        return float(np.median((self.cells ** 2).sum(axis=1)))


class RowNormSketch:
    """Bucketed second-level sketches estimating per-row squared norms.

    Rows hash into buckets; each bucket holds a small sign sketch of its
    entries whose sum of squares estimates the bucket's mass. When a row
    dominates its bucket that is the row's squared norm; the median over
    independent hashings suppresses collisions.
    """

    def __init__(self, buckets: int, seed: int,
                 hashings: int = ROW_NORM_HASHINGS,
                 subwidth: int = ROW_NORM_SUBWIDTH,
                 universe: int = 1 << 62):
        self.buckets = max(1, int(buckets))
        self.hashings = int(hashings)
        self.subwidth = int(subwidth)
        self._row_fam = _HashFamily(hashings, self.buckets,
                                    mix64(seed, 0x05), universe)
        self._entry_fam = _HashFamily(hashings, subwidth,
                                      mix64(seed, 0x06), universe)
        self.cells = np.zeros((hashings, self.buckets, subwidth))

    def update(self, row_keys, entry_keys, values) -> None:
        values = np.asarray(values, dtype=np.float64)
        b = self._row_fam.buckets_only(row_keys)
        sub, s = self._entry_fam.bucket_sign(entry_keys)
        flat = ((np.arange(self.hashings, dtype=np.int64)[:, None]
                 * self.buckets + b) * self.subwidth + sub)
        np.add.at(self.cells.reshape(-1), flat.reshape(-1),
                  (s * values[None, :]).reshape(-1))

    def estimate(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.uint64)
        mass = (self.cells ** 2).sum(axis=2)  # (hashings, buckets)
        b = self._row_fam.buckets_only(rows)
        est = mass[np.arange(self.hashings)[:, None], b]
        return np.median(est, axis=0)


def l2_sample_indices(norms_sq: np.ndarray, budget: int, seed: int) -> np.ndarray:
    """Precision-sample ``budget`` indices proportionally to squared norm.

    Each index draws a seeded uniform u in (0, 1]; the ``budget`` largest
    values of norm^2/u win, which includes index i with probability close
    to min(1, budget * norm_i^2 / total).
    """
    norms_sq = np.asarray(norms_sq, dtype=np.float64)
    n = norms_sq.size
    u = uniform_half_open01(seed, np.arange(n, dtype=np.uint64))
    scores = np.where(norms_sq > 0, norms_sq / u, 0.0)
    live = np.flatnonzero(scores > 0)
    if live.size <= budget:
        return np.sort(live)
    order = live[np.argsort(-scores[live], kind="stable")]
    return np.sort(order[:budget])


def _weighted_top(heap_items: list, cap: int, key, payload) -> bool:
    """Push (key, payload) keeping the ``cap`` largest keys; True if kept."""
    if len(heap_items) < cap:
        heapq.heappush(heap_items, (key, payload))
        return True
    if key > heap_items[0][0]:
        heapq.heapreplace(heap_items, (key, payload))
        return True
    return False


class RowOrderState:
    """Streaming state of the row-order estimator for p = 4k+2."""

    def __init__(self, n: int, p: int, epsilon: float, seed: int,
                 s_a: int = 2, T: int | None = None,
                 cs_width: int | None = None, cs_depth: int | None = None,
                 norm_buckets: int | None = None):
        if int(p) != p or p < 6 or p % 4 != 2:
            raise UnsupportedPError(
                f"row-order estimator handles p = 4k+2 with k >= 1; for p "
                f"divisible by 4 use the gram-stream reduction (got p={p})")
        if not 0.0 < epsilon < 1.0:
            raise InvalidParameterError("epsilon must lie in (0, 1)")
        if n < 1:
            raise InvalidParameterError("n must be positive")
        if s_a < 1:
            raise InvalidParameterError("sparsity bound must be >= 1")
        self.n = int(n)
        self.p = int(p)
        self.k = (p - 2) // 4
        self.epsilon = float(epsilon)
        self.seed = int(seed)
        self.s_a = int(s_a)
        exponent = 1.0 - 1.0 / (self.k + 1)
        self.T = (math.ceil(DEFAULT_C_T * n ** exponent / (epsilon * epsilon))
                  if T is None else int(T))
        if self.T < 1:
            raise InvalidParameterError("sample budget T must be >= 1")
        log2n = math.log2(max(n, 2))
        self.cs_width = (math.ceil(DEFAULT_C_W * self.T * log2n)
                         if cs_width is None else int(cs_width))
        self.cs_depth = (math.ceil(DEFAULT_C_D * log2n)
                         if cs_depth is None else int(cs_depth))
        self.cap = HEAVY_CAP_FACTOR * self.T

        universe = self.n * self.n
        self.frob = FrobeniusSketch(epsilon, mix64(seed, 0xB1),
                                    universe=universe)
        self.gram_sketches = [
            CountSketch(self.cs_width, self.cs_depth, mix64(seed, 0xB2, s),
                        universe=universe)
            for s in range(1, self.k + 1)
        ]
        self.row_norms = RowNormSketch(
            2 * self.cap if norm_buckets is None else int(norm_buckets),
            mix64(seed, 0xB3), universe=universe)
        self._precision_seeds = [
            mix64(seed, TAG_PRECISION, s) for s in range(1, self.k + 1)
        ]
        self._reservoir_seed = mix64(seed, TAG_RESERVOIR)

        self.Z = 0.0
        self.rows_seen = 0
        self.updates_seen = 0
        self._last_row = -1
        self._finished = False
        self._res_heap: list = []       # (log-key, row index), T smallest-out
        self._res_rows: dict[int, tuple] = {}
        self._top_heap: list = []       # ((norm2, -index), index)
        self._top_rows: dict[int, tuple] = {}
        self._pending: list[tuple] = []
        self._pending_size = 0
        self._heavy_cache = None
        self._norm_est_cache = None
        self._lprime_cache = None

    # -- ingest --------------------------------------------------------------

    def ingest_row(self, row_index: int, cols, vals) -> None:
        """Feed the next row of A (sparse: column indices plus values)."""
        if self._finished:
            raise ModeMismatchError("ingest after finish_ingest")
        if row_index <= self._last_row:
            raise ModeMismatchError(
                f"row {row_index} arrived after row {self._last_row}")
        if row_index >= self.n:
            raise IndexOutOfRangeError(f"row index {row_index} outside [0, {self.n})")
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if cols.size != vals.size:
            raise InvalidParameterError("cols and vals must align")
        if cols.size > self.s_a:
            raise SparsityExceededError(
                f"row {row_index} has {cols.size} non-zeros, bound is {self.s_a}")
        if cols.size:
            if cols.min() < 0 or cols.max() >= self.n:
                raise IndexOutOfRangeError(
                    f"column index outside [0, {self.n}) in row {row_index}")
            if np.any(np.diff(cols) <= 0):
                raise ModeMismatchError(
                    f"row {row_index} columns not strictly increasing")
        self._last_row = row_index
        self.rows_seen += 1
        norm2 = float((vals * vals).sum())
        self.Z += norm2
        if norm2 > 0.0:
            row_copy = (cols.copy(), vals.copy())
            u = float(uniform_open01(self._reservoir_seed,
                                     np.uint64(row_index)))
            if _weighted_top(self._res_heap, self.T,
                             math.log(u) / norm2, row_index):
                self._res_rows[row_index] = row_copy
                if len(self._res_rows) > len(self._res_heap):
                    kept = {idx for _, idx in self._res_heap}
                    self._res_rows = {
                        i: rv for i, rv in self._res_rows.items() if i in kept}
            if _weighted_top(self._top_heap, self.cap,
                             (norm2, -row_index), row_index):
                self._top_rows[row_index] = row_copy
                if len(self._top_rows) > len(self._top_heap):
                    kept = {idx for _, idx in self._top_heap}
                    self._top_rows = {
                        i: rv for i, rv in self._top_rows.items() if i in kept}
        if cols.size:
            a = np.repeat(cols, cols.size)
            b = np.tile(cols, cols.size)
            v = np.outer(vals, vals).ravel()
            self._pending.append((a, b, v))
            self._pending_size += a.size
            self.updates_seen += a.size
            if self._pending_size >= GRAM_FLUSH:
                self._flush_gram()

    def _flush_gram(self) -> None:
        if not self._pending:
            return
        a = np.concatenate([blk[0] for blk in self._pending])
        b = np.concatenate([blk[1] for blk in self._pending])
        v = np.concatenate([blk[2] for blk in self._pending])
        self._pending = []
        self._pending_size = 0
        keys = a.astype(np.uint64) * np.uint64(self.n) + b.astype(np.uint64)
        self.frob.update(keys, v)
        self.row_norms.update(a.astype(np.uint64), keys, v)
        for s, sketch in enumerate(self.gram_sketches):
            u = uniform_half_open01(self._precision_seeds[s],
                                    a.astype(np.uint64))
            sketch.update(keys, v / np.sqrt(u))

    def ingest_stream(self, stream) -> None:
        """Feed a whole roworder stream, one row at a time."""
        if stream.mode != "roworder":
            raise ModeMismatchError(
                f"row-order estimator needs a roworder stream, got {stream.mode!r}")
        if stream.n != self.n or stream.m != self.n:
            raise IndexOutOfRangeError(
                f"stream is {stream.n} x {stream.m}, state expects "
                f"{self.n} x {self.n}")
        rows, cols, vals = stream.arrays()
        if rows.size == 0:
            return
        boundaries = np.flatnonzero(np.diff(rows)) + 1
        for seg in np.split(np.arange(rows.size), boundaries):
            self.ingest_row(int(rows[seg[0]]), cols[seg], vals[seg])

    def finish_ingest(self) -> None:
        self._flush_gram()
        self._finished = True

    # -- post-ingest queries ---------------------------------------------------

    def _require_finished(self) -> None:
        if not self._finished:
            raise NotFinalizedError("ingest not finished")

    def frobenius_sq_estimate(self) -> float:
        self._require_finished()
        if self._lprime_cache is None:
            self._lprime_cache = self.frob.estimate()
        return self._lprime_cache

    def _norm_estimates(self) -> np.ndarray:
        if self._norm_est_cache is None:
            self._norm_est_cache = self.row_norms.estimate(
                np.arange(self.n, dtype=np.uint64))
        return self._norm_est_cache

    def heavy_rows(self) -> np.ndarray:
        """Indices of Gram rows whose estimated norm clears the heavy bar.

        A row enters when its estimated squared norm reaches
        L'/(10T); at most 10T survive, largest estimates first, ties to the
        lower index.
        """
        self._require_finished()
        if self._heavy_cache is not None:
            return self._heavy_cache
        lprime = self.frobenius_sq_estimate()
        est = self._norm_estimates()
        threshold = lprime / (HEAVY_CAP_FACTOR * self.T)
        eligible = np.flatnonzero((est >= threshold) & (est > 0))
        if eligible.size > self.cap:
            order = eligible[np.lexsort((eligible, -est[eligible]))]
            eligible = np.sort(order[:self.cap])
        self._heavy_cache = eligible
        return eligible

    def _recover_rows(self, group: int, indices: np.ndarray) -> np.ndarray:
        """Approximate B rows from the group's scaled count-sketch."""
        if indices.size == 0:
            return np.zeros((0, self.n))
        sketch = self.gram_sketches[group]
        cols = np.arange(self.n, dtype=np.uint64)
        raw = np.empty((indices.size, self.n))
        step = max(1, (1 << 17) // self.n)  # bound the per-query key block
        for lo in range(0, indices.size, step):
            block = indices[lo:lo + step].astype(np.uint64)
            keys = block[:, None] * np.uint64(self.n) + cols[None, :]
            raw[lo:lo + step] = sketch.query(keys)
        u = uniform_half_open01(self._precision_seeds[group],
                                indices.astype(np.uint64))
        rows = raw * np.sqrt(u)[:, None]
        keep = min(self.s_a * self.s_a, self.n)
        if keep < self.n:
            # Sparsity bound: only s_a^2 entries per Gram row can be real.
            cut = np.argpartition(-np.abs(rows), keep - 1, axis=1)[:, keep:]
            np.put_along_axis(rows, cut, 0.0, axis=1)
        return rows

    def precision_sample(self, s: int):
        """Group ``s`` sampled indices, recovered rows, and scale factors.

        Returns ``(indices, rows, tau)`` where indices are the precision
        sample unioned with the heavy set, rows are the recovered
        approximations, and tau is 1 for heavy rows and L'/||row||^2
        otherwise (0 when nothing was recovered, which zeroes the tuple's
        contribution anyway).
        """
        self._require_finished()
        if not 1 <= s <= self.k:
            raise InvalidParameterError(
                f"sample group {s} outside [1, {self.k}]")
        heavy = self.heavy_rows()
        est = self._norm_estimates()
        sampled = l2_sample_indices(est, self.T, self._precision_seeds[s - 1])
        indices = np.union1d(sampled, heavy)
        rows = self._recover_rows(s - 1, indices)
        lprime = self.frobenius_sq_estimate()
        norms = (rows * rows).sum(axis=1)
        in_heavy = np.isin(indices, heavy)
        with np.errstate(divide="ignore"):
            tau = np.where(in_heavy, 1.0,
                           np.where(norms > 0, lprime / norms, 0.0))
        return indices, rows, tau

    # -- finalize ----------------------------------------------------------------

    def live_cells(self) -> int:
        """Floats held across all sketch structures and stored rows."""
        cells = self.frob.cells.size + self.row_norms.cells.size
        cells += sum(cs.cells.size for cs in self.gram_sketches)
        for store in (self._res_rows, self._top_rows):
            cells += sum(2 * rv[0].size + 1 for rv in store.values())
        cells += 2 * (len(self._res_heap) + len(self._top_heap))
        return cells

    def finalize(self) -> SchattenEstimate:
        """Importance-weighted sum over all sampled index tuples."""
        self._require_finished()
        heavy = self.heavy_rows()
        heavy_set = set(int(i) for i in heavy)
        groups = [self.precision_sample(s) for s in range(1, self.k + 1)]

        top_indices = np.array(sorted(self._top_rows), dtype=np.int64)
        res_indices = np.array(sorted(self._res_rows), dtype=np.int64)
        last_indices = np.union1d(res_indices, top_indices)
        a_rows = np.zeros((last_indices.size, self.n))
        for pos, idx in enumerate(last_indices):
            rv = self._top_rows.get(int(idx)) or self._res_rows.get(int(idx))
            a_rows[pos, rv[0]] = rv[1]
        a_norm2 = (a_rows * a_rows).sum(axis=1)
        in_top = np.isin(last_indices, top_indices)
        with np.errstate(divide="ignore"):
            tau_last = np.where(in_top, 1.0,
                                np.where(a_norm2 > 0, self.Z / a_norm2, 0.0))

        inv_t = 1.0 / self.T
        mats = [rows for _, rows, _ in groups] + [a_rows]
        omegas = []
        for indices, _, tau in groups:
            member = np.fromiter((int(i) in heavy_set for i in indices),
                                 dtype=bool, count=indices.size)
            omegas.append(tau * np.where(member, 1.0, inv_t))
        omegas.append(tau_last * np.where(in_top, 1.0, inv_t))

        if any(mat.shape[0] == 0 for mat in mats):
            value = 0.0
        else:
            chain = omegas[0][:, None] * (mats[0] @ mats[1].T)
            for idx in range(1, len(mats) - 1):
                chain = chain @ (omegas[idx][:, None] * (mats[idx] @ mats[idx + 1].T))
            closing = omegas[-1][:, None] * (mats[-1] @ mats[0].T)
            value = float(np.trace(chain @ closing))

        return SchattenEstimate(
            value=value,
            p=self.p,
            algorithm="roworder",
            repetitions=1,
            seed=self.seed,
            sketch_cells=self.live_cells(),
            updates=self.updates_seen,
            aggregates={"mean": value, "median_of_means": value},
            extra={
                "T": self.T,
                "K_size": int(heavy.size),
                "V_size": int(len(self._top_rows)),
                "live_cells": self.live_cells(),
                "rows": self.rows_seen,
                "cells_touched": self.updates_seen * (
                    self.frob.reps + self.k * self.cs_depth
                    + self.row_norms.hashings),
                "frobenius_sq_estimate": self.frobenius_sq_estimate(),
                "exact_input_frobenius_sq": self.Z,
                "estimated_bits": 64 * self.live_cells(),
            },
        )


def new_roworder(n: int, p: int, epsilon: float, seed: int = 0,
                 s_a: int = 2, T: int | None = None,
                 cs_width: int | None = None,
                 cs_depth: int | None = None,
                 norm_buckets: int | None = None) -> RowOrderState:
    """Fresh row-order state; T defaults to ceil(n^(1-1/(k+1)) / eps^2)."""
    return RowOrderState(n, p, epsilon, seed, s_a=s_a, T=T,
                         cs_width=cs_width, cs_depth=cs_depth,
                         norm_buckets=norm_buckets)


def run_roworder(stream, p: int, epsilon: float, seed: int = 0,
                 s_a: int | None = None, T: int | None = None,
                 cs_width: int | None = None,
                 cs_depth: int | None = None) -> SchattenEstimate:
    """Drive the full row-order pipeline over one stream."""
    if stream.mode != "roworder":
        raise ModeMismatchError("row-order estimation needs a roworder stream")
    if s_a is None:
        rows = stream.arrays()[0]
        s_a = int(np.bincount(rows, minlength=stream.n).max()) if rows.size else 1
        s_a = max(s_a, 1)
    state = new_roworder(stream.n, p, epsilon, seed, s_a=s_a, T=T,
                         cs_width=cs_width, cs_depth=cs_depth)
    state.ingest_stream(stream)
    state.finish_ingest()
    return state.finalize()


def estimate_4z(row_stream, p: int, epsilon: float, kind: str = "zd_sparse",
                seed: int = 0, t: int | None = None, r: int | None = None,
                aggregate: str = "mean") -> SchattenEstimate:
    """Row-order estimation for p divisible by 4 via the Gram reduction.

    Feeds the on-the-fly turnstile stream of B = A^T A into the one-pass
    estimator at power p/2 (B is PSD by construction), so the result
    estimates the Schatten p-norm power of A directly. A Frobenius sketch
    of the same Gram stream rides along for cross-checking.
    """
    if int(p) != p or p < 4 or p % 4 != 0:
        raise UnsupportedPError(
            f"gram-stream reduction handles p divisible by 4, got p={p}")
    gs = gram_stream(row_stream)
    state = new_onepass(gs.n, p // 2, epsilon, kind=kind, seed=seed,
                        t=t, r=r, assume_psd=True)
    frob = FrobeniusSketch(epsilon, mix64(seed, 0xB1), universe=gs.n * gs.n)
    for rows, cols, vals in gs.iter_chunks():
        state.ingest(rows, cols, vals)
        keys = rows.astype(np.uint64) * np.uint64(gs.n) + cols.astype(np.uint64)
        frob.update(keys, vals)
    est = state.estimate(aggregate)
    est.algorithm = "roworder4z"
    est.extra.update(
        reduced_power=p // 2,
        frobenius_sq_estimate=frob.estimate(),
        input_shape=(row_stream.n, row_stream.m),
    )
    est.p = int(p)
    return est
