"""One-pass bilinear-sketch estimator of the Schatten p-norm power.

The state holds, for each of r repetitions, the p sketches
``S_l = G_l A G_{l+1}^T`` (indices wrap, so the last sketch pairs the last
generator with the first). Each repetition's estimator is the trace of the
sketch chain ``S_1 S_2 ... S_p``, an unbiased estimate of ``Tr(A^p)``:
for PSD matrices, or for general matrices with even p via the symmetric
embedding, that is the Schatten p-norm raised to the p.

Everything is linear in the input, so updates can arrive one at a time
(turnstile) or in vectorized batches with identical results. With sparse
sign generators each update touches exactly one sketch cell per
(repetition, slot); with Gaussian generators it is a dense rank-one
update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IndexOutOfRangeError,
    InvalidParameterError,
    RequiresPSDError,
)
from .rand import SketchGenerator

DEFAULT_C_T = 2.0
DEFAULT_C_R = 6.0
MOM_GROUPS = 9


@dataclass
class SchattenEstimate:
    """An estimate of the Schatten p-norm power plus run metadata."""

    value: float
    p: int
    algorithm: str
    repetitions: int
    seed: int
    sketch_cells: int
    updates: int
    aggregates: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def median_of_means(values: np.ndarray, group_size: int) -> float:
    """Median of group means over consecutive groups of ``group_size``."""
    values = np.asarray(values, dtype=np.float64)
    if group_size < 1:
        raise InvalidParameterError("group size must be positive")
    means = [values[lo:lo + group_size].mean()
             for lo in range(0, values.size, group_size)]
    return float(np.median(means))


def aggregate_repetitions(values: np.ndarray) -> dict:
    """Mean and median-of-means (groups of ceil(r/9)) of repetition values."""
    r = values.size
    return {
        "mean": float(values.mean()),
        "median_of_means": median_of_means(values, math.ceil(r / MOM_GROUPS)),
    }


def _validate_power_eps(p: int, epsilon: float) -> None:
    if int(p) != p or p < 2:
        raise InvalidParameterError("p must be an integer >= 2")
    if not 0.0 < epsilon < 0.5:
        raise InvalidParameterError("epsilon must lie in (0, 1/2)")


def sketch_rows_for(n: int, p: int, c_t: float = DEFAULT_C_T) -> int:
    """Default sketch height: max(1, ceil(c_t * n^(1-2/p)))."""
    return max(1, math.ceil(c_t * n ** (1.0 - 2.0 / p)))


def repetitions_for(epsilon: float, c_r: float = DEFAULT_C_R) -> int:
    return math.ceil(c_r / (epsilon * epsilon))


class BilinearSketchState:
    """Mutable sketch state for the one-pass estimator."""

    def __init__(self, n: int, p: int, t: int, r: int, kind: str, seed: int,
                 assume_psd: bool = False):
        if n < 1:
            raise InvalidParameterError("n must be positive")
        if int(p) != p or p < 2:
            raise InvalidParameterError("p must be an integer >= 2")
        if t < 1 or r < 1:
            raise InvalidParameterError("t and r must be positive")
        self.n = int(n)
        self.p = int(p)
        self.t = int(t)
        self.r = int(r)
        self.kind = kind
        self.seed = int(seed)
        self.psd_asserted = bool(assume_psd)
        self.generators = [
            [SketchGenerator(kind, t, n, seed, matrix_slot=l, repetition_slot=rho)
             for l in range(p)]
            for rho in range(r)
        ]
        self.sketches = np.zeros((r, p, t, t))
        self.updates_applied = 0
        self.cells_touched = 0
        self._zd_buckets = None  # (p, r, n) lazily built lookup tables
        self._zd_signs = None

    # -- helpers -------------------------------------------------------------

    @property
    def sketch_cells(self) -> int:
        return self.r * self.p * self.t * self.t

    def _check_indices(self, rows, cols) -> None:
        if rows.size == 0:
            return
        if rows.min() < 0 or rows.max() >= self.n or \
           cols.min() < 0 or cols.max() >= self.n:
            raise IndexOutOfRangeError(
                f"update index outside [0, {self.n})")

    def _zd_tables(self):
        if self._zd_buckets is None:
            all_cols = np.arange(self.n, dtype=np.uint64)
            buckets = np.empty((self.p, self.r, self.n), dtype=np.int64)
            signs = np.empty((self.p, self.r, self.n))
            for l in range(self.p):
                for rho in range(self.r):
                    b, s = self.generators[rho][l].zd_columns(all_cols)
                    buckets[l, rho] = b
                    signs[l, rho] = s
            self._zd_buckets = buckets
            self._zd_signs = signs
        return self._zd_buckets, self._zd_signs

    # -- update paths ----------------------------------------------------------

    def apply_update(self, i: int, j: int, delta: float) -> None:
        """Apply one turnstile update A[i, j] += delta."""
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexOutOfRangeError(
                f"update ({i}, {j}) outside [0, {self.n})^2")
        p, r, t = self.p, self.r, self.t
        if self.kind == "zd_sparse":
            buckets, signs = self._zd_tables()
            for l in range(p):
                ln = (l + 1) % p
                for rho in range(r):
                    w = delta * signs[l, rho, i] * signs[ln, rho, j]
                    self.sketches[rho, l, buckets[l, rho, i], buckets[ln, rho, j]] += w
                    self.cells_touched += 1
        elif self.kind == "debug_identity":
            self.sketches[:, :, i, j] += delta
            self.cells_touched += r * p
        else:
            for rho in range(r):
                gens = self.generators[rho]
                cols_i = [gens[l].columns([i])[:, 0] for l in range(p)]
                cols_j = [gens[l].columns([j])[:, 0] for l in range(p)]
                for l in range(p):
                    gi = cols_i[l]
                    gj = cols_j[(l + 1) % p]
                    self.sketches[rho, l] += delta * np.outer(gi, gj)
            self.cells_touched += r * p * t * t
        self.updates_applied += 1

    def ingest(self, rows, cols, vals) -> None:
        """Vectorized batch of turnstile updates (same result as one-at-a-time)."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        self._check_indices(rows, cols)
        count = rows.size
        if count == 0:
            return
        p, r, t = self.p, self.r, self.t
        if self.kind == "zd_sparse":
            buckets, signs = self._zd_tables()
            for l in range(p):
                ln = (l + 1) % p
                for rho in range(r):
                    w = vals * signs[l, rho, rows] * signs[ln, rho, cols]
                    flat = buckets[l, rho, rows] * t + buckets[ln, rho, cols]
                    self.sketches[rho, l] += np.bincount(
                        flat, weights=w, minlength=t * t).reshape(t, t)
            self.cells_touched += r * p * count
        elif self.kind == "debug_identity":
            block = np.zeros((t, t))
            np.add.at(block, (rows, cols), vals)
            self.sketches += block
            self.cells_touched += r * p * count
        else:
            for rho in range(r):
                gens = self.generators[rho]
                row_cols = {l: gens[l].columns(rows) for l in range(p)}
                col_cols = {l: gens[l].columns(cols) for l in range(p)}
                for l in range(p):
                    left = row_cols[l] * vals
                    self.sketches[rho, l] += left @ col_cols[(l + 1) % p].T
            self.cells_touched += r * p * t * t * count
        self.updates_applied += count

    def ingest_stream(self, stream, chunk: int = 1 << 14) -> None:
        for rows, cols, vals in stream.iter_chunks(chunk):
            self.ingest(rows, cols, vals)

    def ingest_dense(self, A) -> None:
        """Sketch a dense matrix in one shot (equivalent to its update list)."""
        A = np.asarray(A, dtype=np.float64)
        if A.shape != (self.n, self.n):
            raise IndexOutOfRangeError(
                f"dense input must be {self.n} x {self.n}")
        if self.kind != "gaussian":
            nz_r, nz_c = np.nonzero(A)
            self.ingest(nz_r, nz_c, A[nz_r, nz_c])
            return
        count = int(np.count_nonzero(A))
        p, r, t = self.p, self.r, self.t
        for rho in range(r):
            mats = [self.generators[rho][l].toarray() for l in range(p)]
            for l in range(p):
                self.sketches[rho, l] += (mats[l] @ A) @ mats[(l + 1) % p].T
        self.cells_touched += r * p * t * t * count
        self.updates_applied += count

    # -- readout ---------------------------------------------------------------

    def estimator_value(self, rho: int) -> float:
        """Trace of the sketch chain for one repetition."""
        if not 0 <= rho < self.r:
            raise InvalidParameterError(f"repetition {rho} outside [0, {self.r})")
        chain = self.sketches[rho, 0]
        for l in range(1, self.p):
            chain = chain @ self.sketches[rho, l]
        return float(np.trace(chain))

    def repetition_values(self) -> np.ndarray:
        return np.array([self.estimator_value(rho) for rho in range(self.r)])

    def estimate(self, aggregate: str = "mean") -> SchattenEstimate:
        """Aggregate the repetition estimators into one value."""
        if aggregate not in ("mean", "mom"):
            raise InvalidParameterError("aggregate must be 'mean' or 'mom'")
        if self.p % 2 == 1 and not self.psd_asserted:
            raise RequiresPSDError(
                "odd p estimates need assume_psd: the trace-power target "
                "equals the norm power only for PSD inputs")
        values = self.repetition_values()
        aggregates = aggregate_repetitions(values)
        value = aggregates["mean" if aggregate == "mean" else "median_of_means"]
        return SchattenEstimate(
            value=value,
            p=self.p,
            algorithm="onepass",
            repetitions=self.r,
            seed=self.seed,
            sketch_cells=self.sketch_cells,
            updates=self.updates_applied,
            aggregates=aggregates,
            extra={
                "t": self.t,
                "kind": self.kind,
                "cells_touched": self.cells_touched,
                "estimated_bits": 64 * self.sketch_cells,
            },
        )


def new_onepass(n: int, p: int, epsilon: float, kind: str = "gaussian",
                seed: int = 0, t: int | None = None, r: int | None = None,
                assume_psd: bool = False,
                c_t: float = DEFAULT_C_T,
                c_r: float = DEFAULT_C_R) -> BilinearSketchState:
    """Fresh one-pass state with contract defaults.

    ``t`` defaults to max(1, ceil(c_t * n^(1-2/p))) and ``r`` to
    ceil(c_r / epsilon^2); both can be overridden.
    """
    _validate_power_eps(p, epsilon)
    if n < 1:
        raise InvalidParameterError("n must be positive")
    t = sketch_rows_for(n, p, c_t) if t is None else int(t)
    r = repetitions_for(epsilon, c_r) if r is None else int(r)
    return BilinearSketchState(n, p, t, r, kind, seed, assume_psd=assume_psd)


def estimate_general(stream, p: int, epsilon: float, kind: str = "gaussian",
                     seed: int = 0, t: int | None = None, r: int | None = None,
                     aggregate: str = "mean",
                     c_t: float = DEFAULT_C_T,
                     c_r: float = DEFAULT_C_R) -> SchattenEstimate:
    """Schatten p-norm power of an arbitrary n x m stream, even p only.

    Runs the PSD-path estimator on the symmetric block embedding
    [[0, A], [A^T, 0]] by mirroring every update on the fly, then halves
    the result (the embedding doubles the norm power).
    """
    if int(p) != p or p % 2 == 1:
        raise RequiresPSDError(
            "general-matrix estimation supports even p only")
    _validate_power_eps(p, epsilon)
    dim = stream.n + stream.m
    state = new_onepass(dim, p, epsilon, kind=kind, seed=seed, t=t, r=r,
                        c_t=c_t, c_r=c_r)
    n = stream.n
    for rows, cols, vals in stream.iter_chunks():
        emb_rows = np.concatenate([rows, cols + n])
        emb_cols = np.concatenate([cols + n, rows])
        emb_vals = np.concatenate([vals, vals])
        state.ingest(emb_rows, emb_cols, emb_vals)
    est = state.estimate(aggregate)
    halved = {k: v / 2.0 for k, v in est.aggregates.items()}
    est.value = est.value / 2.0
    est.aggregates = halved
    est.extra.update(embedding="symmetric", input_shape=(stream.n, stream.m))
    return est
