"""Multi-pass low-memory estimator of the Schatten p-norm power.

The first generator has a single row, so the working state per repetition
is just two short vectors: a left chain ``G_1 A G_2^T . G_2 A G_3^T ...``
grown from the front and a right chain ``... G_p A G_1^T`` grown from the
back. Pass i extends the left chain by factor i and the right chain by
factor p-i+1 in a single scan; for odd p a final middle pass folds the
remaining factor into the left chain. After ceil(p/2) passes the product
of the two chains is the same scalar the one-pass estimator would have
produced with a one-row first generator, hence an unbiased estimate of
``Tr(A^p)``.

Per update only the O(t) accumulators are touched; nothing of size t^2 is
ever materialized. Between passes each repetition holds exactly the two
chain vectors (2t cells for the standard one-row configuration); during a
pass the freshly accumulating pair doubles that transiently.
"""

from __future__ import annotations

import math

import numpy as np

from .core import stream_content_hash
from .errors import (
    InvalidParameterError,
    NotFinalizedError,
    PassOverflowError,
    RequiresPSDError,
    StreamDriftError,
)
from .onepass import (
    DEFAULT_C_R,
    SchattenEstimate,
    aggregate_repetitions,
    _validate_power_eps,
    repetitions_for,
)
from .rand import SketchGenerator

DEFAULT_C_T = 2.0


def inner_sketch_rows_for(n: int, p: int, c_t: float = DEFAULT_C_T) -> int:
    """Inner sketch height: max(1, ceil(c_t * n^(1-1/(p-1))))."""
    return max(1, math.ceil(c_t * n ** (1.0 - 1.0 / (p - 1))))


def passes_for(p: int) -> int:
    return (p + 1) // 2


class MultipassState:
    """State of the ceil(p/2)-pass estimator across its passes."""

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
        self.t = int(n) if kind == "debug_identity" else int(t)
        self.t_prime = int(n) if kind == "debug_identity" else 1
        self.r = int(r)
        self.kind = kind
        self.seed = int(seed)
        self.psd_asserted = bool(assume_psd)
        self.total_passes = passes_for(p)
        self.pass_index = 1
        self.updates_seen = 0
        self.cells_touched = 0
        self._stream_hash = None
        # Generator slot l hosts the l-th factor's left matrix; slot 0 is
        # the single-row one (identity-sized in debug mode).
        self.generators = [
            [SketchGenerator(kind, self.t_prime if l == 0 else self.t, n,
                             seed, matrix_slot=l, repetition_slot=rho)
             for l in range(p)]
            for rho in range(r)
        ]
        self.left = None   # (r, t_prime, t) after the first pass
        self.right = None  # (r, t, t_prime) after the first pass

    def live_cells(self) -> int:
        """Persistent accumulator cells per repetition (between passes)."""
        cells = 0
        if self.left is not None:
            cells += self.left[0].size
        if self.right is not None:
            cells += self.right[0].size
        return cells

    def _gen(self, rho: int, factor: int) -> SketchGenerator:
        # Factor f multiplies G_f A G_{f+1}^T; generator indices wrap.
        return self.generators[rho][(factor - 1) % self.p]

    def run_pass(self, stream, chunk: int = 1 << 13) -> None:
        """Consume the stream once, extending both chains."""
        if not getattr(stream, "replayable", True):
            raise InvalidParameterError(
                "multi-pass estimation needs a replayable stream")
        if self.pass_index > self.total_passes:
            raise PassOverflowError(
                f"all {self.total_passes} passes already ran")
        digest = stream_content_hash(stream)
        if self._stream_hash is None:
            self._stream_hash = digest
        elif digest != self._stream_hash:
            raise StreamDriftError(
                "stream content changed between passes")
        i = self.pass_index
        p, r = self.p, self.r
        dual = i <= p // 2
        new_left = np.zeros((r, self.t_prime, self.t))
        new_right = np.zeros((r, self.t, self.t_prime)) if dual else None
        per_update = self.r * (2 if dual else 1) * (self.t + self.t_prime)
        for rows, cols, vals in stream.iter_chunks(chunk):
            if rows.size == 0:
                continue
            self.updates_seen += rows.size
            self.cells_touched += rows.size * per_update
            for rho in range(r):
                if dual:
                    lf, rf = i, p - i + 1
                    lg, lg_next = self._gen(rho, lf), self._gen(rho, lf + 1)
                    rg, rg_next = self._gen(rho, rf), self._gen(rho, rf + 1)
                    if i == 1:
                        q = lg.columns(rows)                  # (t', U)
                        new_left[rho] += (q * vals) @ lg_next.columns(cols).T
                        pr = rg_next.columns(cols)            # (t', U)
                        new_right[rho] += (rg.columns(rows) * vals) @ pr.T
                    else:
                        q = self.left[rho] @ lg.columns(rows)
                        new_left[rho] += (q * vals) @ lg_next.columns(cols).T
                        y = rg_next.columns(cols).T @ self.right[rho]  # (U, t')
                        new_right[rho] += rg.columns(rows) @ (vals[:, None] * y)
                else:
                    mid = p // 2 + 1
                    mg, mg_next = self._gen(rho, mid), self._gen(rho, mid + 1)
                    q = self.left[rho] @ mg.columns(rows)
                    new_left[rho] += (q * vals) @ mg_next.columns(cols).T
        self.left = new_left
        if dual:
            self.right = new_right
        self.pass_index += 1

    def repetition_values(self) -> np.ndarray:
        if self.pass_index <= self.total_passes:
            raise NotFinalizedError(
                f"pass {self.pass_index} of {self.total_passes} not yet run")
        return np.array([
            float(np.trace(self.left[rho] @ self.right[rho]))
            for rho in range(self.r)
        ])

    def estimate(self, aggregate: str = "mean") -> SchattenEstimate:
        if aggregate not in ("mean", "mom"):
            raise InvalidParameterError("aggregate must be 'mean' or 'mom'")
        if self.p % 2 == 1 and not self.psd_asserted:
            raise RequiresPSDError(
                "odd p estimates need assume_psd: the trace-power target "
                "equals the norm power only for PSD inputs")
        values = self.repetition_values()
        aggregates = aggregate_repetitions(values)
        value = aggregates["mean" if aggregate == "mean" else "median_of_means"]
        cells = self.r * 2 * self.t * self.t_prime
        return SchattenEstimate(
            value=value,
            p=self.p,
            algorithm="multipass",
            repetitions=self.r,
            seed=self.seed,
            sketch_cells=cells,
            updates=self.updates_seen,
            aggregates=aggregates,
            extra={
                "t": self.t,
                "t_prime": self.t_prime,
                "kind": self.kind,
                "passes": self.total_passes,
                "cells_touched": self.cells_touched,
                "live_cells_per_repetition": self.live_cells(),
                "estimated_bits": 64 * cells,
            },
        )


def new_multipass(n: int, p: int, epsilon: float, kind: str = "gaussian",
                  seed: int = 0, t: int | None = None, r: int | None = None,
                  assume_psd: bool = False,
                  c_t: float = DEFAULT_C_T,
                  c_r: float = DEFAULT_C_R) -> MultipassState:
    """Fresh multi-pass state with contract defaults.

    ``t`` defaults to max(1, ceil(c_t * n^(1-1/(p-1)))); the first sketch
    always has a single row (or is the identity in debug mode).
    """
    _validate_power_eps(p, epsilon)
    if n < 1:
        raise InvalidParameterError("n must be positive")
    t = inner_sketch_rows_for(n, p, c_t) if t is None else int(t)
    r = repetitions_for(epsilon, c_r) if r is None else int(r)
    return MultipassState(n, p, t, r, kind, seed, assume_psd=assume_psd)


def run_all_passes(state: MultipassState, stream) -> MultipassState:
    """Convenience driver: run every remaining pass over a replayable stream."""
    while state.pass_index <= state.total_passes:
        state.run_pass(stream)
    return state
