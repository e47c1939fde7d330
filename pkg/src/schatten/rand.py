"""Seeded, replayable randomness for sketching.

Everything here is a pure function of a 64-bit root seed plus identifying
integers, so any sketch cell or generator column can be regenerated at any
time without storing the random matrices.

Derivation scheme (stable across runs and platforms, documented so results
are reproducible):

* ``mix64(w0, w1, ...)`` chains a splitmix64 finalizer over the words,
  starting from a fixed constant. Sub-seeds are derived as
  ``mix64(root_seed, tag, matrix_slot, repetition_slot)`` where ``tag``
  separates generator families (Gaussian cells, bucket hashes, sign hashes,
  ...).
* 4-wise independent hashing uses a degree-3 polynomial over the prime field
  GF(2^61 - 1), with the four coefficients drawn from ``mix64(seed, k)``.
  Buckets come from a multiply-shift of the top hash bits; signs come from
  the low bit of an independently seeded hash.
* Gaussian cells are ``ndtri(u)/sqrt(t)`` where ``u`` is a counter-based
  uniform: cell (row, column) of a generator uses counter ``column*t + row``.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .errors import InvalidParameterError, KindMismatchError

MASK64 = (1 << 64) - 1
MERSENNE61 = (1 << 61) - 1

# Domain-separation tags for sub-seed derivation.
TAG_GAUSSIAN = 0x11
TAG_ZD_BUCKET = 0x22
TAG_ZD_SIGN = 0x23
TAG_HASH_COEFF = 0x31
TAG_PRECISION = 0x41
TAG_RESERVOIR = 0x42

_MIX_INIT = 0x243F6A8885A308D3  # first 64 fractional bits of pi
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB

GENERATOR_KINDS = ("gaussian", "zd_sparse", "debug_identity")


def _splitmix64(x: int) -> int:
    x = (x + _SM_GAMMA) & MASK64
    x = ((x ^ (x >> 30)) * _SM_MUL1) & MASK64
    x = ((x ^ (x >> 27)) * _SM_MUL2) & MASK64
    return x ^ (x >> 31)


def mix64(*words: int) -> int:
    """Mix any number of integer words into one 64-bit value."""
    h = _MIX_INIT
    for w in words:
        h = _splitmix64(h ^ (int(w) & MASK64))
    return h


def mix64_array(seed: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized tail step of :func:`mix64`: mixes ``seed`` with each counter.

    Bit-identical to ``mix64(...)`` when the same words are folded in, i.e.
    ``mix64_array(s, np.array([c]))[0] == _splitmix64(s ^ c)``.
    """
    arr = np.asarray(counters, dtype=np.uint64)
    # 0-d inputs would hit numpy's warning-prone scalar fast path.
    x = arr.reshape(-1) ^ np.uint64(seed & MASK64)
    x = x + np.uint64(_SM_GAMMA)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(_SM_MUL1)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(_SM_MUL2)
    return (x ^ (x >> np.uint64(31))).reshape(arr.shape)


def uniform_open01(seed: int, counters: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in the open interval (0, 1)."""
    bits = mix64_array(seed, counters)
    # Keep the top 53 bits so the value is exactly representable, then center.
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0**-53)


def uniform_half_open01(seed: int, counters: np.ndarray) -> np.ndarray:
    """Counter-based uniforms in (0, 1]; used for precision-sampling scales."""
    bits = mix64_array(seed, counters)
    return ((bits >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0**-53)


# ---------------------------------------------------------------------------
# GF(2^61 - 1) arithmetic, vectorized over uint64 arrays.

_P61 = np.uint64(MERSENNE61)
_LOW32 = np.uint64(0xFFFFFFFF)


def _fold61(r: np.ndarray) -> np.ndarray:
    # r < 2^63; fold the high bits back (2^61 == 1 mod p), twice is enough.
    r = (r & _P61) + (r >> np.uint64(61))
    r = (r & _P61) + (r >> np.uint64(61))
    return r - (r >= _P61).astype(np.uint64) * _P61


def _mulmod61(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a * b) mod (2^61 - 1) for arrays with entries < 2^61."""
    a_lo = a & _LOW32
    a_hi = a >> np.uint64(32)
    b_lo = b & _LOW32
    b_hi = b >> np.uint64(32)
    ll = a_lo * b_lo                       # < 2^64, exact in uint64
    mid = a_hi * b_lo + a_lo * b_hi        # < 2^62
    hh = a_hi * b_hi                       # < 2^58
    # a*b = hh*2^64 + mid*2^32 + ll; reduce each power of two mod p.
    r = (
        hh * np.uint64(8)                          # 2^64 == 8 mod p
        + (mid >> np.uint64(29))                   # mid*2^32 == hi*2^61+lo*2^32
        + ((mid & np.uint64((1 << 29) - 1)) << np.uint64(32))
        + (ll & _P61)
        + (ll >> np.uint64(61))
    )
    return _fold61(r)


def _poly_mod61(coeffs: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Evaluate a degree-3 polynomial over GF(2^61-1) at each key.

    ``coeffs`` has shape (4,) ordered from the cubic term down to the
    constant; ``keys`` is any uint64 array with entries < 2^61 - 1.
    """
    x = np.asarray(keys, dtype=np.uint64)
    acc = np.broadcast_to(coeffs[0], x.shape).copy()
    for c in coeffs[1:]:
        acc = _fold61(_mulmod61(acc, x) + c)
    return acc


class FourWiseHash:
    """4-wise independent hash over GF(2^61 - 1).

    A degree-3 polynomial with seeded uniform coefficients; by Carter-Wegman,
    evaluations at any 4 distinct keys are independent and uniform over the
    field. Buckets are extracted multiply-shift style from the top 32 bits,
    signs from the low bit.
    """

    __slots__ = ("seed", "coeffs")

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.coeffs = np.array(
            [mix64(seed, TAG_HASH_COEFF, k) % MERSENNE61 for k in range(4)],
            dtype=np.uint64,
        )

    def values(self, keys) -> np.ndarray:
        """Field elements in [0, 2^61 - 1); vectorized over ``keys``."""
        return _poly_mod61(self.coeffs, np.asarray(keys, dtype=np.uint64))

    def value(self, key: int) -> int:
        return int(self.values(np.uint64(key)))

    def buckets(self, keys, t: int) -> np.ndarray:
        """Map each key onto [0, t) via multiply-shift of the top hash bits."""
        top = self.values(keys) >> np.uint64(29)          # 32-bit fraction
        return ((top * np.uint64(t)) >> np.uint64(32)).astype(np.int64)

    def signs(self, keys) -> np.ndarray:
        """Rademacher signs (+1.0 / -1.0) from the low output bit."""
        low = (self.values(keys) & np.uint64(1)).astype(np.float64)
        return 1.0 - 2.0 * low


def hash4(h: FourWiseHash, key: int) -> int:
    """Field-element evaluation of a 4-wise hash at one key."""
    if not 0 <= key < MERSENNE61:
        raise InvalidParameterError(f"key {key} outside [0, 2^61-1)")
    return h.value(key)


class SketchGenerator:
    """Replayable source of sketch-matrix columns.

    Kinds:

    * ``gaussian`` -- column entries are independent N(0, 1/t), so the
      expected squared column norm is 1.
    * ``zd_sparse`` -- each column has exactly one non-zero, a +-1 sign at a
      4-wise-hashed bucket (both families 4-wise independent, independently
      seeded).
    * ``debug_identity`` -- requires t == n; column j is the standard basis
      vector, which makes downstream estimators exact.

    Column ``j`` is a pure function of ``(seed, matrix_slot,
    repetition_slot, j)``; generators carry no mutable state.
    """

    __slots__ = ("kind", "t", "n", "seed", "matrix_slot", "repetition_slot",
                 "_sub", "_bucket_hash", "_sign_hash")

    def __init__(self, kind: str, t: int, n: int, seed: int,
                 matrix_slot: int = 0, repetition_slot: int = 0):
        if kind not in GENERATOR_KINDS:
            raise InvalidParameterError(f"unknown generator kind {kind!r}")
        if t < 1 or n < 1:
            raise InvalidParameterError("sketch dimensions must be positive")
        if kind == "debug_identity" and t != n:
            raise InvalidParameterError(
                f"debug_identity requires t == n, got t={t}, n={n}")
        self.kind = kind
        self.t = t
        self.n = n
        self.seed = seed
        self.matrix_slot = matrix_slot
        self.repetition_slot = repetition_slot
        if kind == "gaussian":
            self._sub = mix64(seed, TAG_GAUSSIAN, matrix_slot, repetition_slot)
            self._bucket_hash = None
            self._sign_hash = None
        elif kind == "zd_sparse":
            self._sub = 0
            self._bucket_hash = FourWiseHash(
                mix64(seed, TAG_ZD_BUCKET, matrix_slot, repetition_slot))
            self._sign_hash = FourWiseHash(
                mix64(seed, TAG_ZD_SIGN, matrix_slot, repetition_slot))
        else:
            self._sub = 0
            self._bucket_hash = None
            self._sign_hash = None

    # -- zd_sparse ----------------------------------------------------------

    def zd_columns(self, js) -> tuple[np.ndarray, np.ndarray]:
        """(bucket, sign) arrays for the requested column indices."""
        if self.kind != "zd_sparse":
            raise KindMismatchError(f"zd query on {self.kind} generator")
        js = np.asarray(js, dtype=np.uint64)
        if js.size and (js.max() >= self.n):
            raise InvalidParameterError("column index out of range")
        return self._bucket_hash.buckets(js, self.t), self._sign_hash.signs(js)

    def zd_column(self, j: int) -> tuple[int, float]:
        if not 0 <= j < self.n:
            raise InvalidParameterError(f"column index {j} outside [0, {self.n})")
        b, s = self.zd_columns(np.uint64(j))
        return int(b), float(s)

    # -- gaussian -----------------------------------------------------------

    def gaussian_column(self, j: int) -> np.ndarray:
        if self.kind != "gaussian":
            raise KindMismatchError(f"gaussian query on {self.kind} generator")
        if not 0 <= j < self.n:
            raise InvalidParameterError(f"column index {j} outside [0, {self.n})")
        counters = np.uint64(j) * np.uint64(self.t) + np.arange(self.t, dtype=np.uint64)
        u = uniform_open01(self._sub, counters)
        return ndtri(u) / np.sqrt(self.t)

    # -- shared -------------------------------------------------------------

    def columns(self, js) -> np.ndarray:
        """Dense (t, len(js)) block of the requested columns, any kind."""
        js = np.atleast_1d(np.asarray(js, dtype=np.int64))
        if js.size and (js.min() < 0 or js.max() >= self.n):
            raise InvalidParameterError("column index out of range")
        if self.kind == "gaussian":
            counters = (js[None, :].astype(np.uint64) * np.uint64(self.t)
                        + np.arange(self.t, dtype=np.uint64)[:, None])
            u = uniform_open01(self._sub, counters)
            return ndtri(u) / np.sqrt(self.t)
        out = np.zeros((self.t, js.size))
        if self.kind == "zd_sparse":
            b, s = self.zd_columns(js.astype(np.uint64))
            out[b, np.arange(js.size)] = s
        else:  # debug_identity
            out[js, np.arange(js.size)] = 1.0
        return out

    def toarray(self) -> np.ndarray:
        """The full t x n generator matrix (test/desk-scale convenience)."""
        return self.columns(np.arange(self.n, dtype=np.int64))


def zd_column(gen: SketchGenerator, j: int) -> tuple[int, float]:
    """Module-level alias for :meth:`SketchGenerator.zd_column`."""
    return gen.zd_column(j)


def gaussian_column(gen: SketchGenerator, j: int) -> np.ndarray:
    """Module-level alias for :meth:`SketchGenerator.gaussian_column`."""
    return gen.gaussian_column(j)
