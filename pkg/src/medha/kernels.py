"""Vectorized modular arithmetic on numpy uint64 arrays.

Coefficients are canonical residues in [0, q) with q < 2^62. Products that
need 128 bits are synthesized from 32-bit partials; reductions use Shoup
multiplication when one operand is a precomputed constant and a two-word
Barrett decomposition otherwise. Everything here is exact.
"""

from __future__ import annotations

import numpy as np

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


def mulhi64(a: np.ndarray, b) -> np.ndarray:
    """High 64 bits of the 128-bit product a*b (elementwise)."""
    al = a & _M32
    ah = a >> _S32
    bl = b & _M32
    bh = b >> _S32
    ll = al * bl
    lh = al * bh
    hl = ah * bl
    # carry word cannot overflow: 3 * (2^32 - 1) < 2^64
    t = (ll >> _S32) + (lh & _M32) + (hl & _M32)
    return ah * bh + (lh >> _S32) + (hl >> _S32) + (t >> _S32)


def shoup(w: int, q: int) -> int:
    """Precomputed companion floor(w * 2^64 / q) for mulmod_shoup."""
    return (w << 64) // q


def mulmod_shoup(a: np.ndarray, w, w_shoup, q: np.uint64) -> np.ndarray:
    """a * w mod q with w a constant < q and precomputed companion."""
    approx = mulhi64(a, w_shoup)
    r = a * w - approx * q  # both wrap mod 2^64; r is exact in [0, 2q)
    return np.where(r >= q, r - q, r)


def addmod(a: np.ndarray, b: np.ndarray, q: np.uint64) -> np.ndarray:
    s = a + b
    return np.where(s >= q, s - q, s)


def submod(a: np.ndarray, b: np.ndarray, q: np.uint64) -> np.ndarray:
    d = a + q - b
    return np.where(d >= q, d - q, d)


def negmod(a: np.ndarray, q: np.uint64) -> np.ndarray:
    d = q - a
    return np.where(a == 0, a, d)


class ModContext:
    """Per-modulus constants for vectorized reduction."""

    def __init__(self, q: int):
        if not (2 < q < 1 << 62):
            raise ValueError("modulus out of supported range")
        self.q = q
        self.qv = np.uint64(q)
        self.r64 = (1 << 64) % q
        self.r64v = np.uint64(self.r64)
        self.r64_shoup = np.uint64(shoup(self.r64, q))
        self.u64 = np.uint64((1 << 64) // q)

    def reduce_word(self, lo: np.ndarray) -> np.ndarray:
        """lo mod q for full uint64 words."""
        t = lo - mulhi64(lo, self.u64) * self.qv
        return np.where(t >= self.qv, t - self.qv, t)

    def reduce_pair(self, hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
        """(hi * 2^64 + lo) mod q."""
        m1 = mulmod_shoup(hi, self.r64v, self.r64_shoup, self.qv)
        m2 = self.reduce_word(lo)
        return addmod(m1, m2, self.qv)

    def mulmod(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """General elementwise a * b mod q."""
        return self.reduce_pair(mulhi64(a, b), a * b)

    def mulmod_scalar(self, a: np.ndarray, w: int) -> np.ndarray:
        """a * w mod q with w a runtime constant."""
        w %= self.q
        return mulmod_shoup(a, np.uint64(w), np.uint64(shoup(w, self.q)), self.qv)


_CTX_CACHE: dict[int, ModContext] = {}


def ctx(q: int) -> ModContext:
    c = _CTX_CACHE.get(q)
    if c is None:
        c = _CTX_CACHE[q] = ModContext(q)
    return c
