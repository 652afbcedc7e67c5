"""Deterministic randomness and key material.

Every random value in the system (secret key, errors, encryption randomness,
key-switching uniforms) is drawn from a Trivium keystream seeded by a 64-bit
master seed plus a tag triple (i, j, component). Uniform polynomials are
therefore never stored or shipped: holders of the seed regenerate them on
demand, which is what keeps serialized key-switching material at half size.

The generator steps 64 clocks at a time. That is sound for Trivium because
its shortest feedback tap sits 66 positions from the register input, so a
64-bit window never reads a bit produced in the same step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modarith import PrimeModulus

M64 = (1 << 64) - 1

# component tags for stream derivation
COMP_SECRET = 0
COMP_PK_UNIFORM = 1
COMP_PK_ERROR = 2
COMP_ENC_R = 3
COMP_ENC_E0 = 4
COMP_ENC_E1 = 5
COMP_KSK_UNIFORM = 6
COMP_KSK_ERROR = 7

# half tags for split layouts (0 also covers the native full ring)
HALF_FULL = 0
HALF_PLUS = 1
HALF_MINUS = 2

GAUSS_SIGMA = 3.2
GAUSS_TAIL = 6.0


class TriviumStream:
    """Standard Trivium keystream, emitted 64 bits per step.

    Registers are Python ints; bit j of register A holds state cell
    s_(93-j), so consecutive output clocks read off as ascending bits of a
    shifted window and a step is a handful of word operations.
    """

    def __init__(self, key80: int, iv80: int):
        a = 0
        b = 0
        for i in range(80):
            a |= ((key80 >> i) & 1) << (92 - i)
            b |= ((iv80 >> i) & 1) << (83 - i)
        self.a = a
        self.b = b
        self.c = 7  # cells s286, s287, s288 start at 1
        for _ in range(18):  # 18 * 64 = 1152 warm-up clocks
            self._step()

    def _step(self) -> int:
        a, b, c = self.a, self.b, self.c
        t1 = ((a >> 27) ^ a) & M64
        t2 = ((b >> 15) ^ b) & M64
        t3 = ((c >> 45) ^ c) & M64
        z = t1 ^ t2 ^ t3
        fa = (t3 ^ ((c >> 2) & (c >> 1)) ^ (a >> 24)) & M64
        fb = (t1 ^ ((a >> 2) & (a >> 1)) ^ (b >> 6)) & M64
        fc = (t2 ^ ((b >> 2) & (b >> 1)) ^ (c >> 24)) & M64
        self.a = (a >> 64) | (fa << 29)
        self.b = (b >> 64) | (fb << 20)
        self.c = (c >> 64) | (fc << 47)
        return z

    def next_word(self) -> int:
        return self._step()

    def next_words(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.uint64)
        step = self._step
        for k in range(count):
            out[k] = step()
        return out


def stream_for(seed: int, i: int, j: int, component: int) -> TriviumStream:
    """The keystream owned by tag (i, j, component) under a master seed."""
    if not 0 <= seed < (1 << 64):
        raise ValueError("master seed must fit in 64 bits")
    if not (0 <= i < (1 << 24) and 0 <= j < (1 << 24) and 0 <= component < (1 << 32)):
        raise ValueError("stream tag out of range")
    key = seed  # upper 16 key bits stay zero
    iv = i | (j << 24) | (component << 48)
    return TriviumStream(key, iv & ((1 << 80) - 1))


def component_tag(kind: int, half: int = HALF_FULL, ksk_id: int = 0) -> int:
    """Pack (kind, half, key id) into the 32-bit component field."""
    if not (0 <= kind < 256 and 0 <= half < 16 and 0 <= ksk_id < (1 << 20)):
        raise ValueError("component tag field out of range")
    return kind | (half << 8) | (ksk_id << 12)


def sample_ternary(stream: TriviumStream, n: int) -> np.ndarray:
    """Uniform {-1, 0, +1} coefficients by 2-bit rejection."""
    out = np.empty(n, dtype=np.int64)
    filled = 0
    while filled < n:
        need = n - filled
        words = stream.next_words((need * 2 + 63 + 16) // 64 + 1)
        bits = np.unpackbits(words.view(np.uint8), bitorder="little")
        pairs = bits[0::2][: len(bits) // 2] + 2 * bits[1::2][: len(bits) // 2]
        good = pairs[pairs < 3]
        take = min(len(good), need)
        out[filled : filled + take] = good[:take].astype(np.int64) - 1
        filled += take
    return out


def _gauss_thresholds(sigma: float, tail: float) -> tuple[np.ndarray, int]:
    bound = int(tail * sigma)
    ks = np.arange(-bound, bound + 1)
    probs = np.exp(-(ks.astype(np.float64) ** 2) / (2.0 * sigma * sigma))
    cum = np.cumsum(probs) / probs.sum()
    thr = [min(int(round(c * float(1 << 64))), (1 << 64) - 1) for c in cum]
    # searchsorted works on all but the final cutoff; the last bucket catches
    # every remaining word
    return np.array(thr[:-1], dtype=np.uint64), bound


_GAUSS_CACHE: dict[tuple[float, float], tuple[np.ndarray, int]] = {}


def sample_gaussian(stream: TriviumStream, n: int, sigma: float = GAUSS_SIGMA) -> np.ndarray:
    """Discrete Gaussian by CDF inversion of one 64-bit word per draw."""
    key = (sigma, GAUSS_TAIL)
    if key not in _GAUSS_CACHE:
        _GAUSS_CACHE[key] = _gauss_thresholds(sigma, GAUSS_TAIL)
    thr, bound = _GAUSS_CACHE[key]
    words = stream.next_words(n)
    return np.searchsorted(thr, words, side="right").astype(np.int64) - bound


def sample_uniform_mod(stream: TriviumStream, n: int, q: int) -> np.ndarray:
    """Uniform residues mod q by masked rejection, one word per candidate."""
    mask = np.uint64((1 << q.bit_length()) - 1)
    qv = np.uint64(q)
    out = np.empty(n, dtype=np.uint64)
    filled = 0
    while filled < n:
        need = n - filled
        cand = stream.next_words(need + (need >> 3) + 4) & mask
        good = cand[cand < qv]
        take = min(len(good), need)
        out[filled : filled + take] = good[:take]
        filled += take
    return out


def signed_to_residues(x: np.ndarray, q: int) -> np.ndarray:
    """Signed int64 coefficients into canonical residues mod q."""
    return (x % np.int64(q)).astype(np.uint64)


@dataclass
class SecretKey:
    """Ternary secret polynomial over the scheme ring, plus its seed."""

    seed: int
    coeffs: np.ndarray  # int64 in {-1, 0, 1}, length = scheme ring degree

    @property
    def degree(self) -> int:
        return len(self.coeffs)


def gen_secret(seed: int, degree: int) -> SecretKey:
    s = sample_ternary(stream_for(seed, 0, 0, component_tag(COMP_SECRET)), degree)
    return SecretKey(seed, s)
