"""Pure-Python scoring kernels.

Reference implementation of the keyed token-scoring hot path; the compiled
twin in ``watermax._core`` must reproduce every result bit for bit (same
hash, same SplitMix64 mixing, same AS241 polynomial order). This module is
the fallback when the extension is unavailable and the ground truth the
extension is tested against.
"""

from __future__ import annotations

import hashlib
import math
import struct

import numpy as np

from .special import ndtri

BACKEND_NAME = "python"

GOLDEN = 0x9E3779B97F4A7C15
_M64 = (1 << 64) - 1
_UNIT = 2.0 ** -53

# scheme codes shared with the compiled backend
SCHEME_GAUSSIAN = 0
SCHEME_KGW = 1
SCHEME_AARONSON = 2


def mix64(x: int) -> int:
    """SplitMix64 output mixing of a 64-bit state value."""
    x &= _M64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _M64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _M64
    x ^= x >> 31
    return x


def uniform_for_seed(seed: int) -> float:
    """First SplitMix64 uniform of the stream seeded by ``seed``, in (0, 1)."""
    z = mix64((seed + GOLDEN) & _M64)
    return ((z >> 11) + 0.5) * _UNIT


def uniform_for_counter(seed: int, counter: int) -> float:
    """Counter-indexed uniform: draw ``counter`` of the stream, in (0, 1)."""
    z = mix64((seed + (counter + 1) * GOLDEN) & _M64)
    return ((z >> 11) + 0.5) * _UNIT


def _value_from_uniform(u: float, scheme: int, gamma: float) -> float:
    if scheme == SCHEME_GAUSSIAN:
        return ndtri(u)
    if scheme == SCHEME_KGW:
        return 1.0 if u < gamma else 0.0
    if scheme == SCHEME_AARONSON:
        return -math.log(u)
    raise ValueError(f"unknown scheme code: {scheme!r}")


def seed_for(key: bytes, gram) -> int:
    """64-bit seed for one h-gram: SHA-256(key || tokens as 4-byte LE), first 8 bytes."""
    packer = struct.Struct(f"<{len(gram)}I")
    digest = hashlib.sha256(key + packer.pack(*(int(t) for t in gram))).digest()
    return int.from_bytes(digest[:8], "little")


def gram_seeds(key: bytes, grams: np.ndarray) -> np.ndarray:
    """Seeds for a (B, h) batch of h-grams, as uint64."""
    grams = np.ascontiguousarray(grams, dtype=np.int32)
    out = np.empty(grams.shape[0], dtype=np.uint64)
    packer = struct.Struct(f"<{grams.shape[1]}I")
    sha = hashlib.sha256
    for i, row in enumerate(grams):
        digest = sha(key + packer.pack(*(int(t) for t in row))).digest()
        out[i] = int.from_bytes(digest[:8], "little")
    return out


class Session:
    """Sequential scoring state: dedup set, running score and effective length.

    Tokens are consumed left to right; position ``pos`` counts tokens fed so
    far. A token at 0-based position j contributes once j >= h, through the
    window of the h tokens ending at j, unless the window's seed was already
    seen in this text.
    """

    __slots__ = ("key", "h", "scheme", "gamma", "pos", "tail", "seen", "s", "leff")

    def __init__(self, key: bytes, h: int, scheme: int, gamma: float = 0.5):
        if h < 1:
            raise ValueError(f"window must be >= 1: {h!r}")
        self.key = bytes(key)
        self.h = h
        self.scheme = scheme
        self.gamma = gamma
        self.pos = 0
        self.tail: list[int] = []
        self.seen: set[int] = set()
        self.s = 0.0
        self.leff = 0

    def copy(self) -> "Session":
        dup = Session.__new__(Session)
        dup.key = self.key
        dup.h = self.h
        dup.scheme = self.scheme
        dup.gamma = self.gamma
        dup.pos = self.pos
        dup.tail = list(self.tail)
        dup.seen = set(self.seen)
        dup.s = self.s
        dup.leff = self.leff
        return dup

    def feed(self, tokens) -> None:
        h = self.h
        key = self.key
        scheme = self.scheme
        gamma = self.gamma
        tail = self.tail
        seen = self.seen
        pos = self.pos
        s = self.s
        leff = self.leff
        packer = struct.Struct(f"<{h}I")
        sha = hashlib.sha256
        for t in tokens:
            t = int(t)
            if t < 0:
                raise ValueError(f"negative token id: {t}")
            if pos >= h:
                digest = sha(key + packer.pack(*tail, t)).digest()
                seed = int.from_bytes(digest[:8], "little")
                if seed not in seen:
                    seen.add(seed)
                    u = uniform_for_seed(seed)
                    s += _value_from_uniform(u, scheme, gamma)
                    leff += 1
            if h > 1:
                tail.append(t)
                if len(tail) >= h:
                    del tail[0]
            pos += 1
        self.pos = pos
        self.s = s
        self.leff = leff

    def score_gram(self, gram) -> tuple[float, bool]:
        """Score one explicit h-gram against the dedup set, without feeding."""
        if len(gram) != self.h:
            raise ValueError(f"gram length {len(gram)} != window {self.h}")
        seed = seed_for(self.key, gram)
        if seed in self.seen:
            return 0.0, False
        self.seen.add(seed)
        u = uniform_for_seed(seed)
        value = _value_from_uniform(u, self.scheme, self.gamma)
        self.s += value
        self.leff += 1
        return value, True

    def seen_seeds(self) -> np.ndarray:
        out = np.fromiter(self.seen, dtype=np.uint64, count=len(self.seen))
        out.sort()
        return out


def score_block(key: bytes, texts: np.ndarray, h: int, scheme: int,
                gamma: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    """Score a (B, L) batch of texts, one fresh session per row.

    Returns (values, contributing): non-contributing positions hold value 0,
    so row sums of ``values`` are the scores and row sums of ``contributing``
    the effective lengths.
    """
    texts = np.ascontiguousarray(texts, dtype=np.int32)
    batch, length = texts.shape
    values = np.zeros((batch, length), dtype=np.float64)
    contrib = np.zeros((batch, length), dtype=np.uint8)
    packer = struct.Struct(f"<{h}I")
    sha = hashlib.sha256
    for b in range(batch):
        row = texts[b]
        seen: set[int] = set()
        for j in range(h, length):
            window = row[j - h + 1:j + 1]
            digest = sha(key + packer.pack(*(int(t) for t in window))).digest()
            seed = int.from_bytes(digest[:8], "little")
            if seed in seen:
                continue
            seen.add(seed)
            u = uniform_for_seed(seed)
            values[b, j] = _value_from_uniform(u, scheme, gamma)
            contrib[b, j] = 1
    return values, contrib


_erfc_ufunc = np.frompyfunc(math.erfc, 1, 1)
_SQRT2 = math.sqrt(2.0)


def normal_cdf_block(x: np.ndarray) -> np.ndarray:
    """Elementwise standard normal CDF (same operations as special.normal_cdf)."""
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * _erfc_ufunc(-x / _SQRT2).astype(np.float64)
