"""Keyed token scoring.

Every token is scored through the h-token window ending at it: the window
and the secret key are hashed (SHA-256, first 8 bytes) into a 64-bit seed,
the seed's first SplitMix64 uniform becomes the token's score variable
(inverse-normal, green-list indicator, or exponential depending on the
scheme), and a within-text dedup list keyed on the seed discards repeated
windows so contributing variables are i.i.d. by construction. The first h
tokens of a text have no complete window and never contribute.

Embedder and detector run this exact machinery on the same key, which is
what makes detection possible without the model or the prompt.

Parameters and state live in :class:`ScoringSession`; the hot loops live in
the selected kernel backend (see :mod:`watermax.backend`).
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import backend
from .pvalues import PValue, SCHEME_NAMES, normalize_scheme, pvalue

__all__ = [
    "DEFAULT_WINDOW",
    "ScoringSession",
    "SecretKey",
    "TokenVariable",
    "cumulative_score",
    "score_token",
    "seed_for",
]

DEFAULT_WINDOW = 6

_MIN_KEY_BYTES = 16


@dataclass(frozen=True)
class SecretKey:
    """Watermarking key: an opaque byte string of at least 16 bytes."""

    data: bytes

    def __post_init__(self):
        if not isinstance(self.data, (bytes, bytearray)):
            raise TypeError(f"key must be bytes, got {type(self.data).__name__}")
        object.__setattr__(self, "data", bytes(self.data))
        if len(self.data) < _MIN_KEY_BYTES:
            raise ValueError(
                f"key must be at least {_MIN_KEY_BYTES} bytes, got {len(self.data)}")

    @classmethod
    def generate(cls, nbytes: int = 32) -> "SecretKey":
        return cls(secrets.token_bytes(nbytes))

    @classmethod
    def from_hex(cls, text: str) -> "SecretKey":
        return cls(bytes.fromhex(text.strip()))

    @classmethod
    def from_file(cls, path) -> "SecretKey":
        """Load a key file holding either raw bytes or a hex string.

        A file whose content is ASCII hex of even length decodes as hex;
        anything else is taken verbatim as raw key bytes.
        """
        raw = Path(path).read_bytes()
        stripped = raw.strip()
        try:
            text = stripped.decode("ascii")
        except UnicodeDecodeError:
            return cls(raw)
        hexdigits = set("0123456789abcdefABCDEF")
        if text and len(text) % 2 == 0 and set(text) <= hexdigits:
            return cls(bytes.fromhex(text))
        return cls(raw)

    def hex(self) -> str:
        return self.data.hex()


class TokenVariable(NamedTuple):
    value: float
    contributing: bool


def _key_bytes(key: Union[SecretKey, bytes, bytearray]) -> bytes:
    if isinstance(key, SecretKey):
        return key.data
    return SecretKey(bytes(key)).data


class ScoringSession:
    """Sequential scorer for one text under one (key, window, scheme).

    Feeding tokens left to right updates the running score and effective
    length; the dedup list persists for the session's lifetime, so one text
    means one session. ``copy`` forks the full state, which is how the
    embedder scores many continuations of a shared prefix without rescoring
    the prefix.
    """

    __slots__ = ("_raw", "scheme", "window", "kgw_gamma", "key")

    def __init__(self, key: Union[SecretKey, bytes], scheme: Union[str, int] = "gaussian",
                 window: int = DEFAULT_WINDOW, kgw_gamma: float = 0.5):
        code = normalize_scheme(scheme)
        if window < 1:
            raise ValueError(f"window must be >= 1: {window!r}")
        if not 0.0 < kgw_gamma < 1.0:
            raise ValueError(f"kgw_gamma must be in (0, 1): {kgw_gamma!r}")
        self.key = _key_bytes(key)
        self.scheme = SCHEME_NAMES[code]
        self.window = window
        self.kgw_gamma = kgw_gamma
        self._raw = backend.Session(self.key, window, code, kgw_gamma)

    @classmethod
    def _wrap(cls, raw, scheme: str, window: int, kgw_gamma: float, key: bytes):
        obj = object.__new__(cls)
        obj._raw = raw
        obj.scheme = scheme
        obj.window = window
        obj.kgw_gamma = kgw_gamma
        obj.key = key
        return obj

    @property
    def score(self) -> float:
        return self._raw.s

    @property
    def effective_length(self) -> int:
        return self._raw.leff

    @property
    def position(self) -> int:
        return self._raw.pos

    def feed(self, tokens) -> None:
        self._raw.feed(np.ascontiguousarray(tokens, dtype=np.int32))

    def copy(self) -> "ScoringSession":
        return ScoringSession._wrap(self._raw.copy(), self.scheme, self.window,
                                    self.kgw_gamma, self.key)

    def seen_seeds(self) -> np.ndarray:
        return self._raw.seen_seeds()

    def pvalue(self) -> PValue:
        return pvalue(self.scheme, self.score, self.effective_length, self.kgw_gamma)


def seed_for(key: Union[SecretKey, bytes], gram: Sequence[int]) -> int:
    """64-bit window seed: SHA-256(key || h tokens as 4-byte LE), first 8 bytes."""
    return backend.seed_for(_key_bytes(key), np.ascontiguousarray(gram, dtype=np.int32))


def score_token(session: ScoringSession, context: Sequence[int], i: int) -> TokenVariable:
    """Score the token at 1-based position i of ``context``.

    Positions i <= window have no complete window and return a
    non-contributing zero; a window whose seed was already scored in this
    session also returns non-contributing. Otherwise the variable is drawn,
    added to the session's running score, and marked contributing.
    """
    if i < 1 or i > len(context):
        raise IndexError(f"position {i} outside context of length {len(context)}")
    h = session.window
    if i <= h:
        return TokenVariable(0.0, False)
    gram = np.ascontiguousarray(context[i - h:i], dtype=np.int32)
    value, contributing = session._raw.score_gram(gram)
    return TokenVariable(value, contributing)


def cumulative_score(session: ScoringSession, tokens) -> tuple[float, int]:
    """Feed ``tokens`` and return the session's (score, effective length)."""
    session.feed(tokens)
    return session.score, session.effective_length
