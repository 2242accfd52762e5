"""Token-level edit attacks and score-preservation measurement.

An attack picks a fraction of positions uniformly without replacement and
edits each one: substitute a different uniform token, insert a uniform
token after it, or delete it. Editing one token invalidates every hash
window that covers it, so the score-level damage exceeds the edit rate;
`effective_alpha` measures the surviving fraction directly by comparing
the contributing window seeds of both texts.
"""

from dataclasses import dataclass, field
from typing import Sequence, Union

import math

import numpy as np

from .scoring import DEFAULT_WINDOW, ScoringSession, SecretKey

__all__ = [
    "AttackSpec",
    "attack",
    "attack_batch",
    "effective_alpha",
    "edit_rate_for_preservation",
    "expected_preservation",
]

_SUBSTITUTE, _INSERT, _DELETE = 0, 1, 2


@dataclass(frozen=True)
class AttackSpec:
    """Edit-attack parameters.

    alpha is the fraction of positions left untouched; the remaining
    round((1 - alpha) * L) positions each receive one edit drawn from
    mix = (substitute, insert, delete) weights. vocab_size bounds the
    tokens drawn for substitutions and insertions.
    """

    alpha: float
    vocab_size: int
    mix: Sequence[float] = field(default=(1.0, 0.0, 0.0))
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError("alpha must lie in [0, 1]")
        mix = tuple(float(w) for w in self.mix)
        if len(mix) != 3 or any(w < 0 for w in mix):
            raise ValueError("mix needs 3 nonnegative weights "
                             "(substitute, insert, delete)")
        if not math.isclose(sum(mix), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("mix weights must sum to 1")
        object.__setattr__(self, "mix", mix)
        if self.vocab_size < 1 or (mix[_SUBSTITUTE] > 0
                                   and self.vocab_size < 2):
            raise ValueError("vocab_size too small for the requested edits")


def _edit_count(alpha: float, length: int) -> int:
    return int(math.floor((1.0 - alpha) * length + 0.5))


def attack(text: Sequence[int], spec: AttackSpec, index: int = 0) -> np.ndarray:
    """Apply one randomized edit pass; `index` shards batch seeds."""
    tokens = np.asarray(text, dtype=np.int64)
    if tokens.ndim != 1 or tokens.size == 0:
        raise ValueError("text must be a non-empty token sequence")
    rng = np.random.default_rng([spec.rng_seed, index])
    k = _edit_count(spec.alpha, tokens.size)
    positions = np.sort(rng.choice(tokens.size, size=k, replace=False))
    kinds = rng.choice(3, size=k, p=spec.mix)
    edits = dict(zip(positions.tolist(), kinds.tolist()))
    out = []
    for i, t in enumerate(tokens.tolist()):
        kind = edits.get(i)
        if kind is None:
            out.append(t)
        elif kind == _SUBSTITUTE:
            # uniform over the other vocab_size - 1 tokens
            r = int(rng.integers(0, spec.vocab_size - 1))
            out.append(r + 1 if r >= t else r)
        elif kind == _INSERT:
            out.append(t)
            out.append(int(rng.integers(0, spec.vocab_size)))
        else:
            pass
    return np.asarray(out, dtype=np.int32)


def attack_batch(texts: Sequence[Sequence[int]],
                 spec: AttackSpec) -> "list[np.ndarray]":
    return [attack(t, spec, index=i) for i, t in enumerate(texts)]


def effective_alpha(
    original: Sequence[int],
    attacked: Sequence[int],
    key: Union[SecretKey, bytes],
    window: int = DEFAULT_WINDOW,
) -> float:
    """Fraction of the attacked text's contributing scores left intact.

    A score variable is keyed by its window seed, so a variable survives
    exactly when its window content does. Returns 0 when the attacked
    text has no contributing scores at all.
    """
    before = ScoringSession(key, window=window)
    before.feed(np.asarray(original, dtype=np.int32))
    after = ScoringSession(key, window=window)
    after.feed(np.asarray(attacked, dtype=np.int32))
    mine = after.seen_seeds()
    if mine.size == 0:
        return 0.0
    kept = np.isin(mine, before.seen_seeds()).sum()
    return float(kept) / float(mine.size)


def expected_preservation(edit_rate: float, window: int = DEFAULT_WINDOW) -> float:
    """Score survival under independent per-token edits at `edit_rate`:
    a window survives only if all of its tokens do."""
    if not (0.0 <= edit_rate <= 1.0):
        raise ValueError("edit_rate must lie in [0, 1]")
    return (1.0 - edit_rate) ** window


def edit_rate_for_preservation(target: float, window: int = DEFAULT_WINDOW) -> float:
    """Invert expected_preservation: the per-token edit rate that leaves
    a `target` fraction of scores intact."""
    if not (0.0 <= target <= 1.0):
        raise ValueError("target must lie in [0, 1]")
    return 1.0 - target ** (1.0 / window)
