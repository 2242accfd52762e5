"""Synthetic token source with controllable entropy.

A :class:`GeneratorModel` is a tiny Markov language model: a logits table
indexed by the last ``order`` tokens, plus a sampling temperature and a
nucleus (top-p) cutoff.  It stands in for an LLM so that experiments can
sweep entropy, draft texts i.i.d., or run a deterministic beam search,
without any neural network in the loop.

Sampling is driven by the same counter-based uniform streams as the
scoring kernels, so every draft is reproducible from a 64-bit seed and
independent of thread scheduling.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import backend
from .seeds import draft_stream_seed

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_UNIT53 = 2.0 ** -53

# slack when accumulating sorted probabilities toward top_p, so that a
# nucleus that should sum to exactly top_p is not cut short by rounding
_NUCLEUS_EPS = 1e-12

_BEAM_POP_BUDGET = 200_000


def _mix64_block(x: np.ndarray) -> np.ndarray:
    # vectorized twin of backend.mix64; uint64 arithmetic wraps mod 2^64
    x = x ^ (x >> np.uint64(30))
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def uniform_block(seed: int, counters: np.ndarray) -> np.ndarray:
    """Vectorized stream draws: entry t equals uniform_for_counter(seed, t)."""
    idx = (np.asarray(counters, dtype=np.uint64) + np.uint64(1)) * _GOLDEN
    bits = _mix64_block(np.uint64(seed) + idx)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _UNIT53


@dataclass(frozen=True, eq=False)
class GeneratorModel:
    """Markov-``order`` logits table with temperature and nucleus cutoff.

    ``logits`` has one row per context state; contexts shorter than
    ``order`` are left-padded with token 0.  Rows may contain ``-inf``
    to forbid tokens, but every row needs at least one finite entry.
    """

    vocab_size: int
    order: int
    logits: np.ndarray
    temperature: float = 1.0
    top_p: float = 1.0

    def __post_init__(self) -> None:
        if self.vocab_size < 1:
            raise ValueError("vocab_size must be positive")
        if self.order < 0:
            raise ValueError("order must be >= 0")
        if not (self.temperature > 0):
            raise ValueError("temperature must be positive")
        if not (0 < self.top_p <= 1):
            raise ValueError("top_p must lie in (0, 1]")
        rows = self.vocab_size ** self.order
        table = np.asarray(self.logits, dtype=np.float64).reshape(rows, self.vocab_size)
        if np.isnan(table).any():
            raise ValueError("logits must not contain NaN")
        if not np.isfinite(table.max(axis=1)).all():
            raise ValueError("every context row needs at least one finite logit")
        table.setflags(write=False)
        object.__setattr__(self, "logits", table)

    @property
    def rows(self) -> int:
        return self.logits.shape[0]

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "order": self.order,
            "logits": self.logits.tolist(),
            "temperature": self.temperature,
            "top_p": self.top_p,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorModel":
        return cls(
            vocab_size=int(data["vocab_size"]),
            order=int(data["order"]),
            logits=np.asarray(data["logits"], dtype=np.float64),
            temperature=float(data.get("temperature", 1.0)),
            top_p=float(data.get("top_p", 1.0)),
        )


def save_model(model: GeneratorModel, path: str) -> None:
    """Write the model as JSON; -inf logits serialize as -Infinity."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path: str) -> GeneratorModel:
    with open(path, "r", encoding="utf-8") as fh:
        return GeneratorModel.from_dict(json.load(fh))


def random_model(
    vocab_size: int,
    order: int,
    concentration: float,
    rng: np.random.Generator,
    temperature: float = 1.0,
    top_p: float = 1.0,
) -> GeneratorModel:
    """Dirichlet-sampled rows; small concentration gives spiky low-entropy rows."""
    if not (concentration > 0):
        raise ValueError("concentration must be positive")
    rows = vocab_size ** order
    gammas = rng.gamma(concentration, size=(rows, vocab_size))
    probs = gammas / gammas.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore"):
        logits = np.log(probs)
    return GeneratorModel(vocab_size, order, logits, temperature, top_p)


def context_state(model: GeneratorModel, context: Sequence[int]) -> int:
    """Row index for the last ``order`` tokens, zero-padded on the left."""
    state = 0
    if model.order == 0:
        return state
    rows = model.rows
    for tok in context[-model.order:] if len(context) else ():
        tok = int(tok)
        if not (0 <= tok < model.vocab_size):
            raise ValueError(f"token {tok} outside vocabulary")
        state = (state * model.vocab_size + tok) % rows
    return state


def _advance_state(model: GeneratorModel, state: int, token: int) -> int:
    if model.order == 0:
        return 0
    return (state * model.vocab_size + token) % model.rows


def _distribution_for_state(model: GeneratorModel, state: int) -> np.ndarray:
    z = model.logits[state] / model.temperature
    z = z - z.max()
    with np.errstate(divide="ignore"):
        probs = np.exp(z)
    probs /= probs.sum()
    if model.top_p < 1.0:
        order = np.argsort(-probs, kind="stable")
        csum = np.cumsum(probs[order])
        keep = csum <= model.top_p + _NUCLEUS_EPS
        keep[0] = True
        trimmed = np.zeros_like(probs)
        kept = order[keep]
        trimmed[kept] = probs[kept]
        probs = trimmed / trimmed.sum()
    return probs


def next_distribution(model: GeneratorModel, context: Sequence[int]) -> np.ndarray:
    """Temperature-scaled softmax restricted to the nucleus, renormalized."""
    return _distribution_for_state(model, context_state(model, context))


class DraftRequest(NamedTuple):
    """Inputs for one batch of drafts continuing ``context``."""

    context: tuple
    length: int
    n: int
    b: int
    rng_seed: int


class DraftBatch(NamedTuple):
    """``tokens`` is an (n, length) int32 array; ``beam_fallback`` marks
    batches where fewer than n distinct beam prefixes existed and the
    shortfall was sampled with duplicates allowed."""

    tokens: np.ndarray
    beam_fallback: bool


def _validate_request(request: DraftRequest) -> None:
    if request.length < 1:
        raise ValueError("draft length must be positive")
    if request.n < 1:
        raise ValueError("need at least one draft")
    if not (0 <= request.b <= request.length):
        raise ValueError("beam prefix length must lie in [0, length]")


def beam_prefixes(
    model: GeneratorModel,
    context: Sequence[int],
    depth: int,
    count: int,
    pop_budget: int = _BEAM_POP_BUDGET,
) -> tuple[list[tuple], bool]:
    """The ``count`` most probable length-``depth`` continuations.

    Exact best-first search: extension never increases a path's
    probability, so the first ``count`` depth-``depth`` nodes popped off
    the heap are the global maxima.  Ties break toward lexicographically
    smaller token sequences via the heap's tuple ordering.  Returns the
    prefixes with a flag telling whether the list is complete.
    """
    if depth == 0:
        return [()], True
    root_state = context_state(model, context)
    # heap entries: (cumulative -log p, prefix tokens, context state)
    heap: list[tuple[float, tuple, int]] = [(0.0, (), root_state)]
    results: list[tuple] = []
    dists: dict[int, np.ndarray] = {}
    pops = 0
    while heap and len(results) < count and pops < pop_budget:
        cost, prefix, state = heapq.heappop(heap)
        pops += 1
        if len(prefix) == depth:
            results.append(prefix)
            continue
        probs = dists.get(state)
        if probs is None:
            probs = dists[state] = _distribution_for_state(model, state)
        for tok in np.flatnonzero(probs > 0.0):
            tok = int(tok)
            child = (cost - math.log(probs[tok]), prefix + (tok,),
                     _advance_state(model, state, tok))
            heapq.heappush(heap, child)
    return results, len(results) >= count


def _sample_path(
    model: GeneratorModel,
    state: int,
    seed: int,
    start: int,
    out: np.ndarray,
    cdfs: dict[int, np.ndarray],
) -> None:
    # one ancestral draft; counter t is the absolute position in the draft
    for t in range(start, out.shape[0]):
        cdf = cdfs.get(state)
        if cdf is None:
            cdf = np.cumsum(_distribution_for_state(model, state))
            cdf /= cdf[-1]
            cdfs[state] = cdf
        u = backend.uniform_for_counter(seed, t)
        tok = int(np.searchsorted(cdf, u, side="right"))
        out[t] = tok
        state = _advance_state(model, state, tok)


def sample_drafts(model: GeneratorModel, request: DraftRequest) -> DraftBatch:
    """n drafts of the requested length, i.i.d. given the context.

    With ``b > 0`` the first b tokens of draft k are the k-th best beam
    prefix instead; the rest is sampled ancestrally.  Draft k draws from
    its own derived stream, so batches are reproducible and independent
    of evaluation order.
    """
    _validate_request(request)
    n, length, b = request.n, request.length, request.b
    tokens = np.empty((n, length), dtype=np.int32)
    fallback = False

    prefixes: list[tuple] = [()] * n
    if b > 0:
        found, complete = beam_prefixes(model, request.context, b, n)
        fallback = not complete
        prefixes = found + [None] * (n - len(found))

    seeds = [draft_stream_seed(request.rng_seed, k) for k in range(n)]
    root_state = context_state(model, request.context)

    if model.order == 0 and all(p == () for p in prefixes):
        # i.i.d. fast path: one cdf, one vectorized block of uniforms
        cdf = np.cumsum(_distribution_for_state(model, 0))
        cdf /= cdf[-1]
        counters = np.arange(length, dtype=np.uint64)
        for k in range(n):
            u = uniform_block(seeds[k], counters)
            tokens[k] = np.searchsorted(cdf, u, side="right").astype(np.int32)
        return DraftBatch(tokens, fallback)

    cdfs: dict[int, np.ndarray] = {}
    for k in range(n):
        prefix = prefixes[k]
        if prefix is None:
            # beam shortfall: sample the prefix region too, duplicates allowed
            _sample_path(model, root_state, seeds[k], 0, tokens[k], cdfs)
            continue
        state = root_state
        for j, tok in enumerate(prefix):
            tokens[k, j] = tok
            state = _advance_state(model, state, tok)
        _sample_path(model, state, seeds[k], len(prefix), tokens[k], cdfs)
    return DraftBatch(tokens, fallback)


def entropy_profile(
    model: GeneratorModel, context: Sequence[int], horizon: int
) -> np.ndarray:
    """Shannon entropy (nats) of next_distribution along the greedy path."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    state = context_state(model, context)
    out = np.empty(horizon, dtype=np.float64)
    for i in range(horizon):
        probs = _distribution_for_state(model, state)
        live = probs[probs > 0.0]
        out[i] = float(-(live * np.log(live)).sum())
        state = _advance_state(model, state, int(np.argmax(probs)))
    return out
