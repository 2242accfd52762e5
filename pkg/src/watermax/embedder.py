"""Watermark embedding by repeated draft selection.

The text is built in ``chunks`` iterations.  Every iteration extends each
surviving candidate with ``drafts`` independently sampled chunks, scores
the extended texts with the keyed scoring session, and keeps the
``beam_width`` candidates whose cumulative p-values are smallest.  With a
beam of one this is the greedy low-latency mode; with one chunk and a
beam of one it degenerates to picking the best of n whole texts.

Draft streams are derived from the master seed, the iteration index, and
the candidate's tokens, so two candidates that carry identical text see
identical continuations and the search is a deterministic function of
(model, prompt, params, key, seed) regardless of evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .generator import DraftRequest, GeneratorModel, sample_drafts
from .pvalues import PValue, normalize_scheme, pvalue
from .scoring import DEFAULT_WINDOW, ScoringSession, SecretKey
from .seeds import chunk_stream_seed


@dataclass(frozen=True)
class EmbedParams:
    """Knobs of the iterative embedder.

    ``chunks``/``drafts``/``beam_width`` are the N/n/m of the search;
    ``chunk_len`` tokens are added per iteration, the first
    ``beam_tokens`` of them via deterministic beam search instead of
    sampling.  ``window`` and ``scheme`` configure scoring.
    """

    chunks: int
    drafts: int
    chunk_len: int
    beam_width: int = 1
    beam_tokens: int = 0
    window: int = DEFAULT_WINDOW
    scheme: Union[str, int] = "gaussian"
    kgw_gamma: float = 0.5

    def __post_init__(self) -> None:
        if self.chunks < 1:
            raise ValueError("need at least one chunk")
        if self.drafts < 1:
            raise ValueError("need at least one draft per candidate")
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")
        if self.chunk_len < 1:
            raise ValueError("chunk length must be >= 1")
        if not (0 <= self.beam_tokens <= self.chunk_len):
            raise ValueError("beam_tokens must lie in [0, chunk_len]")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        normalize_scheme(self.scheme)

    @classmethod
    def for_budget(cls, chunks: int, total_length: int, **kwargs) -> "EmbedParams":
        """Fixed chunk length ceil(total_length / chunks)."""
        if total_length < 1:
            raise ValueError("total_length must be >= 1")
        return cls(chunks=chunks, chunk_len=-(-total_length // chunks), **kwargs)


@dataclass(frozen=True)
class ChunkCandidate:
    """One beam entry: generated tokens plus the scoring state over them."""

    text: tuple
    score: float
    pvalue: PValue
    session: ScoringSession


def _chunk_lengths(params: EmbedParams, total_length: Optional[int]) -> list[int]:
    if total_length is None:
        return [params.chunk_len] * params.chunks
    n, l = params.chunks, params.chunk_len
    if not ((n - 1) * l < total_length <= n * l):
        raise ValueError(
            f"total_length {total_length} not reachable with {n} chunks of {l}")
    return [l] * (n - 1) + [total_length - (n - 1) * l]


def embed(
    model: GeneratorModel,
    prompt: Sequence[int],
    params: EmbedParams,
    key: Union[SecretKey, bytes],
    rng_seed: int,
    total_length: Optional[int] = None,
) -> tuple[np.ndarray, list[dict]]:
    """Generate a watermarked text and the per-iteration selection trace.

    Selection always minimizes the cumulative p-value of the extended
    text, which for a beam of one and a fixed contributing length is the
    same as maximizing the chunk's score increment.  Ties break toward
    the earliest (candidate, draft) pair.  The prompt conditions the
    generator but is never scored: detection sees the bare output.
    """
    lengths = _chunk_lengths(params, total_length)
    scheme = normalize_scheme(params.scheme)
    prompt = tuple(int(t) for t in prompt)
    root = ChunkCandidate(
        text=(),
        score=0.0,
        pvalue=PValue(1.0, True),
        session=ScoringSession(key, scheme, params.window, params.kgw_gamma),
    )
    beam = [root]
    trace: list[dict] = []

    for it, chunk_len in enumerate(lengths):
        pool: list[ChunkCandidate] = []
        records: list[dict] = []
        fallback = False
        for ci, cand in enumerate(beam):
            request = DraftRequest(
                context=prompt + cand.text,
                length=chunk_len,
                n=params.drafts,
                b=min(params.beam_tokens, chunk_len),
                rng_seed=chunk_stream_seed(rng_seed, it, cand.text),
            )
            batch = sample_drafts(model, request)
            fallback = fallback or batch.beam_fallback
            for di in range(params.drafts):
                draft = batch.tokens[di]
                sess = cand.session.copy()
                sess.feed(draft)
                d_score = sess.score - cand.score
                d_leff = sess.effective_length - cand.session.effective_length
                local = pvalue(scheme, d_score, d_leff, params.kgw_gamma)
                cum = sess.pvalue()
                pool.append(ChunkCandidate(
                    text=cand.text + tuple(int(t) for t in draft),
                    score=sess.score,
                    pvalue=cum,
                    session=sess,
                ))
                records.append({
                    "parent": ci,
                    "draft": di,
                    "score": sess.score,
                    "leff": sess.effective_length,
                    "pvalue": cum.p,
                    "flagged": cum.flagged_empty,
                    "local_pvalue": local.p,
                    "local_leff": d_leff,
                    "local_flagged": local.flagged_empty,
                })

        order = sorted(range(len(pool)), key=lambda k: (pool[k].pvalue.p, k))
        kept = order[: params.beam_width]
        beam = [pool[k] for k in kept]
        trace.append({
            "iteration": it,
            "chunk_len": chunk_len,
            "beam_fallback": fallback,
            "flagged_empty": all(r["local_flagged"] for r in records),
            "pool": records,
            "kept": kept,
        })

    best = beam[0]
    return np.asarray(best.text, dtype=np.int32), trace


def embed_simple(
    model: GeneratorModel,
    prompt: Sequence[int],
    n: int,
    key: Union[SecretKey, bytes],
    length: int,
    scheme: Union[str, int] = "gaussian",
    rng_seed: int = 0,
    window: int = DEFAULT_WINDOW,
    kgw_gamma: float = 0.5,
) -> np.ndarray:
    """Best of ``n`` whole texts by p-value: one chunk, beam of one."""
    params = EmbedParams(
        chunks=1,
        drafts=n,
        chunk_len=length,
        beam_width=1,
        beam_tokens=0,
        window=window,
        scheme=scheme,
        kgw_gamma=kgw_gamma,
    )
    text, _ = embed(model, prompt, params, key, rng_seed)
    return text
