"""Hypothesis tests for the keyed watermark.

Three detectors, all calibrated exactly from a target false-alarm rate:

* simple: the whole-text p-value against P_FA; best-of-n embedding gives
  it power 1-(1-P_FA)^n.
* optimal: per-chunk incremental p-values aggregated as
  -sum log(1-p_i), Gamma(N,1) under H0; needs the exact chunk grid, so
  any length mismatch is a hard desynchronization error.
* robust: the plain sum of token score variables, grid-free, invariant
  to reordering of the contributing tokens; survives insertions because
  score variables travel with their h-gram content, not their position.

Decisions use strict comparisons; for the discrete binary scheme this
keeps the false-alarm rate at or below nominal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .backend import SCHEME_AARONSON, SCHEME_GAUSSIAN
from .pvalues import SCHEME_NAMES, normalize_scheme, pvalue, pvalue_kgw
from .scoring import DEFAULT_WINDOW, ScoringSession, SecretKey
from .special import gammainc_p, inv_gammainc_p, ndtri


class DesyncError(ValueError):
    """Text length does not fit the detector's chunk grid."""


class ChunkPVals(NamedTuple):
    """Local p-values per chunk; flagged entries are exactly 1."""

    p: np.ndarray
    empty_flags: np.ndarray


@dataclass(frozen=True)
class DetectionReport:
    detector: str
    statistic: float
    pvalue: float
    threshold: float
    decision: bool
    flagged_empty: bool
    params: dict = field(default_factory=dict)
    chunks: Optional[ChunkPVals] = None


def _check_pfa(pfa: float) -> None:
    if not (0.0 < pfa < 1.0):
        raise ValueError("P_FA must lie strictly inside (0, 1)")


def _scored_session(text, key, scheme, window, kgw_gamma) -> ScoringSession:
    sess = ScoringSession(key, scheme, window, kgw_gamma)
    sess.feed(np.asarray(text, dtype=np.int32))
    return sess


def detect_simple(
    text,
    key: Union[SecretKey, bytes],
    scheme: Union[str, int] = "gaussian",
    window: int = DEFAULT_WINDOW,
    pfa: float = 1e-3,
    kgw_gamma: float = 0.5,
) -> DetectionReport:
    """Whole-text p-value against P_FA (strictly below detects)."""
    _check_pfa(pfa)
    sess = _scored_session(text, key, scheme, window, kgw_gamma)
    p = sess.pvalue()
    return DetectionReport(
        detector="simple",
        statistic=sess.score,
        pvalue=p.p,
        threshold=pfa,
        decision=bool(p.p < pfa),
        flagged_empty=p.flagged_empty,
        params={
            "length": int(len(text)),
            "leff": sess.effective_length,
            "window": window,
            "scheme": SCHEME_NAMES[normalize_scheme(scheme)],
            "pfa": pfa,
        },
    )


def chunk_pvalues(
    text,
    key: Union[SecretKey, bytes],
    scheme: Union[str, int] = "gaussian",
    window: int = DEFAULT_WINDOW,
    chunks: int = 1,
    chunk_len: int = 1,
    kgw_gamma: float = 0.5,
) -> ChunkPVals:
    """Local p-values on the (chunks, chunk_len) grid, one dedup session
    across the whole text.  The final chunk may be short, but the text
    must land inside the grid: anything else signals desynchronization."""
    tokens = np.asarray(text, dtype=np.int32)
    n, l = chunks, chunk_len
    if n < 1 or l < 1:
        raise ValueError("grid needs chunks >= 1 and chunk_len >= 1")
    if not ((n - 1) * l < tokens.shape[0] <= n * l):
        raise DesyncError(
            f"text of {tokens.shape[0]} tokens desynchronized from grid of "
            f"{n} chunks x {l} tokens")
    scheme_code = normalize_scheme(scheme)
    sess = ScoringSession(key, scheme_code, window, kgw_gamma)
    ps = np.empty(n, dtype=np.float64)
    flags = np.empty(n, dtype=bool)
    prev_score, prev_leff = 0.0, 0
    for i in range(n):
        sess.feed(tokens[i * l: min((i + 1) * l, tokens.shape[0])])
        local = pvalue(scheme_code, sess.score - prev_score,
                       sess.effective_length - prev_leff, kgw_gamma)
        ps[i], flags[i] = local.p, local.flagged_empty
        prev_score, prev_leff = sess.score, sess.effective_length
    return ChunkPVals(ps, flags)


def _aggregate_log(ps: np.ndarray) -> float:
    lam = 0.0
    for p in ps:
        if p >= 1.0:
            return math.inf
        lam -= math.log1p(-p)
    return lam


def detect_optimal(
    text,
    key: Union[SecretKey, bytes],
    scheme: Union[str, int] = "gaussian",
    window: int = DEFAULT_WINDOW,
    chunks: int = 1,
    chunk_len: int = 1,
    pfa: float = 1e-3,
    kgw_gamma: float = 0.5,
) -> DetectionReport:
    """Chunk-wise aggregation: the statistic is Gamma(chunks, 1) under H0
    and concentrates near zero under H1, so small values detect."""
    _check_pfa(pfa)
    local = chunk_pvalues(text, key, scheme, window, chunks, chunk_len,
                          kgw_gamma)
    lam = _aggregate_log(local.p)
    tau = inv_gammainc_p(chunks, pfa)
    pv = 1.0 if math.isinf(lam) else gammainc_p(chunks, lam)
    return DetectionReport(
        detector="optimal",
        statistic=lam,
        pvalue=pv,
        threshold=tau,
        decision=bool(lam < tau),
        flagged_empty=bool(local.empty_flags.all()),
        params={
            "length": int(len(text)),
            "window": window,
            "scheme": SCHEME_NAMES[normalize_scheme(scheme)],
            "chunks": chunks,
            "chunk_len": chunk_len,
            "pfa": pfa,
        },
        chunks=local,
    )


def _robust_threshold(scheme_code: int, leff: int, pfa: float,
                      kgw_gamma: float) -> float:
    if leff == 0:
        return 0.0
    if scheme_code == SCHEME_GAUSSIAN:
        return -math.sqrt(leff) * ndtri(pfa)
    if scheme_code == SCHEME_AARONSON:
        return inv_gammainc_p(leff, 1.0 - pfa)
    # binary scheme: smallest count c with P[Bin(leff, gamma) > c] <= pfa
    lo, hi = -1, leff
    while hi - lo > 1:
        mid = (lo + hi) // 2
        tail = pvalue_kgw(mid + 1, leff, kgw_gamma).p if mid < leff else 0.0
        if tail <= pfa:
            hi = mid
        else:
            lo = mid
    return float(hi)


def detect_robust(
    text,
    key: Union[SecretKey, bytes],
    scheme: Union[str, int] = "gaussian",
    window: int = DEFAULT_WINDOW,
    pfa: float = 1e-3,
    kgw_gamma: float = 0.5,
) -> DetectionReport:
    """Grid-free global score sum; exceeding the calibrated threshold
    detects.  Exact for the gaussian scheme; other schemes use their own
    H0 tail laws for the threshold."""
    _check_pfa(pfa)
    scheme_code = normalize_scheme(scheme)
    sess = _scored_session(text, key, scheme_code, window, kgw_gamma)
    leff = sess.effective_length
    stat = sess.score
    tau = _robust_threshold(scheme_code, leff, pfa, kgw_gamma)
    p = sess.pvalue()
    return DetectionReport(
        detector="robust",
        statistic=stat,
        pvalue=p.p,
        threshold=tau,
        decision=bool(leff > 0 and stat > tau),
        flagged_empty=p.flagged_empty,
        params={
            "length": int(len(text)),
            "leff": leff,
            "window": window,
            "scheme": SCHEME_NAMES[scheme_code],
            "pfa": pfa,
        },
    )


def calibrate_threshold(
    detector: str,
    pfa: float,
    chunks: Optional[int] = None,
    leff: Optional[int] = None,
    scheme: Union[str, int] = "gaussian",
    kgw_gamma: float = 0.5,
) -> float:
    """Exact decision threshold for a target false-alarm probability."""
    _check_pfa(pfa)
    if detector == "simple":
        return pfa
    if detector == "optimal":
        if chunks is None or chunks < 1:
            raise ValueError("optimal calibration needs chunks >= 1")
        return inv_gammainc_p(chunks, pfa)
    if detector == "robust":
        if leff is None or leff < 0:
            raise ValueError("robust calibration needs leff >= 0")
        return _robust_threshold(normalize_scheme(scheme), leff, pfa,
                                 kgw_gamma)
    raise ValueError(f"unknown detector {detector!r}")
