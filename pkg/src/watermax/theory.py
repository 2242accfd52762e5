"""Closed-form detection powers and their supporting constants.

Ground truth the simulators are checked against: exact power laws for
the three detectors, Monte Carlo moments of the maximum of n standard
normals (cached to a data file), and the selection-distortion bounds
for best-of-n chunk selection.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from .special import gammainc_p, inv_gammainc_p, normal_cdf, ndtri

__all__ = [
    "MaxGaussConstants",
    "PowerQuery",
    "build_constants_table",
    "distortion_bounds",
    "gauss_max_moments",
    "max_gauss_constants",
    "power",
    "power_optimal",
    "power_robust",
    "power_simple",
    "selection_prob_with_replacement_bruteforce",
    "selection_prob_without_replacement",
]

CONSTANTS_PATH = Path(__file__).parent / "data" / "max_gauss_constants.json"

_MC_CHUNK = 1 << 18
_TABLE: Optional[Dict[int, Tuple[float, float]]] = None


def _check_pfa(pfa: float) -> None:
    if not (0.0 < pfa < 1.0):
        raise ValueError("pfa must lie strictly inside (0, 1)")


def _check_count(value: int, name: str) -> None:
    if value != int(value) or value < 1:
        raise ValueError(f"{name} must be a positive integer")


@dataclass(frozen=True)
class MaxGaussConstants:
    """Moments of max(Z_1..Z_n) for i.i.d. standard normals."""

    n: int
    e: float
    v: float
    se_e: float
    se_v: float
    samples: int


def max_gauss_constants(n: int, samples: int,
                        seed: Optional[int] = None) -> MaxGaussConstants:
    """Monte Carlo estimate of e(n), v(n) from antithetic normal pairs.

    `samples` counts realizations of the maximum; each antithetic pair
    contributes two. The pairing makes e(1) exactly zero and cancels the
    odd error terms for larger n.
    """
    _check_count(n, "n")
    if samples < 2:
        raise ValueError("samples must be at least 2")
    rng = np.random.default_rng([0xE57 if seed is None else seed, n])
    pairs = samples // 2
    total = 2 * pairs
    s1 = s2 = s3 = s4 = 0.0
    pm1 = pm2 = 0.0  # pair-mean moments, for the standard error of e
    done = 0
    while done < pairs:
        rows = min(_MC_CHUNK, pairs - done)
        z = rng.standard_normal((rows, n))
        hi = z.max(axis=1)
        lo = (-z).max(axis=1)
        for x in (hi, lo):
            s1 += x.sum()
            s2 += (x * x).sum()
            s3 += (x ** 3).sum()
            s4 += (x ** 4).sum()
        mean_pair = 0.5 * (hi + lo)
        pm1 += mean_pair.sum()
        pm2 += (mean_pair * mean_pair).sum()
        done += rows
    e = s1 / total
    # central moments from raw power sums
    m2 = s2 / total - e * e
    m4 = (s4 - 4 * e * s3 + 6 * e * e * s2) / total - 3 * e ** 4
    v = m2 * total / (total - 1)
    pair_var = max(pm2 / pairs - (pm1 / pairs) ** 2, 0.0)
    se_e = math.sqrt(pair_var / pairs)
    se_v = math.sqrt(max(m4 - m2 * m2, 0.0) / total)
    return MaxGaussConstants(n, e, v, se_e, se_v, total)


def build_constants_table(path: Path = CONSTANTS_PATH, n_max: int = 32,
                          samples: int = 10 ** 7) -> None:
    """Regenerate the cached e(n)/v(n) table shipped with the package."""
    # n = 1 is the standard normal itself: moments are analytic
    entries = {"1": {"e": 0.0, "v": 1.0, "se_e": 0.0, "se_v": 0.0}}
    for n in range(2, n_max + 1):
        c = max_gauss_constants(n, samples)
        entries[str(n)] = {"e": c.e, "v": c.v, "se_e": c.se_e,
                           "se_v": c.se_v}
    payload = {
        "samples": samples,
        "antithetic": True,
        "seed_scheme": "default_rng([0xE57, n])",
        "entries": entries,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1))


def gauss_max_moments(n: int) -> Tuple[float, float]:
    """(e(n), v(n)) from the cached table; computed on the fly past it."""
    global _TABLE
    _check_count(n, "n")
    if _TABLE is None:
        raw = json.loads(CONSTANTS_PATH.read_text())
        _TABLE = {int(k): (row["e"], row["v"])
                  for k, row in raw["entries"].items()}
    if n in _TABLE:
        return _TABLE[n]
    c = max_gauss_constants(n, 2 * 10 ** 6)
    _TABLE[n] = (c.e, c.v)
    return _TABLE[n]


def power_simple(n: int, pfa: float) -> float:
    """Detection power of the single-test scheme: 1 - (1 - pfa)^n."""
    _check_count(n, "n")
    _check_pfa(pfa)
    return -math.expm1(n * math.log1p(-pfa))


def power_optimal(chunks: int, n: int, pfa: float) -> float:
    """Power of the chunk-grid aggregate test at its exact threshold."""
    _check_count(chunks, "chunks")
    _check_count(n, "n")
    _check_pfa(pfa)
    return gammainc_p(chunks, n * inv_gammainc_p(chunks, pfa))


def power_robust(chunks: int, n: int, pfa: float,
                 alpha: float = 1.0) -> float:
    """Approximate power of the score-sum test when a fraction alpha of
    the contributing scores survives an attack (alpha = 1: no attack).

    Gaussian approximation, accurate for large chunk counts.
    """
    _check_count(chunks, "chunks")
    _check_count(n, "n")
    _check_pfa(pfa)
    if not (0.0 <= alpha <= 1.0):
        raise ValueError("alpha must lie in [0, 1]")
    e, v = gauss_max_moments(n)
    shift = ndtri(pfa) + alpha * math.sqrt(chunks) * e
    if alpha == 1.0:
        return normal_cdf(shift / math.sqrt(v))
    return normal_cdf(shift / math.sqrt(1.0 + alpha * alpha * (v - 1.0)))


@dataclass(frozen=True)
class PowerQuery:
    """One point on a theoretical power curve."""

    detector: str
    n: int
    pfa: float
    chunks: int = 1
    alpha: float = 1.0


def power(query: PowerQuery) -> float:
    if query.detector == "simple":
        return power_simple(query.n, query.pfa)
    if query.detector == "optimal":
        return power_optimal(query.chunks, query.n, query.pfa)
    if query.detector == "robust":
        return power_robust(query.chunks, query.n, query.pfa, query.alpha)
    raise ValueError(f"unknown detector {query.detector!r}")


def distortion_bounds(p: float, n: int) -> Tuple[float, float]:
    """Bounds on the selection probability of a chunk of model
    probability p under best-of-n drafting with replacement."""
    _check_count(n, "n")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    if p == 1.0:
        return 1.0, 1.0
    ub = 0.5 * (1.0 - (1.0 - p) ** n + p ** n)
    lb = (1.0 - (1.0 - p) ** (n + 1) - p ** (n + 1)) / ((n + 1) * (1.0 - p))
    return lb, ub


def selection_prob_without_replacement(p: float, n: int) -> float:
    """Small-p selection probability when the n drafts are forced
    distinct: (1 - (1 - p)^n) / n."""
    _check_count(n, "n")
    if not (0.0 <= p <= 1.0):
        raise ValueError("p must lie in [0, 1]")
    return -math.expm1(n * math.log1p(-p)) / n if p < 1.0 else 1.0 / n


def selection_prob_with_replacement_bruteforce(
        probs: Sequence[float], n: int) -> np.ndarray:
    """Exact selection probabilities by enumerating every multinomial
    outcome of n draws: the winner is uniform over the distinct drafts.

    Small instances only; the count of outcomes grows combinatorially.
    """
    _check_count(n, "n")
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1 or p.size > 8 or n > 6:
        raise ValueError("enumeration limited to <= 8 chunks and n <= 6")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("probs must be a distribution")
    out = np.zeros(p.size)
    logp = np.log(p, out=np.full(p.size, -np.inf), where=p > 0)
    lognfac = math.lgamma(n + 1)

    def walk(i: int, left: int, loglik: float, support: list) -> None:
        if i == p.size - 1:
            if left > 0 and logp[i] == -np.inf:
                return
            if left > 0:
                loglik += left * logp[i] - math.lgamma(left + 1)
                support = support + [i]
            if not support:
                return
            w = math.exp(lognfac + loglik) / len(support)
            for j in support:
                out[j] += w
            return
        for k in range(left + 1):
            if k > 0 and logp[i] == -np.inf:
                break
            walk(i + 1, left - k,
                 loglik + (k * logp[i] - math.lgamma(k + 1) if k else 0.0),
                 support + [i] if k > 0 else support)

    walk(0, n, 0.0, [])
    return out
