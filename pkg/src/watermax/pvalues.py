"""Per-scheme p-values for cumulative scores.

Each scheme turns a summed token score s over Leff contributing windows into
the probability of a score at least as large under the null (unwatermarked)
law. An empty score (Leff = 0) carries no evidence: its p-value is 1.0 and
the result is flagged so callers can surface the degenerate case.

gaussian   s ~ N(0, Leff)           p = Phi(-s / sqrt(Leff))
kgw        s ~ Bin(Leff, gamma)     p = P[Bin >= s] = I_gamma(s, Leff - s + 1)
aaronson   s ~ Gamma(Leff, 1)       p = Q(Leff, s)
"""

from __future__ import annotations

import math
from typing import NamedTuple, Union

from .special import betainc, gammainc_q, normal_cdf

__all__ = [
    "PValue",
    "SCHEME_CODES",
    "SCHEME_NAMES",
    "normalize_scheme",
    "pvalue",
    "pvalue_aaronson",
    "pvalue_gaussian",
    "pvalue_kgw",
]

# codes shared with the scoring kernels
SCHEME_CODES = {"gaussian": 0, "kgw": 1, "aaronson": 2}
SCHEME_NAMES = {code: name for name, code in SCHEME_CODES.items()}


class PValue(NamedTuple):
    p: float
    flagged_empty: bool


def normalize_scheme(scheme: Union[str, int]) -> int:
    """Map a scheme name or code to the kernel scheme code."""
    if isinstance(scheme, str):
        try:
            return SCHEME_CODES[scheme]
        except KeyError:
            raise ValueError(f"unknown scheme: {scheme!r}") from None
    if scheme in SCHEME_NAMES:
        return int(scheme)
    raise ValueError(f"unknown scheme: {scheme!r}")


def pvalue_gaussian(score: float, leff: int) -> PValue:
    """P[N(0, Leff) >= score]."""
    if leff < 0:
        raise ValueError(f"effective length must be >= 0: {leff!r}")
    if leff == 0:
        return PValue(1.0, True)
    return PValue(normal_cdf(-score / math.sqrt(leff)), False)


def pvalue_kgw(score: float, leff: int, gamma: float = 0.5) -> PValue:
    """P[Bin(Leff, gamma) >= score]; score must be an integer in [0, Leff]."""
    if leff < 0:
        raise ValueError(f"effective length must be >= 0: {leff!r}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1): {gamma!r}")
    if leff == 0:
        return PValue(1.0, True)
    s = round(score)
    if abs(score - s) > 1e-9:
        raise ValueError(f"kgw score must be integral: {score!r}")
    if s < 0 or s > leff:
        raise ValueError(f"kgw score out of range [0, {leff}]: {s}")
    if s == 0:
        return PValue(1.0, False)
    return PValue(betainc(s, leff - s + 1, gamma), False)


def pvalue_aaronson(score: float, leff: int) -> PValue:
    """P[Gamma(Leff, 1) >= score]; score must be >= 0."""
    if leff < 0:
        raise ValueError(f"effective length must be >= 0: {leff!r}")
    if leff == 0:
        return PValue(1.0, True)
    if score < 0.0:
        raise ValueError(f"aaronson score must be >= 0: {score!r}")
    return PValue(gammainc_q(leff, score), False)


def pvalue(scheme: Union[str, int], score: float, leff: int,
           gamma: float = 0.5) -> PValue:
    """Dispatch to the scheme's p-value."""
    code = normalize_scheme(scheme)
    if code == 0:
        return pvalue_gaussian(score, leff)
    if code == 1:
        return pvalue_kgw(score, leff, gamma)
    return pvalue_aaronson(score, leff)
