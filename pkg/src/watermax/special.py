"""Scalar special functions backing p-values, thresholds and closed-form power.

Regularized incomplete gamma (both tails) with its inverse, the regularized
incomplete beta, the standard normal CDF and its inverse. Everything is plain
double-precision stdlib math: series and continued fractions are scaled
through lgamma so the tails stay accurate down to the underflow floor, and
the inverse normal is the AS241 rational approximation (error well below
1e-9 over [1e-12, 1 - 1e-12], in practice near machine precision).
"""

from __future__ import annotations

import math

__all__ = [
    "betainc",
    "gammainc_p",
    "gammainc_q",
    "inv_gammainc_p",
    "ndtri",
    "normal_cdf",
]

_EPS = 1.0e-15
_FPMIN = 1.0e-300
_MAX_ITER = 500
_SQRT2 = math.sqrt(2.0)


def normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc, accurate in both tails."""
    return 0.5 * math.erfc(-x / _SQRT2)


# ----------------------------------------------------------------------
# AS241: rational approximations for the inverse standard normal CDF.
# Three branches: central |p - 0.5| <= 0.425, then sqrt(-log(tail)) in
# (1.6, 5] and (5, ...). Coefficients are the published PPND16 set.
# The compiled backend carries a C transcription of this exact function;
# keep operation order in sync so the two stay bit-identical.
# ----------------------------------------------------------------------

def ndtri(p: float) -> float:
    """Inverse standard normal CDF. p=0 or 1 map to -inf/+inf."""
    if math.isnan(p) or p < 0.0 or p > 1.0:
        raise ValueError(f"probability out of range: {p!r}")
    if p == 0.0:
        return -math.inf
    if p == 1.0:
        return math.inf
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r
                    + 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r
                  + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r
                + 1.3314166789178437745e+2) * r + 3.3871328727963666080e+0)
        den = (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r
                    + 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r
                  + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r
                + 4.2313330701600911252e+1) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r
                  + 3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r
                + 4.63033784615654529590e+0) * r + 1.42343711074968357734e+0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r
                + 2.05319162663775882187e+0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r
                + 5.46378491116411436990e+0) * r + 6.65790464350110377720e+0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


# ----------------------------------------------------------------------
# Regularized incomplete gamma. Series for x < a+1, continued fraction
# otherwise; each evaluates the tail that converges fast and the other
# tail is one subtraction away.
# ----------------------------------------------------------------------

def _gamma_series(a: float, x: float) -> float:
    # lower tail P(a, x) by power series, for x < a + 1
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a: float, x: float) -> float:
    # upper tail Q(a, x) by modified Lentz continued fraction, x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gammainc_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError(f"shape must be positive: {a!r}")
    if x < 0.0:
        raise ValueError(f"argument must be non-negative: {x!r}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x)."""
    if a <= 0.0:
        raise ValueError(f"shape must be positive: {a!r}")
    if x < 0.0:
        raise ValueError(f"argument must be non-negative: {x!r}")
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


def inv_gammainc_p(a: float, p: float) -> float:
    """Solve P(a, x) = p for x >= 0.

    Bracketed Newton iteration started from the Wilson-Hilferty cube (or the
    small-x expansion when that lands poorly); the residual |P(a, x) - p| is
    driven below 1e-13.
    """
    if a <= 0.0:
        raise ValueError(f"shape must be positive: {a!r}")
    if p < 0.0 or p > 1.0:
        raise ValueError(f"probability out of range: {p!r}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return math.inf

    # initial guess
    if p < 1e-3:
        # P(a, x) ~ x^a / Gamma(a+1) near zero
        x = math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)
    else:
        z = ndtri(p)
        t = 1.0 - 1.0 / (9.0 * a) + z * math.sqrt(1.0 / (9.0 * a))
        x = a * t * t * t
    if x <= 0.0 or not math.isfinite(x):
        x = a * p  # crude but inside the bracket

    lo, hi = 0.0, math.inf
    for _ in range(200):
        f = gammainc_p(a, x) - p
        if f > 0.0:
            hi = x
        else:
            lo = x
        # relative residual: the evaluation itself is good to ~1e-15 of p
        if abs(f) <= 1e-13 * p:
            break
        # derivative of P in x
        dlog = -x + (a - 1.0) * math.log(x) - math.lgamma(a)
        deriv = math.exp(dlog)
        step_ok = deriv > 0.0 and math.isfinite(deriv)
        if step_ok:
            x_new = x - f / deriv
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi) if math.isfinite(hi) else x * 2.0
        if x_new == x:
            break
        x = x_new
    return x


# ----------------------------------------------------------------------
# Regularized incomplete beta, continued fraction form.
# ----------------------------------------------------------------------

def _beta_cf(a: float, b: float, x: float) -> float:
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if a <= 0.0 or b <= 0.0:
        raise ValueError(f"shape parameters must be positive: {a!r}, {b!r}")
    if x <= 0.0:
        if x < 0.0:
            raise ValueError(f"argument out of range: {x!r}")
        return 0.0
    if x >= 1.0:
        if x > 1.0:
            raise ValueError(f"argument out of range: {x!r}")
        return 1.0
    front = math.exp(math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                     + a * math.log(x) + b * math.log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b
