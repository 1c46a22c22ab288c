"""Paired t-test with a self-contained Student-t distribution.

The two-sided p-value comes from the regularized incomplete beta function
(continued fraction, modified Lentz), and the CI critical value from
bisecting the own CDF. No external stats dependency in the engine; the
test suite checks both against an independent reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import LengthMismatchError

_MAX_ITER = 300
_EPS = 3e-16
_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, evaluated by Lentz's method."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
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
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    return h


def reg_inc_beta(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Use the expansion on whichever side converges fast.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student-t with df degrees of freedom."""
    if df <= 0:
        raise ValueError("df must be positive")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return reg_inc_beta(df / 2.0, 0.5, x)


def t_cdf(t: float, df: float) -> float:
    p = t_two_sided_p(abs(t), df)
    return 1.0 - p / 2.0 if t >= 0 else p / 2.0


def t_quantile(q: float, df: float) -> float:
    """Inverse CDF by bisection; adequate precision for CI bounds."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must be in (0, 1)")
    if q == 0.5:
        return 0.0
    if q < 0.5:
        return -t_quantile(1.0 - q, df)
    lo, hi = 0.0, 2.0
    while t_cdf(hi, df) < q:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if t_cdf(mid, df) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class TTestResult:
    n: int
    df: int
    mean_diff: float
    sd_diff: float
    t_stat: float
    p_value: float
    ci95: tuple[float, float]


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on matched samples.

    d = a - b; t = mean(d) / (sd(d)/sqrt(n)) with the n-1 sample sd. A fully
    degenerate d (all zeros) is reported as t = 0, p = 1 by convention; a
    non-zero constant d gives an infinite t and p = 0.
    """
    if len(a) != len(b):
        raise LengthMismatchError(f"paired samples differ: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two pairs")
    d = [float(x) - float(y) for x, y in zip(a, b)]
    mean_d = sum(d) / n
    var_d = sum((x - mean_d) ** 2 for x in d) / (n - 1)
    sd_d = math.sqrt(var_d)
    df = n - 1
    if sd_d == 0.0:
        if mean_d == 0.0:
            return TTestResult(n, df, 0.0, 0.0, 0.0, 1.0, (0.0, 0.0))
        t = math.inf if mean_d > 0 else -math.inf
        return TTestResult(n, df, mean_d, 0.0, t, 0.0, (mean_d, mean_d))
    se = sd_d / math.sqrt(n)
    t = mean_d / se
    p = t_two_sided_p(t, df)
    crit = t_quantile(0.975, df)
    ci = (mean_d - crit * se, mean_d + crit * se)
    return TTestResult(n, df, mean_d, sd_d, t, p, ci)
