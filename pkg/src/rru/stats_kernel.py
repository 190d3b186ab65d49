"""Scalar statistics primitives used by the diagnostics.

Everything here is implemented from first principles (no scipy) so that the
numbers are reproducible bit-for-bit across environments:

* ``normal_cdf`` uses the complementary error function from :mod:`math`,
  ``Phi(x) = erfc(-x / sqrt(2)) / 2``, which keeps full relative accuracy in
  the lower tail (absolute error well under 1e-15).
* ``normal_quantile`` inverts ``normal_cdf`` by safeguarded Newton iteration
  inside a shrinking bracket.
* ``beta_cdf`` and ``gamma_upper_regularized`` use the classical
  series / modified-Lentz continued-fraction pair, switching representation
  where each converges fastest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .errors import UsageError

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000


def normal_cdf(x: float) -> float:
    """Standard normal distribution function."""
    return 0.5 * math.erfc(-x / _SQRT2)


def normal_pdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


def normal_quantile(p: float) -> float:
    """Inverse of :func:`normal_cdf` for ``0 < p < 1``."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"normal_quantile requires 0 < p < 1, got {p!r}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # 1 - p is exact here, and the lower tail of erfc keeps full relative precision
        return -normal_quantile(1.0 - p)
    lo, hi = -40.0, 40.0
    x = 0.0
    for _ in range(200):
        f = normal_cdf(x) - p
        if f > 0.0:
            hi = x
        else:
            lo = x
        d = normal_pdf(x)
        step = f / d if d > 0.0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-14 * max(1.0, abs(x_new)):
            return x_new
        x = x_new
    return x


def _betacf(x: float, a: float, b: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h


def beta_cdf(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if not (a > 0.0 and b > 0.0):
        raise ValueError(f"beta_cdf requires a > 0 and b > 0, got a={a!r}, b={b!r}")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"beta_cdf requires 0 <= x <= 1, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(x, a, b) / a
    return 1.0 - front * _betacf(1.0 - x, b, a) / b


def gamma_upper_regularized(s: float, x: float) -> float:
    """Upper regularized incomplete gamma ``Q(s, x) = Gamma(s, x) / Gamma(s)``."""
    if not s > 0.0:
        raise ValueError(f"gamma_upper_regularized requires s > 0, got {s!r}")
    if not x >= 0.0:
        raise ValueError(f"gamma_upper_regularized requires x >= 0, got {x!r}")
    if x == 0.0:
        return 1.0
    log_front = -x + s * math.log(x) - math.lgamma(s)
    if x < s + 1.0:
        # series for the lower function P
        ap = s
        term = 1.0 / s
        total = term
        for _ in range(_MAX_ITER):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _EPS:
                break
        return max(0.0, 1.0 - total * math.exp(log_front))
    # continued fraction for Q
    b = x + 1.0 - s
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return math.exp(log_front) * h


def chi2_sf(stat: float, df: int) -> float:
    """Chi-square survival function via ``Q(df/2, stat/2)``."""
    return gamma_upper_regularized(0.5 * df, 0.5 * stat)


@dataclass(frozen=True)
class EcdfSample:
    values: np.ndarray
    size: int

    @classmethod
    def from_values(cls, xs: Iterable[float]) -> "EcdfSample":
        arr = np.sort(np.asarray(list(xs) if not isinstance(xs, np.ndarray) else xs, dtype=float))
        if arr.size == 0:
            raise UsageError("an ECDF needs at least one observation")
        return cls(arr, int(arr.size))


@dataclass(frozen=True)
class GofResult:
    statistic: float
    p_value: float
    sample_size: int

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "sample_size": self.sample_size}


def ks_statistic(
    sample,
    cdf: Callable[[float], float],
    cdf_left: Optional[Callable[[float], float]] = None,
) -> float:
    """One-sample Kolmogorov distance between a sample and ``cdf``.

    ``D = max_i max(i/n - F(x_i), F(x_i-) - (i-1)/n)`` over the sorted sample.
    ``cdf_left`` gives the left limit ``F(x-)``; it defaults to ``cdf`` (the
    continuous case) and must be supplied for distributions with atoms.
    """
    if not isinstance(sample, EcdfSample):
        sample = EcdfSample.from_values(sample)
    xs = sample.values
    n = sample.size
    # evaluate the CDF once per distinct value; discrete samples are mostly ties
    uniq, inv = np.unique(xs, return_inverse=True)
    f_right = np.array([cdf(float(v)) for v in uniq])[inv]
    f_left = f_right if cdf_left is None else np.array([cdf_left(float(v)) for v in uniq])[inv]
    i = np.arange(1, n + 1, dtype=float)
    d_plus = np.max(i / n - f_right)
    d_minus = np.max(f_left - (i - 1.0) / n)
    return float(min(1.0, max(0.0, d_plus, d_minus)))


def ks_pvalue(d: float, n: int) -> float:
    """Asymptotic Kolmogorov tail probability ``Q(sqrt(n) * D)``."""
    if n < 1:
        raise UsageError("ks_pvalue needs n >= 1")
    t = math.sqrt(n) * d
    if t <= 0.0:
        return 1.0
    if t < 1.0:
        # theta-function form; converges fast where the alternating series does not
        s = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8.0 * t * t))
            s += term
            if term < 1e-12:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / t * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * t * t)
        s += term if k % 2 == 1 else -term
        if term < 1e-12:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_test(sample, cdf, cdf_left=None) -> GofResult:
    if not isinstance(sample, EcdfSample):
        sample = EcdfSample.from_values(sample)
    d = ks_statistic(sample, cdf, cdf_left)
    return GofResult(d, ks_pvalue(d, sample.size), sample.size)


def pearson_corr(xs, ys) -> float:
    """Sample Pearson correlation; ``nan`` marks a zero-variance input."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise UsageError("pearson_corr needs two equal-length samples of size >= 2")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        return math.nan
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))
