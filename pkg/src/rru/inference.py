"""Adaptive estimators, test statistics and rate diagnostics at a checkpoint.

All functions accept scalars or numpy arrays (one entry per replicate) and
mark an undefined statistic with ``nan``. Serialisers turn ``nan`` into an
absent field, so an undefined value is never reported as a number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import NamedTuple

import numpy as np

from . import stats_kernel as sk
from .errors import UsageError


class Snapshot(NamedTuple):
    """Urn accumulators at patient ``n``; fields may be arrays over replicates."""

    n: object
    n_B: object
    n_W: object
    black_mass: object
    white_mass: object
    sum_y_B: object
    sum_y_W: object
    sum_y2_B: object
    sum_y2_W: object

    @classmethod
    def from_acc(cls, n, acc) -> "Snapshot":
        acc = np.asarray(acc, dtype=float)
        cols = [acc[..., j] for j in range(8)]
        if acc.ndim == 1:
            cols = [float(c) for c in cols]
        return cls(n, *cols)


def _div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)
    return out if out.ndim else float(out)


def adaptive_means(state):
    """Per-arm sample means of the observed responses."""
    return _div(state.sum_y_B, state.n_B), _div(state.sum_y_W, state.n_W)


_EPS = np.finfo(float).eps


def _variance(s1, s2, count):
    mean = _div(s1, count)
    mean_sq = _div(s2, count)
    with np.errstate(invalid="ignore"):
        var = mean_sq - np.square(mean)
        # Streaming sums carry up to count * eps relative error in mean_sq, so
        # anything below that is cancellation noise (e.g. a constant arm), not spread.
        noise = np.asarray(count, dtype=float) * _EPS * np.abs(mean_sq)
        var = np.where(var > noise, var, np.where(np.isnan(var), np.nan, 0.0))
    return _scalar(var)


def adaptive_variances(state):
    """Per-arm variance estimates with divisor equal to the arm count."""
    return (
        _variance(state.sum_y_B, state.sum_y2_B, state.n_B),
        _variance(state.sum_y_W, state.sum_y2_W, state.n_W),
    )


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim else float(x)


def _se(var_b, var_w, n_b, n_w):
    with np.errstate(divide="ignore", invalid="ignore"):
        n_b = np.asarray(n_b, dtype=float)
        n_w = np.asarray(n_w, dtype=float)
        ok = (n_b > 0) & (n_w > 0)
        se = np.sqrt(np.asarray(var_b) / np.where(ok, n_b, 1.0) + np.asarray(var_w) / np.where(ok, n_w, 1.0))
        return np.where(ok, se, np.nan)


def zeta0(stats):
    """Two-sample statistic with plug-in variances and adaptive sample sizes."""
    se = _se(stats.var_B, stats.var_W, stats.n_B, stats.n_W)
    diff = np.asarray(stats.ybar_B, dtype=float) - np.asarray(stats.ybar_W, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.nan)
    return _scalar(out)


def zeta(stats, mu_B, mu_W, sigma_B, sigma_W):
    """Centred two-sample statistic standardised by the true variances."""
    if not (sigma_B > 0 or sigma_W > 0):
        raise UsageError("zeta needs sigma_B > 0 or sigma_W > 0")
    se = _se(sigma_B ** 2, sigma_W ** 2, stats.n_B, stats.n_W)
    diff = np.asarray(stats.ybar_B, dtype=float) - np.asarray(stats.ybar_W, dtype=float) - (mu_B - mu_W)
    return _scalar(diff / se)


def zeta_studentized(stats, mu_B, mu_W):
    """``zeta`` with the plug-in variances in place of the true ones."""
    se = _se(stats.var_B, stats.var_W, stats.n_B, stats.n_W)
    diff = np.asarray(stats.ybar_B, dtype=float) - np.asarray(stats.ybar_W, dtype=float) - (mu_B - mu_W)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(se > 0, diff / np.where(se > 0, se, 1.0), np.nan)
    return _scalar(out)


def gamma_ratio(stats, sigma_B, sigma_W):
    """Ratio of the true-variance to the plug-in-variance standard errors."""
    n = np.asarray(stats.n, dtype=float)
    fb = np.asarray(stats.n_B, dtype=float) / n
    fw = np.asarray(stats.n_W, dtype=float) / n
    num = sigma_B ** 2 * fw + sigma_W ** 2 * fb
    den = np.asarray(stats.var_B) * fw + np.asarray(stats.var_W) * fb
    return _scalar(np.sqrt(_div(num, den)))


def lambda_n(stats, sigma_B, sigma_W):
    """Weight of the B-arm term in the decomposition of ``zeta``."""
    n = np.asarray(stats.n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        fw = np.asarray(stats.n_W, dtype=float) / n
        fb = np.asarray(stats.n_B, dtype=float) / n
    num = sigma_B ** 2 * fw
    return _div(num, num + sigma_W ** 2 * fb)


def noncentrality_phi(stats, mu_B, mu_W, sigma_W):
    """Plug-in drift of ``zeta0`` under the alternative: ``sqrt(n_W)(mu_B - mu_W)/sigma_W``.

    Equal to ``sqrt(n**(m_W/m_B) * eta_sq_hat)`` times the standardised
    effect, since the first factor reduces to ``sqrt(n_W)`` exactly.
    """
    if not sigma_W > 0:
        raise UsageError("noncentrality_phi needs sigma_W > 0")
    return _scalar(np.sqrt(np.asarray(stats.n_W, dtype=float)) * (mu_B - mu_W) / sigma_W)


def _rate(m_B, m_W, strict):
    if not m_W > 0:
        raise UsageError(f"rate diagnostics need m_W > 0, got {m_W!r}")
    if strict and not m_B > m_W:
        raise UsageError(f"this diagnostic needs m_B > m_W, got m_B={m_B!r}, m_W={m_W!r}")
    if not strict and not m_B >= m_W:
        raise UsageError(f"this diagnostic needs m_B >= m_W, got m_B={m_B!r}, m_W={m_W!r}")
    return m_W / m_B


def eta_sq_hat(state, m_B, m_W):
    """``n_W / n**(m_W/m_B)``, the finite-n tracker of the random rate constant."""
    r = _rate(m_B, m_W, strict=False)
    n = np.asarray(state.n, dtype=float)
    return _div(state.n_W, np.power(n, r))


def psi_hat(state, m_B, m_W):
    """``B / W**(m_B/m_W)``, tracking the almost-sure limit of the mass ratio."""
    if not m_W > 0:
        raise UsageError(f"psi_hat needs m_W > 0, got {m_W!r}")
    return _div(state.black_mass, np.power(np.asarray(state.white_mass, dtype=float), m_B / m_W))


def remark2_residual(state, m_B, m_W):
    """Relative gap between ``eta_sq_hat`` and its expression through ``psi_hat``."""
    r = _rate(m_B, m_W, strict=True)
    eta = np.asarray(eta_sq_hat(state, m_B, m_W), dtype=float)
    psi = np.asarray(psi_hat(state, m_B, m_W), dtype=float)
    implied = np.power(m_B / psi, r) / m_W
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(eta > 0, eta / implied - 1.0, np.nan)
    return _scalar(out)


def corollary2_ratio(state, m_B, m_W):
    """``(1 - Z) n**(1 - m_W/m_B)`` over its predicted limit; tends to 1."""
    r = _rate(m_B, m_W, strict=True)
    n = np.asarray(state.n, dtype=float)
    eta = np.asarray(eta_sq_hat(state, m_B, m_W), dtype=float)
    mb = np.asarray(state.black_mass, dtype=float)
    mw = np.asarray(state.white_mass, dtype=float)
    lhs = mw / (mb + mw) * np.power(n, 1.0 - r)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(eta > 0, lhs / (r * eta), np.nan)
    return _scalar(out)


def reject_h0(zeta0_value, alpha):
    """One-sided rejection ``zeta0 > z_{1-alpha}`` (strict). Undefined never rejects."""
    crit = sk.normal_quantile(1.0 - alpha)
    out = np.asarray(zeta0_value, dtype=float) > crit
    return out if out.ndim else bool(out)


@dataclass
class CheckpointStats:
    n: object
    n_B: object
    n_W: object
    ybar_B: object
    ybar_W: object
    var_B: object
    var_W: object
    z_n: object
    zeta0: object
    zeta: object
    lambda_n: object
    phi_hat: object
    eta_sq_hat: object
    psi_hat: object
    rate_exponent: float

    def as_dict(self) -> dict:
        """Scalar view with ``None`` for undefined values."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and math.isnan(v):
                v = None
            elif f.name in ("n", "n_B", "n_W") and v is not None:
                v = int(v)
            out[f.name] = v
        return out


def compute_stats(snap: Snapshot, truth) -> CheckpointStats:
    """Every checkpoint statistic from a snapshot and the design's true moments."""
    ybar_b, ybar_w = adaptive_means(snap)
    var_b, var_w = adaptive_variances(snap)
    n_b = snap.n_B
    n_w = snap.n_W
    z = _div(snap.black_mass, np.asarray(snap.black_mass) + np.asarray(snap.white_mass))
    partial = CheckpointStats(
        snap.n, n_b, n_w, ybar_b, ybar_w, var_b, var_w, z,
        math.nan, math.nan, math.nan, math.nan, math.nan, math.nan,
        truth.rate_exponent,
    )
    partial.zeta0 = zeta0(partial)
    nan_like = _scalar(np.full(np.shape(n_b), np.nan))
    if truth.sigma_B > 0 or truth.sigma_W > 0:
        partial.zeta = zeta(partial, truth.mu_B, truth.mu_W, truth.sigma_B, truth.sigma_W)
    else:
        partial.zeta = nan_like
    partial.lambda_n = lambda_n(partial, truth.sigma_B, truth.sigma_W)
    if truth.sigma_W > 0:
        partial.phi_hat = noncentrality_phi(partial, truth.mu_B, truth.mu_W, truth.sigma_W)
    else:
        partial.phi_hat = nan_like
    if truth.m_W > 0 and truth.m_B >= truth.m_W:
        partial.eta_sq_hat = eta_sq_hat(snap, truth.m_B, truth.m_W)
    else:
        partial.eta_sq_hat = nan_like
    if truth.m_W > 0:
        partial.psi_hat = psi_hat(snap, truth.m_B, truth.m_W)
    else:
        partial.psi_hat = nan_like
    return partial
