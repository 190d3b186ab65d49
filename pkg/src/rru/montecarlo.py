"""Replicated studies: seeding, aggregation and the theorem-check suites."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import stats_kernel as sk
from .errors import ConfigError, UsageError
from .inference import (
    CheckpointStats, Snapshot, compute_stats, corollary2_ratio, reject_h0, remark2_residual,
)
from .model import DesignConfig, Truth, polya_limit_law, require_valid, shifted_arm
from .urn_engine import simulate_batch

_MASK64 = (1 << 64) - 1
_INDEX_STRIDE = 0xD1B54A32D192ED03  # odd, so index -> index * stride is a bijection mod 2**64
_RECORD_CHUNK = 250

STAT_COLUMNS = (
    "n_B", "n_W", "ybar_B", "ybar_W", "var_B", "var_W", "z_n",
    "zeta0", "zeta", "lambda_n", "phi_hat", "eta_sq_hat", "psi_hat",
)


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(base_seed: int, replicate_index: int) -> int:
    """Stream seed of one replicate.

    ``mix64(base_seed XOR index * 0xD1B54A32D192ED03)`` where ``mix64`` is the
    SplitMix64 finaliser. Every stage is a bijection on 64-bit words, so
    distinct indices always get distinct seeds. Frozen: changing it changes
    every published study.
    """
    return _mix64((base_seed ^ (replicate_index * _INDEX_STRIDE)) & _MASK64)


@dataclass
class StudyPlan:
    cfg: DesignConfig
    replicates: int
    base_seed: int = 0
    alpha: Optional[float] = None
    truth: Optional[Truth] = None
    z_beta: Optional[tuple] = None
    subsequence_ks: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise UsageError(f"a study needs at least one replicate, got {self.replicates}")
        require_valid(self.cfg)
        if self.alpha is None:
            self.alpha = self.cfg.alpha
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.truth is None:
            self.truth = self.cfg.truth()
        if self.z_beta is None:
            self.z_beta = polya_limit_law(self.cfg)


@dataclass
class StudyReport:
    plan: StudyPlan
    snapshots: list  # raw accumulators per checkpoint, arrays over replicates
    stats: list  # CheckpointStats with one array entry per replicate, per checkpoint
    reject: np.ndarray  # (R, K)
    aggregates: dict
    diagnostics: dict
    subsequence_pvalues: Optional[np.ndarray] = None

    @property
    def terminal(self) -> CheckpointStats:
        return self.stats[-1]

    def column(self, name: str, k: int = -1) -> np.ndarray:
        return np.asarray(getattr(self.stats[k], name), dtype=float)


def _summary(values: np.ndarray) -> dict:
    ok = values[np.isfinite(values)]
    if ok.size == 0:
        return {"count": 0, "mean": None, "median": None, "q05": None, "q25": None, "q75": None, "q95": None}
    q = np.quantile(ok, [0.05, 0.25, 0.5, 0.75, 0.95])
    return {
        "count": int(ok.size),
        "mean": float(np.mean(ok)),
        "median": float(q[2]),
        "q05": float(q[0]),
        "q25": float(q[1]),
        "q75": float(q[3]),
        "q95": float(q[4]),
    }


def _gof(values, cdf, cdf_left=None) -> Optional[sk.GofResult]:
    ok = np.asarray(values, dtype=float)
    ok = ok[np.isfinite(ok)]
    if ok.size == 0:
        return None
    return sk.ks_test(ok, cdf, cdf_left)


def _corr(xs, ys) -> Optional[float]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.sum() < 2:
        return None
    r = sk.pearson_corr(x[ok], y[ok])
    return None if math.isnan(r) else r


def standardized_means(stats: CheckpointStats, truth: Truth) -> tuple:
    """``sqrt(N)(Ybar - mu)/sigma`` per arm; ``nan`` where sigma is 0 or the arm is empty."""
    out = []
    for nn, ybar, mu, sigma in (
        (stats.n_B, stats.ybar_B, truth.mu_B, truth.sigma_B),
        (stats.n_W, stats.ybar_W, truth.mu_W, truth.sigma_W),
    ):
        if sigma > 0:
            out.append(np.sqrt(np.asarray(nn, dtype=float)) * (np.asarray(ybar, dtype=float) - mu) / sigma)
        else:
            out.append(np.full(np.shape(nn), np.nan))
    return tuple(out)


def _subsequence_pvalues(cfg, delta, y):
    arm = cfg.arm_B
    left = arm.cdf_left if arm.is_discrete else None
    out = np.full(delta.shape[0], np.nan)
    for r in range(delta.shape[0]):
        obs = y[r][delta[r] == 1]
        if obs.size:
            out[r] = sk.ks_test(obs, arm.cdf, left).p_value
    return out


def run_study(plan: StudyPlan, backend: Optional[str] = None, workers: Optional[int] = None) -> StudyReport:
    """Run ``plan.replicates`` seeded trials and aggregate in replicate order."""
    cfg = plan.cfg
    seeds = [derive_seed(plan.base_seed, i) for i in range(plan.replicates)]
    sub_p = None
    if plan.subsequence_ks:
        snaps_parts, p_parts = [], []
        for a in range(0, len(seeds), _RECORD_CHUNK):
            batch = simulate_batch(cfg, seeds[a:a + _RECORD_CHUNK], record=True, backend=backend, workers=workers)
            snaps_parts.append(batch.snaps)
            p_parts.append(_subsequence_pvalues(cfg, batch.delta, batch.y))
        snaps = np.concatenate(snaps_parts, axis=0)
        sub_p = np.concatenate(p_parts)
    else:
        snaps = simulate_batch(cfg, seeds, backend=backend, workers=workers).snaps

    truth = plan.truth
    snapshots = [Snapshot.from_acc(n, snaps[:, k, :]) for k, n in enumerate(cfg.checkpoints)]
    stats = [compute_stats(s, truth) for s in snapshots]
    reject = np.stack([reject_h0(s.zeta0, plan.alpha) for s in stats], axis=1) if stats else np.zeros((plan.replicates, 0), bool)

    aggregates = {}
    for k, s in enumerate(stats):
        entry = {name: _summary(np.asarray(getattr(s, name), dtype=float)) for name in STAT_COLUMNS}
        entry["rejection_rate"] = float(reject[:, k].mean())
        aggregates[str(cfg.checkpoints[k])] = entry

    diagnostics = {}
    if stats:
        term = stats[-1]
        std_b, std_w = standardized_means(term, truth)
        z_cdf = sk.normal_cdf
        beta_law = plan.z_beta
        diagnostics = {
            "n": int(cfg.checkpoints[-1]),
            "replicates": plan.replicates,
            "alpha": plan.alpha,
            "zeta0_defined": int(np.isfinite(np.asarray(term.zeta0)).sum()),
            "zeta0_ks": _gof(term.zeta0, z_cdf),
            "zeta_ks": _gof(term.zeta, z_cdf),
            "std_mean_B_ks": _gof(std_b, z_cdf),
            "std_mean_W_ks": _gof(std_w, z_cdf),
            "z_beta_law": list(beta_law) if beta_law else None,
            "z_beta_ks": _gof(term.z_n, lambda x: sk.beta_cdf(min(1.0, max(0.0, x)), *beta_law)) if beta_law else None,
            "corr_std_means": _corr(std_b, std_w),
            "corr_zeta_eta_sq": _corr(term.zeta, term.eta_sq_hat),
            "rejection_rate": float(reject[:, -1].mean()),
        }
        if sub_p is not None:
            ok = np.isfinite(sub_p)
            diagnostics["subsequence_B_evaluated"] = int(ok.sum())
            diagnostics["subsequence_B_pass_rate"] = float((sub_p[ok] > 0.01).mean()) if ok.any() else None
    return StudyReport(plan, snapshots, stats, reject, aggregates, diagnostics, sub_p)


@dataclass
class SuiteResult:
    report: StudyReport
    checks: dict = field(default_factory=dict)


def _degenerate_fraction(z, eps):
    z = np.asarray(z, dtype=float)
    return float(((z < eps) | (z > 1.0 - eps)).mean())


def h0_suite(plan: StudyPlan, eps: float = 0.01, backend=None, workers=None) -> SuiteResult:
    """Null-hypothesis checks: normality of the statistics, size, non-degenerate limit."""
    t = plan.truth
    if not math.isclose(t.m_B, t.m_W, rel_tol=0.0, abs_tol=1e-12):
        raise UsageError(f"h0_suite needs m_B == m_W, got {t.m_B!r} and {t.m_W!r}")
    report = run_study(plan, backend, workers)
    d = report.diagnostics
    checks = {
        "zeta0_ks": d["zeta0_ks"],
        "zeta_ks": d["zeta_ks"],
        "std_mean_B_ks": d["std_mean_B_ks"],
        "std_mean_W_ks": d["std_mean_W_ks"],
        "corr_std_means": d["corr_std_means"],
        "size": d["rejection_rate"] if d["zeta0_defined"] else None,
        "degenerate_fraction": _degenerate_fraction(report.terminal.z_n, eps),
    }
    if plan.subsequence_ks:
        checks["subsequence_B_pass_rate"] = d["subsequence_B_pass_rate"]
    return SuiteResult(report, checks)


def h1_suite(plan: StudyPlan, backend=None, workers=None) -> SuiteResult:
    """Alternative-hypothesis checks: rates, limit identities, mixture law, power."""
    t = plan.truth
    if not (t.m_B > t.m_W > 0):
        raise UsageError(f"h1_suite needs m_B > m_W > 0, got m_B={t.m_B!r}, m_W={t.m_W!r}")
    if len(plan.cfg.checkpoints) < 2:
        raise UsageError("h1_suite needs at least two checkpoints")
    report = run_study(plan, backend, workers)
    term = report.terminal
    mid = report.stats[-2]
    snap_term = report.snapshots[-1]
    eta_hi = np.asarray(term.eta_sq_hat, dtype=float)
    eta_mid = np.asarray(mid.eta_sq_hat, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = eta_hi / eta_mid
    psi = np.asarray(term.psi_hat, dtype=float)
    resid = np.asarray(remark2_residual(snap_term, t.m_B, t.m_W), dtype=float)
    cor2 = np.asarray(corollary2_ratio(snap_term, t.m_B, t.m_W), dtype=float)
    centred = np.asarray(term.zeta0, dtype=float) - np.asarray(term.phi_hat, dtype=float)
    n = float(plan.cfg.checkpoints[-1])
    checks = {
        "mean_share_B": float(np.mean(np.asarray(term.n_B, dtype=float) / n)),
        "eta_sq_all_finite_positive": bool(
            np.all(np.isfinite(eta_hi) & (eta_hi > 0)) and np.all(np.isfinite(eta_mid) & (eta_mid > 0))
        ),
        "eta_ratio_median": _nanmedian(ratio),
        "psi_all_finite_positive": bool(np.all(np.isfinite(psi) & (psi > 0))),
        "remark2_abs_residual_median": _nanmedian(np.abs(resid)),
        "corollary2_ratio_median": _nanmedian(cor2),
        "centred_zeta0_ks": _gof(centred, sk.normal_cdf),
        "zeta0_ks": report.diagnostics["zeta0_ks"],
        "corr_zeta_eta_sq": report.diagnostics["corr_zeta_eta_sq"],
        "power": report.diagnostics["rejection_rate"],
    }
    return SuiteResult(report, checks)


def _nanmedian(x) -> Optional[float]:
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    return float(np.median(x)) if x.size else None


def power_curve(plan: StudyPlan, effect_sizes, backend=None, workers=None) -> list:
    """Empirical rejection rate as arm B's mean moves above arm W's.

    For each effect ``d`` arm B is replaced by arm W shifted so that
    ``mu_B = mu_W + d``; ``d = 0`` reproduces the null design.
    """
    rows = []
    template = plan.cfg
    for effect in sorted(float(e) for e in effect_sizes):
        cfg = template.replace(arm_B=shifted_arm(template.arm_W, effect))
        require_valid(cfg)
        sub = StudyPlan(cfg, plan.replicates, plan.base_seed, plan.alpha)
        report = run_study(sub, backend, workers)
        term = report.terminal
        n = int(cfg.checkpoints[-1])
        eta = np.asarray(term.eta_sq_hat, dtype=float)
        rows.append({
            "effect": effect,
            "n": n,
            "R": plan.replicates,
            "alpha": plan.alpha,
            "empirical_power": report.diagnostics["rejection_rate"],
            "mean_NW_share": float(np.mean(np.asarray(term.n_W, dtype=float) / n)),
            "mean_eta_sq": float(np.mean(eta)) if np.all(np.isfinite(eta)) else None,
        })
    return rows
