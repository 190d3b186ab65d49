"""Pure-numpy fallback: the same urn kernels, vectorised across replicates.

Time still runs sequentially (each draw depends on the current urn), but all
lanes advance together. Lanes consume their own SplitMix64 streams in the
same order as the compiled kernels, so for arithmetic-only laws the two
backends agree bit for bit.
"""
import numpy as np

from ._kernels import (
    GOLDEN, INV_2_53, MASS_B, MASS_W, MIX1, MIX2, N_ACC, N_B, N_W,
    S11, S27, S30, S31, SQ_B, SQ_W, SUM_B, SUM_W, TWO_PI,
)


def uniforms(rng, idx):
    """Next uniform on [0, 1) for the lanes in ``idx`` (advances only those)."""
    s = rng[idx] + GOLDEN
    rng[idx] = s
    z = (s ^ (s >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    z = z ^ (z >> S31)
    return (z >> S11).astype(np.float64) * INV_2_53


def _normals(rng, idx):
    u1 = uniforms(rng, idx)
    u2 = uniforms(rng, idx)
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(TWO_PI * u2)


def _gammas(rng, idx, shape):
    boost = shape < 1.0
    k = shape + 1.0 if boost else shape
    d = k - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty(idx.size)
    pending = np.arange(idx.size)
    while pending.size:
        lanes = idx[pending]
        x = _normals(rng, lanes)
        v = 1.0 + c * x
        ok = v > 0.0
        # lanes with v <= 0 retry without drawing the acceptance uniform
        cand = pending[ok]
        x, v = x[ok], v[ok] ** 3
        u = uniforms(rng, idx[cand])
        with np.errstate(divide="ignore"):
            accept = np.log1p(-u) < 0.5 * x * x + d - d * v + d * np.log(v)
        out[cand[accept]] = d * v[accept]
        done = np.zeros(pending.size, dtype=bool)
        done[np.flatnonzero(ok)[accept]] = True
        pending = pending[~done]
    if boost:
        u = uniforms(rng, idx)
        out = out * np.exp(np.log1p(-u) / shape)
    return out


def sample_responses(kind, p1, p2, rng, idx):
    if idx.size == 0:
        return np.empty(0)
    if kind == 0:
        return (uniforms(rng, idx) < p1).astype(np.float64)
    if kind == 1:
        return p1 + p2 * _normals(rng, idx)
    if kind == 2:
        return p1 + (p2 - p1) * uniforms(rng, idx)
    if kind == 3:
        return -np.log1p(-uniforms(rng, idx)) / p1
    if kind == 4:
        return np.full(idx.size, p1)
    x = _gammas(rng, idx, p1)
    y = _gammas(rng, idx, p2)
    return x / (x + y)


def apply_utility(kind, p1, p2, y):
    if kind == 0:
        return y.copy()
    if kind == 1:
        return np.clip((y - p1) / (p2 - p1), 0.0, 1.0)
    if kind == 2:
        return (y > p1).astype(np.float64)
    return 1.0 / (1.0 + np.exp(-(y - p1) / p2))


def step_lanes(arm_kind, arm_par, ukind, upar, rng, acc, v=None):
    """Advance every lane one patient. Returns (delta, y, u, z_before)."""
    n = rng.shape[0]
    lanes = np.arange(n)
    mb = acc[:, MASS_B]
    mw = acc[:, MASS_W]
    z = mb / (mb + mw)
    if v is None:
        v = uniforms(rng, lanes)
    delta = v < z
    y = np.empty(n)
    u = np.empty(n)
    for arm, sel, mass, cnt, s1, s2 in (
        (0, delta, MASS_B, N_B, SUM_B, SQ_B),
        (1, ~delta, MASS_W, N_W, SUM_W, SQ_W),
    ):
        idx = lanes[sel]
        ya = sample_responses(arm_kind[arm], arm_par[arm, 0], arm_par[arm, 1], rng, idx)
        ua = apply_utility(ukind, upar[0], upar[1], ya)
        y[idx] = ya
        u[idx] = ua
        acc[idx, mass] = acc[idx, mass] + ua
        acc[idx, cnt] += 1.0
        acc[idx, s1] += ya
        acc[idx, s2] += ya * ya
    return delta.astype(np.int8), y, u, z


def run_lanes(arm_kind, arm_par, ukind, upar, b, w, seeds, horizon, checkpoints, record):
    n_rep = seeds.shape[0]
    n_cp = checkpoints.shape[0]
    snaps = np.empty((n_rep, n_cp, N_ACC))
    width = horizon if record else 0
    deltas = np.empty((n_rep, width), dtype=np.int8)
    ys = np.empty((n_rep, width))
    us = np.empty((n_rep, width))
    zs = np.empty((n_rep, width))
    rng = seeds.astype(np.uint64).copy()
    acc = np.zeros((n_rep, N_ACC))
    acc[:, MASS_B] = b
    acc[:, MASS_W] = w
    k = 0
    for i in range(horizon):
        d, y, u, z = step_lanes(arm_kind, arm_par, ukind, upar, rng, acc)
        if record:
            deltas[:, i] = d
            ys[:, i] = y
            us[:, i] = u
            zs[:, i] = z
        if k < n_cp and checkpoints[k] == i + 1:
            snaps[:, k, :] = acc
            k += 1
    return snaps, deltas, ys, us, zs
