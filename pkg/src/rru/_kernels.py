"""Compiled per-lane urn kernels (numba).

Each replicate owns a SplitMix64 stream held in a one-element ``uint64``
array. Per step the stream yields one uniform for the draw, then whatever
the drawn arm's sampler consumes:

    bernoulli, uniform, exponential   1 uniform
    normal                            2 uniforms (Box-Muller, cosine branch)
    point_mass                        none
    beta                              two Marsaglia-Tsang gamma draws

The vectorised fallback in ``_kernels_numpy`` follows the same consumption
order exactly, so both backends see identical streams.
"""
import math

import numpy as np

from ._jit import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)
S30 = np.uint64(30)
S27 = np.uint64(27)
S31 = np.uint64(31)
S11 = np.uint64(11)
INV_2_53 = 1.0 / 9007199254740992.0
TWO_PI = 2.0 * math.pi

# accumulator layout shared by every backend
N_B, N_W, MASS_B, MASS_W, SUM_B, SUM_W, SQ_B, SQ_W = range(8)
N_ACC = 8


@njit(cache=True)
def next_uniform(rng):
    s = rng[0] + GOLDEN
    rng[0] = s
    z = (s ^ (s >> S30)) * MIX1
    z = (z ^ (z >> S27)) * MIX2
    z = z ^ (z >> S31)
    return np.float64(z >> S11) * INV_2_53


@njit(cache=True)
def _normal(rng):
    u1 = next_uniform(rng)
    u2 = next_uniform(rng)
    return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(TWO_PI * u2)


@njit(cache=True)
def _gamma(rng, shape):
    boost = shape < 1.0
    k = shape + 1.0 if boost else shape
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = _normal(rng)
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = next_uniform(rng)
        if math.log1p(-u) < 0.5 * x * x + d - d * v + d * math.log(v):
            g = d * v
            break
    if boost:
        u = next_uniform(rng)
        g = g * math.exp(math.log1p(-u) / shape)
    return g


@njit(cache=True)
def sample_response(kind, p1, p2, rng):
    if kind == 0:  # bernoulli
        return 1.0 if next_uniform(rng) < p1 else 0.0
    if kind == 1:  # normal
        return p1 + p2 * _normal(rng)
    if kind == 2:  # uniform
        return p1 + (p2 - p1) * next_uniform(rng)
    if kind == 3:  # exponential
        return -math.log1p(-next_uniform(rng)) / p1
    if kind == 4:  # point mass
        return p1
    x = _gamma(rng, p1)
    y = _gamma(rng, p2)
    return x / (x + y)


@njit(cache=True)
def apply_utility(kind, p1, p2, y):
    if kind == 0:  # identity
        return y
    if kind == 1:  # clip_affine
        t = (y - p1) / (p2 - p1)
        if t < 0.0:
            return 0.0
        if t > 1.0:
            return 1.0
        return t
    if kind == 2:  # indicator
        return 1.0 if y > p1 else 0.0
    return 1.0 / (1.0 + math.exp(-(y - p1) / p2))


@njit(cache=True)
def step_lane(arm_kind, arm_par, ukind, upar, rng, acc, v):
    """Advance one urn by one patient. ``v < 0`` means draw v from the stream."""
    mb = acc[MASS_B]
    mw = acc[MASS_W]
    z = mb / (mb + mw)
    if v < 0.0:
        v = next_uniform(rng)
    if v < z:
        y = sample_response(arm_kind[0], arm_par[0, 0], arm_par[0, 1], rng)
        u = apply_utility(ukind, upar[0], upar[1], y)
        acc[MASS_B] = mb + u
        acc[N_B] += 1.0
        acc[SUM_B] += y
        acc[SQ_B] += y * y
        return 1, y, u, z
    y = sample_response(arm_kind[1], arm_par[1, 0], arm_par[1, 1], rng)
    u = apply_utility(ukind, upar[0], upar[1], y)
    acc[MASS_W] = mw + u
    acc[N_W] += 1.0
    acc[SUM_W] += y
    acc[SQ_W] += y * y
    return 0, y, u, z


@njit(cache=True, nogil=True)
def run_lanes(arm_kind, arm_par, ukind, upar, b, w, seeds, horizon, checkpoints, record):
    n_rep = seeds.shape[0]
    n_cp = checkpoints.shape[0]
    snaps = np.empty((n_rep, n_cp, N_ACC))
    width = horizon if record else 0
    deltas = np.empty((n_rep, width), dtype=np.int8)
    ys = np.empty((n_rep, width))
    us = np.empty((n_rep, width))
    zs = np.empty((n_rep, width))
    rng = np.empty(1, dtype=np.uint64)
    acc = np.empty(N_ACC)
    for r in range(n_rep):
        rng[0] = seeds[r]
        acc[:] = 0.0
        acc[MASS_B] = b
        acc[MASS_W] = w
        k = 0
        for i in range(horizon):
            d, y, u, z = step_lane(arm_kind, arm_par, ukind, upar, rng, acc, -1.0)
            if record:
                deltas[r, i] = d
                ys[r, i] = y
                us[r, i] = u
                zs[r, i] = z
            if k < n_cp and checkpoints[k] == i + 1:
                snaps[r, k, :] = acc
                k += 1
    return snaps, deltas, ys, us, zs
