"""The randomly reinforced urn: sequential draws, allocation and reinforcement."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels, _kernels_numpy
from ._jit import backend as resolve_backend, worker_count
from .errors import UsageError
from .inference import Snapshot, compute_stats
from .model import DesignConfig, require_valid

_MASK64 = (1 << 64) - 1


def _kernel_params(cfg: DesignConfig):
    arm_kind = np.array([cfg.arm_B.code, cfg.arm_W.code], dtype=np.int64)
    arm_par = np.zeros((2, 2))
    for row, arm in enumerate((cfg.arm_B, cfg.arm_W)):
        arm_par[row, : len(arm.params)] = arm.params
    upar = np.zeros(2)
    upar[: len(cfg.utility.params)] = cfg.utility.params
    return arm_kind, arm_par, np.int64(cfg.utility.code), upar


class AllocationRecord(NamedTuple):
    index: int
    delta: int
    y: float
    u: float
    z_before: float


class UrnState:
    """Live urn contents for one trial, advanced by :func:`step`."""

    def __init__(self, cfg: DesignConfig, seed: int, backend: Optional[str] = None):
        self.cfg = cfg
        self.backend = resolve_backend(backend)
        self.n = 0
        self.rng = np.array([seed & _MASK64], dtype=np.uint64)
        self.acc = np.zeros(_kernels.N_ACC)
        self.acc[_kernels.MASS_B] = cfg.b
        self.acc[_kernels.MASS_W] = cfg.w
        self._params = _kernel_params(cfg)

    @property
    def black_mass(self) -> float:
        return float(self.acc[_kernels.MASS_B])

    @property
    def white_mass(self) -> float:
        return float(self.acc[_kernels.MASS_W])

    @property
    def n_B(self) -> int:
        return int(self.acc[_kernels.N_B])

    @property
    def n_W(self) -> int:
        return int(self.acc[_kernels.N_W])

    @property
    def sum_y_B(self) -> float:
        return float(self.acc[_kernels.SUM_B])

    @property
    def sum_y_W(self) -> float:
        return float(self.acc[_kernels.SUM_W])

    @property
    def sum_y2_B(self) -> float:
        return float(self.acc[_kernels.SQ_B])

    @property
    def sum_y2_W(self) -> float:
        return float(self.acc[_kernels.SQ_W])

    def snapshot(self) -> Snapshot:
        return Snapshot.from_acc(self.n, self.acc)


def z_proportion(state) -> float:
    """Probability that the next patient is allocated to arm B."""
    return state.black_mass / (state.black_mass + state.white_mass)


def step(state: UrnState, v: Optional[float] = None) -> AllocationRecord:
    """Allocate and observe one patient.

    ``v`` forces the allocation uniform instead of drawing it from the
    stream (the response is still drawn from the stream).
    """
    if state.n >= state.cfg.horizon:
        raise UsageError(f"cannot step past the horizon {state.cfg.horizon}")
    arm_kind, arm_par, ukind, upar = state._params
    if state.backend == "numba":
        d, y, u, z = _kernels.step_lane(
            arm_kind, arm_par, ukind, upar, state.rng, state.acc, -1.0 if v is None else float(v)
        )
    else:
        forced = None if v is None else np.array([float(v)])
        acc2 = state.acc[None, :]
        d, y, u, z = _kernels_numpy.step_lanes(arm_kind, arm_par, ukind, upar, state.rng, acc2, forced)
        d, y, u, z = int(d[0]), float(y[0]), float(u[0]), float(z[0])
    state.n += 1
    return AllocationRecord(state.n, int(d), float(y), float(u), float(z))


class Batch(NamedTuple):
    """Raw kernel output for a block of replicates."""

    snaps: np.ndarray  # (R, K, 8) accumulators at each checkpoint
    delta: np.ndarray  # (R, H) int8, empty when not recorded
    y: np.ndarray
    u: np.ndarray
    z_before: np.ndarray


def _run_chunk(name, params, cfg, seeds, checkpoints, record):
    arm_kind, arm_par, ukind, upar = params
    fn = _kernels.run_lanes if name == "numba" else _kernels_numpy.run_lanes
    return fn(
        arm_kind, arm_par, ukind, upar, float(cfg.b), float(cfg.w),
        seeds, int(cfg.horizon), checkpoints, bool(record),
    )


def simulate_batch(
    cfg: DesignConfig,
    seeds,
    record: bool = False,
    backend: Optional[str] = None,
    workers: Optional[int] = None,
) -> Batch:
    """Run one trial per seed. Output order follows ``seeds`` for any worker count."""
    require_valid(cfg)
    name = resolve_backend(backend)
    workers = workers or worker_count()
    seeds = np.array([int(s) & _MASK64 for s in seeds], dtype=np.uint64)
    checkpoints = np.asarray(cfg.checkpoints, dtype=np.int64)
    params = _kernel_params(cfg)
    n = seeds.shape[0]
    if workers <= 1 or n < 2:
        return Batch(*_run_chunk(name, params, cfg, seeds, checkpoints, record))
    bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
    chunks = [seeds[a:b] for a, b in zip(bounds[:-1], bounds[1:])]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda s: _run_chunk(name, params, cfg, s, checkpoints, record), chunks))
    return Batch(*(np.concatenate([p[j] for p in parts], axis=0) for j in range(5)))


@dataclass
class TrialPath:
    cfg: DesignConfig
    seed: int
    delta: np.ndarray
    y: np.ndarray
    u: np.ndarray
    z_before: np.ndarray
    snapshots: list = field(default_factory=list)

    @property
    def records(self) -> list:
        return [
            AllocationRecord(i + 1, int(d), float(y), float(u), float(z))
            for i, (d, y, u, z) in enumerate(zip(self.delta, self.y, self.u, self.z_before))
        ]

    def __len__(self):
        return int(self.delta.shape[0])


def run_trial(cfg: DesignConfig, seed: int, backend: Optional[str] = None) -> TrialPath:
    """Execute ``cfg.horizon`` allocations from the stream seeded by ``seed``."""
    require_valid(cfg)
    batch = simulate_batch(cfg, [seed], record=True, backend=backend, workers=1)
    truth = cfg.truth()
    snapshots = [
        compute_stats(Snapshot.from_acc(n, batch.snaps[0, k]), truth)
        for k, n in enumerate(cfg.checkpoints)
    ]
    return TrialPath(cfg, seed, batch.delta[0], batch.y[0], batch.u[0], batch.z_before[0], snapshots)


def observed_subsequences(path: TrialPath) -> tuple:
    """Responses observed on arm B and on arm W, each in allocation order."""
    delta = np.asarray(path.delta).astype(bool)
    y = np.asarray(path.y)
    return y[delta], y[~delta]
