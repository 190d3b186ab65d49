"""Response laws, utility transforms and the design configuration."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import integrate

from . import stats_kernel as sk
from .errors import ConfigError

RESPONSE_PARAMS = {
    "bernoulli": ("p",),
    "normal": ("mean", "sd"),
    "uniform": ("lo", "hi"),
    "exponential": ("rate",),
    "point_mass": ("v",),
    "beta": ("a", "b"),
}
UTILITY_PARAMS = {
    "identity": ("u_max",),
    "clip_affine": ("lo", "hi"),
    "indicator": ("threshold",),
    "logistic": ("center", "scale"),
}
# integer codes shared with the simulation kernels
RESPONSE_CODES = {k: i for i, k in enumerate(RESPONSE_PARAMS)}
UTILITY_CODES = {k: i for i, k in enumerate(UTILITY_PARAMS)}

DEFAULT_GRID = (100, 1_000, 10_000, 100_000)
_QUAD_TOL = 1e-12


@dataclass(frozen=True)
class ResponseModel:
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in RESPONSE_PARAMS:
            raise ConfigError(f"unknown response kind {self.kind!r}")
        names = RESPONSE_PARAMS[self.kind]
        if len(self.params) != len(names):
            raise ConfigError(f"{self.kind} expects parameters {names}, got {self.params!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def named(self) -> dict:
        return dict(zip(RESPONSE_PARAMS[self.kind], self.params))

    @property
    def code(self) -> int:
        return RESPONSE_CODES[self.kind]

    def problems(self) -> list:
        p = self.params
        bad = []
        if not all(math.isfinite(v) for v in p):
            return [f"{self.kind} parameters must be finite, got {p!r}"]
        if self.kind == "bernoulli" and not 0.0 <= p[0] <= 1.0:
            bad.append(f"bernoulli p must lie in [0, 1], got {p[0]!r}")
        elif self.kind == "normal" and not p[1] > 0.0:
            bad.append(f"normal sd must be > 0, got {p[1]!r}")
        elif self.kind == "uniform" and not p[0] < p[1]:
            bad.append(f"uniform needs lo < hi, got lo={p[0]!r}, hi={p[1]!r}")
        elif self.kind == "exponential" and not p[0] > 0.0:
            bad.append(f"exponential rate must be > 0, got {p[0]!r}")
        elif self.kind == "beta" and not (p[0] > 0.0 and p[1] > 0.0):
            bad.append(f"beta needs a > 0 and b > 0, got a={p[0]!r}, b={p[1]!r}")
        return bad

    def check(self):
        bad = self.problems()
        if bad:
            raise ConfigError(bad)

    @property
    def is_discrete(self) -> bool:
        return self.kind in ("bernoulli", "point_mass")

    def atoms(self) -> list:
        """Support points and probabilities of a discrete law."""
        if self.kind == "bernoulli":
            p = self.params[0]
            return [(0.0, 1.0 - p), (1.0, p)]
        if self.kind == "point_mass":
            return [(self.params[0], 1.0)]
        raise ValueError(f"{self.kind} is not discrete")

    def support(self) -> tuple:
        k, p = self.kind, self.params
        if k == "bernoulli":
            return (0.0, 1.0)
        if k == "normal":
            return (-math.inf, math.inf)
        if k == "uniform":
            return (p[0], p[1])
        if k == "exponential":
            return (0.0, math.inf)
        if k == "point_mass":
            return (p[0], p[0])
        return (0.0, 1.0)

    def cdf(self, x: float) -> float:
        k, p = self.kind, self.params
        if self.is_discrete:
            return sum(pr for v, pr in self.atoms() if v <= x)
        if k == "normal":
            return sk.normal_cdf((x - p[0]) / p[1])
        if k == "uniform":
            return min(1.0, max(0.0, (x - p[0]) / (p[1] - p[0])))
        if k == "exponential":
            return 0.0 if x <= 0.0 else -math.expm1(-p[0] * x)
        return sk.beta_cdf(min(1.0, max(0.0, x)), p[0], p[1])

    def cdf_left(self, x: float) -> float:
        """Left limit ``P(Y < x)``."""
        if self.is_discrete:
            return sum(pr for v, pr in self.atoms() if v < x)
        return self.cdf(x)

    def pdf(self, x: float) -> float:
        k, p = self.kind, self.params
        if k == "normal":
            return sk.normal_pdf((x - p[0]) / p[1]) / p[1]
        if k == "uniform":
            return 1.0 / (p[1] - p[0]) if p[0] <= x <= p[1] else 0.0
        if k == "exponential":
            return p[0] * math.exp(-p[0] * x) if x >= 0.0 else 0.0
        if k == "beta":
            if not 0.0 < x < 1.0:
                return 0.0
            a, b = p
            return math.exp(
                math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x)
            )
        raise ValueError(f"{k} has no density")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.named}


def bernoulli(p):
    return ResponseModel("bernoulli", (p,))


def normal(mean, sd):
    return ResponseModel("normal", (mean, sd))


def uniform(lo, hi):
    return ResponseModel("uniform", (lo, hi))


def exponential(rate):
    return ResponseModel("exponential", (rate,))


def point_mass(v):
    return ResponseModel("point_mass", (v,))


def beta(a, b):
    return ResponseModel("beta", (a, b))


@dataclass(frozen=True)
class UtilityTransform:
    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in UTILITY_PARAMS:
            raise ConfigError(f"unknown utility kind {self.kind!r}")
        names = UTILITY_PARAMS[self.kind]
        if len(self.params) != len(names):
            raise ConfigError(f"{self.kind} expects parameters {names}, got {self.params!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    @property
    def named(self) -> dict:
        return dict(zip(UTILITY_PARAMS[self.kind], self.params))

    @property
    def code(self) -> int:
        return UTILITY_CODES[self.kind]

    @property
    def u_max(self) -> float:
        return self.params[0] if self.kind == "identity" else 1.0

    def problems(self) -> list:
        p = self.params
        if not all(math.isfinite(v) for v in p):
            return [f"{self.kind} utility parameters must be finite, got {p!r}"]
        if self.kind == "identity" and not p[0] > 0.0:
            return [f"identity utility needs u_max > 0, got {p[0]!r}"]
        if self.kind == "clip_affine" and not p[0] < p[1]:
            return [f"clip_affine utility needs lo < hi, got lo={p[0]!r}, hi={p[1]!r}"]
        if self.kind == "logistic" and not p[1] > 0.0:
            return [f"logistic utility needs scale > 0, got {p[1]!r}"]
        return []

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        k, p = self.kind, self.params
        if k == "identity":
            out = y.copy()
        elif k == "clip_affine":
            out = np.clip((y - p[0]) / (p[1] - p[0]), 0.0, 1.0)
        elif k == "indicator":
            out = (y > p[0]).astype(float)
        else:
            # exp overflow far below the centre correctly gives 0
            with np.errstate(over="ignore"):
                out = 1.0 / (1.0 + np.exp(-(y - p[0]) / p[1]))
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.named}


def identity(u_max=1.0):
    return UtilityTransform("identity", (u_max,))


def clip_affine(lo, hi):
    return UtilityTransform("clip_affine", (lo, hi))


def indicator(threshold):
    return UtilityTransform("indicator", (threshold,))


def logistic(center, scale):
    return UtilityTransform("logistic", (center, scale))


def response_mean_var(model: ResponseModel) -> tuple:
    """Closed-form mean and variance of a response law."""
    model.check()
    k, p = model.kind, model.params
    if k == "bernoulli":
        return p[0], p[0] * (1.0 - p[0])
    if k == "normal":
        return p[0], p[1] ** 2
    if k == "uniform":
        return 0.5 * (p[0] + p[1]), (p[1] - p[0]) ** 2 / 12.0
    if k == "exponential":
        return 1.0 / p[0], 1.0 / p[0] ** 2
    if k == "point_mass":
        return p[0], 0.0
    a, b = p
    s = a + b
    return a / s, a * b / (s * s * (s + 1.0))


def _quad(fn, lo, hi, points=()):
    """Integrate ``fn`` over [lo, hi], splitting at interior ``points``."""
    cuts = [lo] + sorted(c for c in points if lo < c < hi) + [hi]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(fn, a, b, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=400)
        total += val
    return total


def utility_moment(model: ResponseModel, transform: UtilityTransform, order: int = 1) -> float:
    """``E[U(Y)^order]``: closed form where one exists, adaptive quadrature otherwise."""
    if order < 1 or int(order) != order:
        raise ValueError(f"order must be a positive integer, got {order!r}")
    model.check()
    bad = transform.problems()
    if bad:
        raise ConfigError(bad)
    k = int(order)

    if model.is_discrete:
        return float(sum(pr * transform(v) ** k for v, pr in model.atoms()))
    if transform.kind == "indicator":
        # U is 0/1 valued so every power equals the first
        return 1.0 - model.cdf(transform.params[0])
    lo, hi = model.support()
    if transform.kind == "identity":
        if lo < 0.0 or hi > transform.u_max:
            raise ConfigError(
                f"identity utility needs support in [0, {transform.u_max!r}], "
                f"{model.kind} has support [{lo!r}, {hi!r}]"
            )
        if model.kind == "uniform":
            return (hi ** (k + 1) - lo ** (k + 1)) / ((k + 1) * (hi - lo))
        a, b = model.params
        out = 1.0
        for j in range(k):
            out *= (a + j) / (a + b + j)
        return out
    if transform.kind == "clip_affine":
        c_lo, c_hi = transform.params
        mid_lo, mid_hi = max(lo, c_lo), min(hi, c_hi)
        upper = 1.0 - model.cdf(c_hi)
        if mid_lo >= mid_hi:
            return upper
        width = c_hi - c_lo
        body = _quad(lambda y: ((y - c_lo) / width) ** k * model.pdf(y), mid_lo, mid_hi)
        return body + upper
    center, scale = transform.params

    def fn(y):
        t = (y - center) / scale
        if t < -700.0:
            return 0.0
        return (1.0 / (1.0 + math.exp(-t))) ** k * model.pdf(y)

    if model.kind == "normal":
        m, s = model.params
        return _quad(fn, m - 40.0 * s, m + 40.0 * s, points=(center, m))
    if model.kind == "exponential":
        rate = model.params[0]
        return _quad(fn, 0.0, 50.0 / rate, points=(center,))
    return _quad(fn, lo, hi, points=(center,))


@dataclass(frozen=True)
class Truth:
    """True moments of a design, known exactly in simulation."""

    mu_B: float
    mu_W: float
    sigma_B: float
    sigma_W: float
    m_B: float
    m_W: float

    @property
    def rate_exponent(self) -> float:
        return self.m_W / self.m_B if self.m_B > 0.0 else math.nan


def default_checkpoints(horizon: int) -> tuple:
    grid = [c for c in DEFAULT_GRID if c <= horizon]
    if horizon > 0 and (not grid or grid[-1] != horizon):
        grid.append(horizon)
    return tuple(grid)


@dataclass(frozen=True)
class DesignConfig:
    arm_B: ResponseModel
    arm_W: ResponseModel
    utility: UtilityTransform
    b: float = 1.0
    w: float = 1.0
    horizon: int = 1000
    checkpoints: Optional[tuple] = None
    alpha: float = 0.05

    def __post_init__(self):
        if self.checkpoints is None:
            object.__setattr__(self, "checkpoints", default_checkpoints(int(self.horizon)))
        else:
            object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))

    def truth(self) -> Truth:
        mu_b, var_b = response_mean_var(self.arm_B)
        mu_w, var_w = response_mean_var(self.arm_W)
        return Truth(
            mu_b, mu_w, math.sqrt(var_b), math.sqrt(var_w),
            utility_moment(self.arm_B, self.utility, 1),
            utility_moment(self.arm_W, self.utility, 1),
        )

    def replace(self, **changes) -> "DesignConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "arms": {"B": self.arm_B.to_dict(), "W": self.arm_W.to_dict()},
            "utility": self.utility.to_dict(),
            "urn": {"b": self.b, "w": self.w},
            "horizon": self.horizon,
            "checkpoints": list(self.checkpoints),
            "alpha": self.alpha,
        }


def validate_config(cfg: DesignConfig, rate_diagnostics: bool = False) -> list:
    """List every violation in ``cfg``; an empty list means valid."""
    out = []
    if not (isinstance(cfg.b, (int, float)) and math.isfinite(cfg.b) and cfg.b > 0):
        out.append(f"b must be a strictly positive real, got {cfg.b!r}")
    if not (isinstance(cfg.w, (int, float)) and math.isfinite(cfg.w) and cfg.w > 0):
        out.append(f"w must be a strictly positive real, got {cfg.w!r}")
    for name, arm in (("arm_B", cfg.arm_B), ("arm_W", cfg.arm_W)):
        out.extend(f"{name}: {msg}" for msg in arm.problems())
    out.extend(f"utility: {msg}" for msg in cfg.utility.problems())
    if cfg.utility.kind == "identity" and not cfg.utility.problems():
        for name, arm in (("arm_B", cfg.arm_B), ("arm_W", cfg.arm_W)):
            if arm.problems():
                continue
            lo, hi = arm.support()
            if lo < 0.0 or hi > cfg.utility.u_max:
                out.append(
                    f"{name}: {arm.kind} support [{lo!r}, {hi!r}] is unbounded or negative "
                    f"under identity utility with u_max={cfg.utility.u_max!r}"
                )
    if not isinstance(cfg.horizon, int) or cfg.horizon < 0:
        out.append(f"horizon must be a non-negative integer, got {cfg.horizon!r}")
    cps = list(cfg.checkpoints)
    if cfg.horizon and not cps:
        out.append("checkpoints must be a non-empty list")
    if any(c < 1 for c in cps):
        out.append("checkpoints must be positive")
    if any(b <= a for a, b in zip(cps, cps[1:])):
        out.append("checkpoints must be strictly increasing")
    if isinstance(cfg.horizon, int) and any(c > cfg.horizon for c in cps):
        out.append(f"checkpoints must not exceed horizon {cfg.horizon}")
    if not 0.0 < cfg.alpha < 1.0:
        out.append(f"alpha must lie in (0, 1), got {cfg.alpha!r}")
    if rate_diagnostics and not out:
        t = cfg.truth()
        if t.m_W <= 0.0:
            out.append("m_W = E[U(Y_W)] is 0; rate diagnostics need m_W > 0")
        if t.m_B <= 0.0:
            out.append("m_B = E[U(Y_B)] is 0; rate diagnostics need m_B > 0")
    return out


def require_valid(cfg: DesignConfig, rate_diagnostics: bool = False):
    bad = validate_config(cfg, rate_diagnostics)
    if bad:
        raise ConfigError(bad)


def polya_limit_law(cfg: DesignConfig) -> Optional[tuple]:
    """Beta parameters of the limit urn proportion in the Pólya-type case.

    Applies when both arms share one discrete law whose non-zero
    reinforcements all equal a single value ``m``; the limit is then
    ``Beta(b/m, w/m)``. Returns ``None`` otherwise.
    """
    if cfg.arm_B != cfg.arm_W or not cfg.arm_B.is_discrete:
        return None
    values = {float(cfg.utility(v)) for v, pr in cfg.arm_B.atoms() if pr > 0.0}
    values.discard(0.0)
    if len(values) != 1:
        return None
    m = values.pop()
    return (cfg.b / m, cfg.w / m)


def shifted_arm(arm: ResponseModel, delta: float) -> ResponseModel:
    """The law of ``arm`` moved so its mean increases by ``delta``.

    Location families are translated; exponential and beta keep their family
    and match the new mean. Raises :class:`ConfigError` when the target mean
    is not attainable.
    """
    k, p = arm.kind, arm.params
    if k == "bernoulli":
        out = bernoulli(p[0] + delta)
    elif k == "normal":
        out = normal(p[0] + delta, p[1])
    elif k == "uniform":
        out = uniform(p[0] + delta, p[1] + delta)
    elif k == "point_mass":
        out = point_mass(p[0] + delta)
    elif k == "exponential":
        mean = 1.0 / p[0] + delta
        if mean <= 0.0:
            raise ConfigError(f"exponential mean {mean!r} is not attainable (rate must be > 0)")
        out = exponential(1.0 / mean)
    else:
        s = p[0] + p[1]
        mean = p[0] / s + delta
        out = beta(mean * s, (1.0 - mean) * s)
    bad = out.problems()
    if bad:
        raise ConfigError([f"effect {delta!r} is unrealizable: {msg}" for msg in bad])
    return out


def config_from_dict(d: dict) -> DesignConfig:
    """Build a :class:`DesignConfig` from the JSON document layout."""
    try:
        arms = d["arms"]

        def arm(spec):
            kind = spec["kind"]
            names = RESPONSE_PARAMS.get(kind)
            if names is None:
                raise ConfigError(f"unknown response kind {kind!r}")
            return ResponseModel(kind, tuple(spec["params"][n] for n in names))

        u = d["utility"]
        unames = UTILITY_PARAMS.get(u["kind"])
        if unames is None:
            raise ConfigError(f"unknown utility kind {u['kind']!r}")
        utility = UtilityTransform(u["kind"], tuple(u["params"][n] for n in unames))
        horizon = d["horizon"]
        if isinstance(horizon, float) and horizon.is_integer():
            horizon = int(horizon)
        return DesignConfig(
            arm_B=arm(arms["B"]),
            arm_W=arm(arms["W"]),
            utility=utility,
            b=d["urn"]["b"],
            w=d["urn"]["w"],
            horizon=horizon,
            checkpoints=tuple(d["checkpoints"]) if d.get("checkpoints") is not None else None,
            alpha=d.get("alpha", 0.05),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from None


def load_config(path) -> DesignConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {str(path)!r} is not valid JSON: {exc}") from None
    return config_from_dict(doc)
