"""Domain types, configuration parsing, validation and unit conversions.

Everything downstream works in linear units (watts, linear gains); dB/dBm
only appear in :class:`NetworkConfig` fields and the config file.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Raised when a configuration bundle violates one or more invariants."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def dbm_to_watts(x: float) -> float:
    return 10.0 ** (x / 10.0) * 1e-3


def watts_to_dbm(x: float) -> float:
    return 10.0 * math.log10(x / 1e-3)


def db_to_linear(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0) if np.ndim(x) else 10.0 ** (x / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x) if np.ndim(x) else 10.0 * math.log10(x)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkConfig:
    num_users: int = 8
    num_antennas: int = 16
    channel_gain_db: float = -90.0
    noise_power_dbm: float = -10.0
    comp_power_coeff: float = 1.0
    # scalar (uniform) or one entry per user
    max_power_dbm: float | tuple[float, ...] = 30.0
    rng_seed: int = 0

    @property
    def beta(self) -> float:
        return db_to_linear(self.channel_gain_db)

    @property
    def noise_watts(self) -> float:
        return dbm_to_watts(self.noise_power_dbm)

    @property
    def max_power_watts(self) -> np.ndarray:
        """Per-user power budget in watts, always an N-vector."""
        if isinstance(self.max_power_dbm, (int, float)):
            dbm = np.full(self.num_users, float(self.max_power_dbm))
        else:
            dbm = np.asarray(self.max_power_dbm, dtype=float)
        return 10.0 ** (dbm / 10.0) * 1e-3

    def replace(self, **changes) -> "NetworkConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SolverParams:
    """Hyper-parameters of the AO and gradient-ascent stages."""

    delta: float = 1e-6
    tau_bar: float = 1e-3
    alpha: float = 0.5
    xi: float = 0.1
    epsilon: float = 1e-6
    t_max: int = 1000
    i_max: int = 100
    b_max: int = 30

    def replace(self, **changes) -> "SolverParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class PiecewiseLoad:
    """Per-user piecewise-linear computation load.

    Arrays are ``(N, S)``. ``breakpoints[n, s-1]`` is the lower end of
    segment ``s``; the implicit upper end of segment 1 is 1.0.
    """

    slopes: np.ndarray
    intercepts: np.ndarray
    breakpoints: np.ndarray

    def __post_init__(self):
        for name in ("slopes", "intercepts", "breakpoints"):
            object.__setattr__(self, name, _frozen(np.atleast_2d(getattr(self, name))))

    @property
    def num_users(self) -> int:
        return self.slopes.shape[0]

    @property
    def num_segments(self) -> int:
        return self.slopes.shape[1]

    @property
    def rho_min(self) -> np.ndarray:
        return self.breakpoints[:, -1]

    def edges(self, n: int) -> np.ndarray:
        """Breakpoints of user ``n`` including the leading 1.0: [L0, L1, ..., LS]."""
        return np.concatenate(([1.0], self.breakpoints[n]))

    def users(self, idx) -> "PiecewiseLoad":
        idx = np.atleast_1d(idx)
        return PiecewiseLoad(self.slopes[idx], self.intercepts[idx], self.breakpoints[idx])

    def __eq__(self, other):
        if not isinstance(other, PiecewiseLoad):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("slopes", "intercepts", "breakpoints")
        )

    __hash__ = None


DEFAULT_BREAKPOINTS = (0.75, 0.55, 0.35, 0.2)
DEFAULT_SLOPES = (-0.4, -1.2, -3.0, -8.0)
DEFAULT_LOAD_AT_ONE = 0.1
DEFAULT_OVERLOAD = 1.2


def continuous_load(slopes, breakpoints, load_at_one):
    """Intercepts making ``g`` continuous, starting from ``g(1) = load_at_one``."""
    intercepts = []
    upper, g_upper = 1.0, load_at_one
    for a, lower in zip(slopes, breakpoints):
        b = g_upper - a * upper
        intercepts.append(b)
        upper, g_upper = lower, a * lower + b
    return np.array(intercepts)


def default_load(cfg: NetworkConfig) -> PiecewiseLoad:
    """Four-segment load per user, scaled so ``g(rho_min) p0 = 1.2 p_max``.

    The shape (slope magnitude growing as rho shrinks) is fixed; only the
    overall scale depends on ``cfg``.
    """
    slopes = np.array(DEFAULT_SLOPES)
    bps = np.array(DEFAULT_BREAKPOINTS)
    icpt = continuous_load(slopes, bps, DEFAULT_LOAD_AT_ONE)
    g_min = slopes[-1] * bps[-1] + icpt[-1]
    pmax = cfg.max_power_watts
    scale = DEFAULT_OVERLOAD * pmax / (cfg.comp_power_coeff * g_min)
    n = cfg.num_users
    return PiecewiseLoad(
        slopes=scale[:, None] * slopes[None, :],
        intercepts=scale[:, None] * icpt[None, :],
        breakpoints=np.tile(bps, (n, 1)),
    )


@dataclass(frozen=True)
class Bundle:
    """A validated (config, load, params) triple plus non-fatal warnings."""

    config: NetworkConfig
    load: PiecewiseLoad
    params: SolverParams
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __iter__(self):
        return iter((self.config, self.load, self.params))


def validate(cfg: NetworkConfig, load: PiecewiseLoad, params: SolverParams) -> Bundle:
    errors: list[str] = []
    warnings: list[str] = []

    if not (isinstance(cfg.num_users, (int, np.integer)) and cfg.num_users >= 1):
        errors.append("num_users must be a positive integer")
    if not (isinstance(cfg.num_antennas, (int, np.integer)) and cfg.num_antennas >= 1):
        errors.append("num_antennas must be a positive integer")
    if not errors and cfg.num_users > cfg.num_antennas:
        errors.append("N ≤ M violated")
    if not cfg.comp_power_coeff > 0:
        errors.append("comp_power_coeff must be positive")
    if not (math.isfinite(cfg.noise_power_dbm) and cfg.noise_watts > 0):
        errors.append("noise power must be positive")
    if not math.isfinite(cfg.channel_gain_db):
        errors.append("channel_gain_db must be finite")
    if not 0 <= cfg.rng_seed < 2**64:
        errors.append("seed must be a 64-bit unsigned integer")
    pmax = cfg.max_power_watts
    if pmax.shape != (cfg.num_users,):
        errors.append("max_power_dbm must be a scalar or have one entry per user")
    elif not np.all(np.isfinite(pmax) & (pmax > 0)):
        errors.append("nonpositive max power")

    if not params.delta > 0:
        errors.append("delta must be positive")
    if not params.tau_bar > 0:
        errors.append("tau_bar must be positive")
    if not 0 < params.alpha < 1:
        errors.append("alpha must lie in (0, 1)")
    if not 0 < params.xi < 1:
        errors.append("xi must lie in (0, 1)")
    if not params.epsilon > 0:
        errors.append("epsilon must be positive")
    for name in ("t_max", "i_max", "b_max"):
        if getattr(params, name) < 1:
            errors.append(f"{name} must be at least 1")

    shapes = {load.slopes.shape, load.intercepts.shape, load.breakpoints.shape}
    if len(shapes) != 1:
        errors.append("dimension mismatch between slopes, intercepts and breakpoints")
    elif load.num_users != cfg.num_users:
        errors.append(f"dimension mismatch: load has {load.num_users} users, config has {cfg.num_users}")
    else:
        if np.any(load.slopes >= 0):
            errors.append("slopes must be negative")
        if np.any(load.intercepts <= 0):
            errors.append("intercepts must be positive")
        for n in range(load.num_users):
            e = load.edges(n)
            if np.any(np.diff(e) >= 0) or e[-1] <= 0:
                errors.append(f"user {n + 1}: breakpoints not strictly decreasing in (0, 1)")
                continue
            upper = load.slopes[n, :-1] * e[1:-1] + load.intercepts[n, :-1]
            lower = load.slopes[n, 1:] * e[1:-1] + load.intercepts[n, 1:]
            if np.any(lower < upper - 1e-12 * np.abs(upper)):
                warnings.append(f"user {n + 1}: load is not non-increasing across a breakpoint")
            if not errors and pmax.shape == (cfg.num_users,):
                g_min = load.slopes[n, -1] * e[-1] + load.intercepts[n, -1]
                if g_min * cfg.comp_power_coeff < pmax[n]:
                    warnings.append(f"user {n + 1}: g(rho_min) p0 < p_max, power-exhaustion premise fails")

    if errors:
        raise ConfigError(errors)
    for w in warnings:
        log.warning(w)
    return Bundle(cfg, load, params, tuple(warnings))


def validate_theta(theta: np.ndarray) -> None:
    theta = np.asarray(theta)
    if theta.ndim != 2 or not np.all((theta == 0) | (theta == 1)) or not np.all(theta.sum(axis=1) == 1):
        raise ConfigError(["non-one-hot Θ"])


@dataclass(frozen=True, eq=False)
class Allocation:
    W: np.ndarray
    transmit_power: np.ndarray
    rho: np.ndarray
    theta: np.ndarray
    objective: float

    @property
    def segments(self) -> np.ndarray:
        """0-based selected segment per user."""
        return np.argmax(self.theta, axis=1)


# --- config file -----------------------------------------------------------

_CONFIG_KEYS = {
    "num_users": ("config", int),
    "num_antennas": ("config", int),
    "channel_gain_db": ("config", float),
    "noise_power_dbm": ("config", float),
    "comp_power_coeff": ("config", float),
    "max_power_dbm": ("config", None),
    "seed": ("config", int),
    "delta": ("params", float),
    "tau_bar": ("params", float),
    "alpha": ("params", float),
    "xi": ("params", float),
    "epsilon": ("params", float),
    "t_max": ("params", int),
    "i_max": ("params", int),
    "b_max": ("params", int),
}
_SEGMENT_KEY = re.compile(r"segment\.(\d+)\.(\d+)$")


@dataclass(frozen=True)
class ConfigFile:
    """Parsed contents of a key = value config file (not yet validated)."""

    config: NetworkConfig
    params: SolverParams
    segments: dict[tuple[int, int], tuple[float, float, float]]

    @property
    def explicit_load(self) -> bool:
        return bool(self.segments)

    def build_load(self, cfg: NetworkConfig | None = None) -> PiecewiseLoad:
        cfg = cfg or self.config
        if not self.segments:
            return default_load(cfg)
        return segments_to_load(self.segments, cfg.num_users)

    def bundle(self, cfg: NetworkConfig | None = None) -> Bundle:
        cfg = cfg or self.config
        return validate(cfg, self.build_load(cfg), self.params)


def segments_to_load(segments, num_users: int) -> PiecewiseLoad:
    users = sorted({n for n, _ in segments})
    if users != list(range(1, num_users + 1)):
        raise ConfigError([f"segment lines must cover users 1..{num_users} (got {users})"])
    counts = set()
    for n in users:
        ss = sorted(s for m, s in segments if m == n)
        if ss != list(range(1, len(ss) + 1)):
            raise ConfigError([f"user {n}: segment indices must be 1..S without gaps"])
        counts.add(len(ss))
    if len(counts) != 1:
        raise ConfigError(["dimension mismatch: every user needs the same number of segments"])
    S = counts.pop()
    arr = np.empty((num_users, S, 3))
    for (n, s), v in segments.items():
        arr[n - 1, s - 1] = v
    return PiecewiseLoad(arr[..., 0], arr[..., 1], arr[..., 2])


def parse_config(text: str) -> ConfigFile:
    cfg_kw: dict = {}
    par_kw: dict = {}
    segments: dict = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value'")
            continue
        key, value = (t.strip() for t in line.split("=", 1))
        m = _SEGMENT_KEY.match(key)
        try:
            if m:
                parts = [float(v) for v in value.split(",")]
                if len(parts) != 3:
                    raise ValueError("segment needs A,B,L")
                segments[int(m.group(1)), int(m.group(2))] = tuple(parts)
            elif key in _CONFIG_KEYS:
                target, conv = _CONFIG_KEYS[key]
                if key == "max_power_dbm":
                    vals = [float(v) for v in value.split(",")]
                    parsed = vals[0] if len(vals) == 1 else tuple(vals)
                else:
                    parsed = conv(value)
                if target == "config":
                    cfg_kw["rng_seed" if key == "seed" else key] = parsed
                else:
                    par_kw[key] = parsed
            else:
                errors.append(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            errors.append(f"line {lineno}: bad value for {key!r} ({exc})")
    if errors:
        raise ConfigError(errors)
    return ConfigFile(NetworkConfig(**cfg_kw), SolverParams(**par_kw), segments)


def load_config(path: str | Path) -> ConfigFile:
    return parse_config(Path(path).read_text(encoding="utf-8"))
