"""Piecewise computation load, power coupling and per-segment bounds.

Segment indices are 1-based in the public functions (``s = 1..S``), matching
the config file; arrays internally are 0-based.

Breakpoint rule: segment ``s < S`` covers ``(L_s, L_{s-1}]`` and the last
segment covers ``[L_S, L_{S-1}]``, so a ratio sitting exactly on an interior
breakpoint belongs to the lower segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PiecewiseLoad


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class SegmentId:
    user: int
    segment: int


def _check_domain(loadfn: PiecewiseLoad, n: int, rho: float) -> None:
    if not loadfn.rho_min[n] <= rho <= 1.0:
        raise DomainError(f"rho={rho} outside [{loadfn.rho_min[n]}, 1] for user {n}")


def segment_of(loadfn: PiecewiseLoad, n: int, rho: float) -> SegmentId:
    _check_domain(loadfn, n, rho)
    bps = loadfn.breakpoints[n]
    # first segment whose (open) lower end is below rho; ties drop to the next
    for s, lower in enumerate(bps[:-1]):
        if rho > lower:
            return SegmentId(n, s + 1)
    return SegmentId(n, len(bps))


def segment_load(loadfn: PiecewiseLoad, n: int, s: int, rho):
    """Linear load of segment ``s`` evaluated at ``rho`` (no domain check)."""
    return loadfn.slopes[n, s - 1] * rho + loadfn.intercepts[n, s - 1]


def load(loadfn: PiecewiseLoad, n: int, rho: float) -> float:
    s = segment_of(loadfn, n, rho).segment
    return float(segment_load(loadfn, n, s, rho))


def computation_power(loadfn: PiecewiseLoad, n: int, rho: float, p0: float) -> float:
    return load(loadfn, n, rho) * p0


def transmit_power_from_ratio(loadfn, n, rho, p0, pmax) -> float:
    """Power left for transmission once computation is paid for; may be negative."""
    return pmax - computation_power(loadfn, n, rho, p0)


def midpoint(loadfn: PiecewiseLoad, n: int, s: int) -> float:
    e = loadfn.edges(n)
    return (e[s - 1] + e[s]) / 2.0


def midpoints(loadfn: PiecewiseLoad) -> np.ndarray:
    """``(N, S)`` array of segment midpoints."""
    e = np.hstack([np.ones((loadfn.num_users, 1)), loadfn.breakpoints])
    return (e[:, :-1] + e[:, 1:]) / 2.0


def feasible_bounds(loadfn, n, s, p0, pmax) -> tuple[float, float] | None:
    """Interval of ratios in segment ``s`` with non-negative transmit power.

    Returns ``None`` when the interval is empty.
    """
    e = loadfn.edges(n)
    a, b = loadfn.slopes[n, s - 1], loadfn.intercepts[n, s - 1]
    lo = max((pmax / p0 - b) / a, e[s])
    hi = e[s - 1]
    if lo > hi:
        return None
    return float(lo), float(hi)


def project(rho, bounds) -> np.ndarray:
    """Clamp each component into its ``(lo, hi)`` interval."""
    b = np.asarray(bounds, dtype=float).reshape(-1, 2)
    return np.clip(np.asarray(rho, dtype=float), b[:, 0], b[:, 1])
