"""Sum-of-equivalent-rate objective and the three-stage allocation algorithm.

Stage 1 picks the receive combiner, stage 2 selects one load segment per
user by alternating optimisation over segment midpoints, and stage 3 refines
the compression ratios inside the chosen segments by projected gradient
ascent with backtracking. Transmit power is never a free variable: every
user spends exactly what is left of its budget after computation.

Two brute-force oracles (exhaustive segment search, grid search over
ratios) are provided for verification on small instances.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import beamforming as bf
from .model import Allocation, NetworkConfig, PiecewiseLoad, SolverParams
from .semantic_load import feasible_bounds, midpoints, project, segment_of

log = logging.getLogger(__name__)

# Transmit powers in (-tol * p_max, 0) are rounding noise at a feasibility
# boundary and are clamped to 0.
POWER_TOL = 1e-12


class InfeasibleError(ValueError):
    def __init__(self, users, msg="negative transmit power"):
        self.users = [int(u) for u in users]
        super().__init__(f"{msg} for users {self.users}")


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BeamformerPolicy:
    """How the receive combiner is chosen: ``mmse`` (recomputed at every
    power vector), ``zf`` (fixed from H), or ``fixed`` (a given matrix)."""

    kind: str = "mmse"
    W: np.ndarray | None = None

    @classmethod
    def mmse(cls):
        return cls("mmse")

    @classmethod
    def zf(cls):
        return cls("zf")

    @classmethod
    def fixed(cls, W):
        return cls("fixed", np.asarray(W, dtype=complex))

    def __post_init__(self):
        if self.kind not in ("mmse", "zf", "fixed"):
            raise ValueError(f"unknown beamformer policy {self.kind!r}")
        if self.kind == "fixed" and self.W is None:
            raise ValueError("fixed policy needs a matrix")

    def matrix(self, H, p, noise) -> np.ndarray:
        if self.kind == "mmse":
            return bf.mmse_matrix(H, p, noise)
        if self.kind == "zf":
            return bf.zf_matrix(H)
        return self.W


@dataclass
class TraceRecord:
    stage: str
    iteration: int
    objective: float
    rho: np.ndarray
    tau: float | None = None
    backtracks: int = 0


@dataclass
class StageTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def add(self, *args, **kwargs):
        self.records.append(TraceRecord(*args, **kwargs))

    def extend(self, other: "StageTrace"):
        self.records.extend(other.records)

    def stage(self, tag: str) -> list[TraceRecord]:
        return [r for r in self.records if r.stage == tag]

    def objectives(self, tag: str | None = None) -> np.ndarray:
        recs = self.records if tag is None else self.stage(tag)
        return np.array([r.objective for r in recs])

    def __len__(self):
        return len(self.records)


# --- objective -------------------------------------------------------------

def _loads(rho, loadfn: PiecewiseLoad, segments) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if segments is None:
        segments = [segment_of(loadfn, n, r).segment for n, r in enumerate(rho)]
    idx = np.asarray(segments) - 1
    users = np.arange(len(rho))
    return loadfn.slopes[users, idx] * rho + loadfn.intercepts[users, idx]


def transmit_powers(rho, cfg: NetworkConfig, loadfn: PiecewiseLoad, segments=None) -> np.ndarray:
    """Budget left after computation, with the given (1-based) segments or
    the segments containing ``rho``. Raises if any user goes negative."""
    pmax = cfg.max_power_watts
    pt = pmax - cfg.comp_power_coeff * _loads(rho, loadfn, segments)
    bad = pt < -POWER_TOL * pmax
    if np.any(bad):
        raise InfeasibleError(np.flatnonzero(bad))
    return np.maximum(pt, 0.0)


def evaluate(rho, H, cfg, loadfn, policy, segments=None):
    """Return ``(objective, W, transmit_powers)`` at ``rho``."""
    rho = np.asarray(rho, dtype=float)
    pt = transmit_powers(rho, cfg, loadfn, segments)
    noise = cfg.noise_watts
    W = policy.matrix(H, pt, noise)
    gamma = bf.sinr(W, H, pt, noise)
    f = float(np.sum(bf.equivalent_rate(bf.achievable_rate(gamma), rho)))
    return f, W, pt


def objective(rho, H, cfg, loadfn, policy=BeamformerPolicy(), segments=None) -> float:
    """Sum of equivalent rates at compression ratios ``rho``.

    With ``segments`` given, each user's load is the linear function of that
    segment (the stage-3 objective); otherwise the piecewise load applies.
    """
    return evaluate(rho, H, cfg, loadfn, policy, segments)[0]


def batch_objective(rhos, H, cfg, loadfn, policy, segments, chunk=4096) -> np.ndarray:
    """Vectorised objective over a ``(B, N)`` batch of ratios with fixed segments."""
    rhos = np.atleast_2d(np.asarray(rhos, dtype=float))
    H = np.asarray(H, dtype=complex)
    idx = np.asarray(segments) - 1
    users = np.arange(rhos.shape[1])
    A = loadfn.slopes[users, idx]
    B = loadfn.intercepts[users, idx]
    pmax = cfg.max_power_watts
    noise = cfg.noise_watts
    M = H.shape[0]
    out = np.empty(len(rhos))
    for start in range(0, len(rhos), chunk):
        r = rhos[start:start + chunk]
        pt = pmax - cfg.comp_power_coeff * (A * r + B)
        if np.any(pt < -POWER_TOL * pmax):
            raise InfeasibleError(np.flatnonzero(np.any(pt < -POWER_TOL * pmax, axis=0)))
        pt = np.maximum(pt, 0.0)
        if policy.kind == "mmse":
            HP = H[None, :, :] * pt[:, None, :]
            R = HP @ H.conj().T + noise * np.eye(M)
            W = np.linalg.solve(R, HP)
        else:
            W = np.broadcast_to(policy.matrix(H, None, noise), (len(r), M, H.shape[1]))
        U = np.abs(np.swapaxes(W.conj(), 1, 2) @ H) ** 2
        v = np.sum(np.abs(W) ** 2, axis=1) * noise
        desired = np.diagonal(U, axis1=1, axis2=2) * pt
        denom = np.einsum("bnk,bk->bn", U, pt) - desired + v
        gamma = np.divide(desired, denom, out=np.zeros_like(desired), where=pt > 0)
        out[start:start + chunk] = np.sum(np.log2(1.0 + gamma) / r, axis=1)
    return out


# --- stages ----------------------------------------------------------------

def stage1(H, p, noise, policy=BeamformerPolicy()) -> np.ndarray:
    return policy.matrix(H, np.asarray(p, dtype=float), noise)


def _midpoint_feasibility(cfg, loadfn):
    mids = midpoints(loadfn)
    g = loadfn.slopes * mids + loadfn.intercepts
    pmax = cfg.max_power_watts[:, None]
    feasible = pmax - cfg.comp_power_coeff * g >= -POWER_TOL * pmax
    return mids, feasible


def _theta(sel, S):
    theta = np.zeros((len(sel), S), dtype=int)
    theta[np.arange(len(sel)), sel] = 1
    return theta


def stage2_ao(H, cfg, loadfn, params, policy=BeamformerPolicy()):
    """Alternating optimisation of the segment-selection matrix.

    Each pass visits users in order; for each user every feasible segment
    midpoint is tried with the other users held, and the best one kept
    (ties go to the lowest segment index). Stops once a full pass leaves the
    selection unchanged, or after ``i_max`` passes.
    """
    N, S = loadfn.num_users, loadfn.num_segments
    mids, feasible = _midpoint_feasibility(cfg, loadfn)
    dead = ~feasible.any(axis=1)
    if dead.any():
        raise InfeasibleError(np.flatnonzero(dead), "no feasible segment")

    def f_of(sel):
        return objective(mids[np.arange(N), sel], H, cfg, loadfn, policy, sel + 1)

    sel = np.argmax(feasible, axis=1)  # first feasible = largest ratio
    f_cur = f_of(sel)
    trace = StageTrace()
    trace.add("AO", 0, f_cur, mids[np.arange(N), sel].copy())

    for i in range(1, params.i_max + 1):
        changed = False
        for n in range(N):
            values = np.zeros(S)
            for s in range(S):
                if feasible[n, s]:
                    trial = sel.copy()
                    trial[n] = s
                    values[s] = f_of(trial)
            cand = np.flatnonzero(feasible[n])
            best = cand[np.argmax(values[cand])]
            if best != sel[n]:
                sel[n] = best
                changed = True
        f_new = f_of(sel)
        trace.add("AO", i, f_new, mids[np.arange(N), sel].copy())
        f_cur = f_new
        if not changed:
            break
    else:
        log.info("AO stopped at i_max=%d passes", params.i_max)
    return _theta(sel, S), trace


def _segments(theta) -> np.ndarray:
    return np.argmax(np.asarray(theta), axis=1) + 1


def segment_bounds(theta, cfg, loadfn) -> np.ndarray:
    """``(N, 2)`` feasible interval for each user's selected segment."""
    segs = _segments(theta)
    pmax = cfg.max_power_watts
    out = []
    empty = []
    for n, s in enumerate(segs):
        b = feasible_bounds(loadfn, n, s, cfg.comp_power_coeff, pmax[n])
        if b is None:
            empty.append(n)
            b = (np.nan, np.nan)
        out.append(b)
    if empty:
        raise InfeasibleError(empty, "empty feasible interval")
    return np.array(out)


def forward_gradient(f, rho, delta, f0=None) -> np.ndarray:
    f0 = f(rho) if f0 is None else f0
    g = np.empty(len(rho))
    for n in range(len(rho)):
        step = rho.copy()
        step[n] += delta
        g[n] = (f(step) - f0) / delta
    return g


def central_gradient(f, rho, delta) -> np.ndarray:
    g = np.empty(len(rho))
    for n in range(len(rho)):
        up, down = rho.copy(), rho.copy()
        up[n] += delta
        down[n] -= delta
        g[n] = (f(up) - f(down)) / (2 * delta)
    return g


def stage3_gradient_ascent(theta, H, cfg, loadfn, params, policy=BeamformerPolicy()):
    """Projected gradient ascent on the ratios inside the selected segments.

    Starts at the segment midpoints. Each iteration takes a forward-difference
    gradient, then backtracks from ``tau_bar`` (shrinking by ``alpha``) until
    the projected trial point satisfies the Armijo sufficient-increase test.
    If ``b_max`` shrinks never satisfy it, the best strictly improving trial
    is kept; if there is none, the ascent stops.
    """
    segs = _segments(theta)
    bounds = segment_bounds(theta, cfg, loadfn)
    mids = midpoints(loadfn)[np.arange(len(segs)), segs - 1]

    def f(r):
        return objective(r, H, cfg, loadfn, policy, segs)

    rho = project(mids, bounds)
    f_cur = f(rho)
    trace = StageTrace()
    trace.add("GA", 0, f_cur, rho.copy())

    for t in range(1, params.t_max + 1):
        grad = forward_gradient(f, rho, params.delta, f_cur)
        gnorm2 = float(grad @ grad)
        if gnorm2 == 0.0:
            break
        tau = params.tau_bar
        best = None  # (f, rho, tau, backtracks)
        accepted = None
        for b in range(params.b_max + 1):
            trial = project(rho + tau * grad, bounds)
            f_trial = f(trial)
            if f_trial >= f_cur + params.xi * tau * gnorm2:
                accepted = (f_trial, trial, tau, b)
                break
            if f_trial > f_cur and (best is None or f_trial > best[0]):
                best = (f_trial, trial, tau, b)
            tau *= params.alpha
        if accepted is None:
            accepted = best
        if accepted is None:
            break
        f_new, rho, tau, b = accepted
        trace.add("GA", t, f_new, rho.copy(), tau, b)
        converged = abs(f_new - f_cur) < params.epsilon
        f_cur = f_new
        if converged:
            break
    return rho, trace


def allocation_at(rho, theta, H, cfg, loadfn, policy) -> Allocation:
    f, W, pt = evaluate(rho, H, cfg, loadfn, policy, _segments(theta))
    return Allocation(W=W, transmit_power=pt, rho=np.asarray(rho, dtype=float),
                      theta=np.asarray(theta), objective=f)


def run_three_stage(H, cfg, loadfn, params, policy=BeamformerPolicy()):
    """Full pipeline; returns ``(Allocation, StageTrace)``.

    The combiner of stage 1 is computed at the uncompressed operating point
    (every ratio at 1); under the MMSE policy it is recomputed at the final
    powers for the returned allocation.
    """
    ones = np.ones(loadfn.num_users)
    p_init = np.maximum(cfg.max_power_watts - cfg.comp_power_coeff * _loads(ones, loadfn, None), 0.0)
    stage1(H, p_init, cfg.noise_watts, policy)
    theta, trace = stage2_ao(H, cfg, loadfn, params, policy)
    rho, ga_trace = stage3_gradient_ascent(theta, H, cfg, loadfn, params, policy)
    trace.extend(ga_trace)
    return allocation_at(rho, theta, H, cfg, loadfn, policy), trace


# --- oracles ---------------------------------------------------------------

def oracle_exhaustive_theta(H, cfg, loadfn, policy=BeamformerPolicy(), limit=10**6):
    """Global argmax of the midpoint objective over all S^N selections."""
    N, S = loadfn.num_users, loadfn.num_segments
    if S ** N > limit:
        raise InstanceTooLargeError(f"S^N = {S ** N} exceeds {limit}")
    mids, feasible = _midpoint_feasibility(cfg, loadfn)
    best_sel, best_f = None, -np.inf
    for combo in itertools.product(range(S), repeat=N):
        sel = np.array(combo)
        if not feasible[np.arange(N), sel].all():
            continue
        val = objective(mids[np.arange(N), sel], H, cfg, loadfn, policy, sel + 1)
        if val > best_f:
            best_sel, best_f = sel, val
    if best_sel is None:
        raise InfeasibleError(np.flatnonzero(~feasible.any(axis=1)), "no feasible selection")
    return _theta(best_sel, S), best_f


def oracle_grid_rho(theta, H, cfg, loadfn, policy=BeamformerPolicy(), step=1e-3):
    """Grid argmax of the fixed-segment objective over the feasible box.

    Each axis is sampled at ``lo, lo+step, ...`` with ``hi`` always included.
    """
    segs = _segments(theta)
    N = len(segs)
    if N > 3:
        raise InstanceTooLargeError("grid oracle supports at most 3 users")
    bounds = segment_bounds(theta, cfg, loadfn)
    axes = []
    for lo, hi in bounds:
        ax = np.arange(lo, hi, step) if hi > lo else np.array([lo])
        ax = np.append(ax[ax < hi], hi)
        if len(ax) > 10**4:
            raise InstanceTooLargeError("more than 1e4 grid points per axis")
        axes.append(ax)
    grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    values = batch_objective(grid, H, cfg, loadfn, policy, segs)
    k = int(np.argmax(values))
    return grid[k], float(values[k])
