"""Scheme runners, Monte-Carlo sweeps and CSV output."""

from __future__ import annotations

import csv
import enum
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import beamforming as bf
from .channel import RngStream, sample_channel
from .model import Bundle, ConfigError, default_load, validate
from .optimizer import (
    BeamformerPolicy,
    StageTrace,
    allocation_at,
    run_three_stage,
    stage2_ao,
)
from .semantic_load import midpoints

log = logging.getLogger(__name__)

POWER_SUM_TOL = 1e-9
SWEEP_HEADER = ["param", "value", "scheme", "trials", "mean_objective", "std_objective", "errors"]
TRACE_HEADER = ["stage", "iteration", "objective", "tau", "backtracks"]
POWER_HEADER = ["scheme", "user", "rho", "segment", "transmit_power", "computation_power",
                "total_power", "max_power", "objective", "flag"]
SWEEP_PARAMS = ("num_users", "noise_power_dbm", "comp_power_coeff", "max_power_dbm")


class Scheme(enum.Enum):
    PSC = "psc"
    PSC_S2 = "psc-s2"
    PSC_ZF = "psc-zf"
    NON_SEMANTIC = "non-semantic"

    @property
    def label(self) -> str:
        return {"psc": "PSC", "psc-s2": "PSC-S2", "psc-zf": "PSC-ZF",
                "non-semantic": "NonSemantic"}[self.value]


@dataclass
class RunRecord:
    scheme: Scheme
    objective: float
    rho: np.ndarray
    transmit_power: np.ndarray
    computation_power: np.ndarray
    max_power: np.ndarray
    segments: np.ndarray  # 1-based; 0 for the uncompressed baseline
    trace: StageTrace = field(default_factory=StageTrace)
    W: np.ndarray | None = None


def run_scheme(scheme: Scheme, H, bundle: Bundle) -> RunRecord:
    cfg, load, params = bundle
    pmax = cfg.max_power_watts
    p0 = cfg.comp_power_coeff

    if scheme is Scheme.NON_SEMANTIC:
        W = bf.mmse_matrix(H, pmax, cfg.noise_watts)
        f = float(np.sum(bf.achievable_rate(bf.sinr(W, H, pmax, cfg.noise_watts))))
        trace = StageTrace()
        trace.add("NS", 0, f, np.ones(cfg.num_users))
        return RunRecord(scheme, f, np.ones(cfg.num_users), pmax.copy(),
                         np.zeros(cfg.num_users), pmax, np.zeros(cfg.num_users, dtype=int), trace, W)

    if scheme is Scheme.PSC_S2:
        theta, trace = stage2_ao(H, cfg, load, params, BeamformerPolicy.mmse())
        segs = np.argmax(theta, axis=1)
        rho = midpoints(load)[np.arange(cfg.num_users), segs]
        alloc = allocation_at(rho, theta, H, cfg, load, BeamformerPolicy.mmse())
    else:
        policy = BeamformerPolicy.zf() if scheme is Scheme.PSC_ZF else BeamformerPolicy.mmse()
        alloc, trace = run_three_stage(H, cfg, load, params, policy)
    segs = alloc.segments
    users = np.arange(cfg.num_users)
    pc = p0 * (load.slopes[users, segs] * alloc.rho + load.intercepts[users, segs])
    return RunRecord(scheme, alloc.objective, alloc.rho, alloc.transmit_power, pc, pmax,
                     segs + 1, trace, alloc.W)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def trace_rows(record: RunRecord) -> list[list[str]]:
    return [[r.stage, str(r.iteration), _fmt(r.objective), _fmt(r.tau), str(r.backtracks)]
            for r in record.trace.records]


def emit_trace(record: RunRecord, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        w.writerows(trace_rows(record))


def power_split_report(records: Sequence[RunRecord]) -> list[list[str]]:
    """Per-user power split; rows whose total misses the budget are flagged."""
    rows = []
    for rec in records:
        for n in range(len(rec.rho)):
            total = rec.transmit_power[n] + rec.computation_power[n]
            ok = abs(total - rec.max_power[n]) <= POWER_SUM_TOL
            rows.append([rec.scheme.label, str(n + 1), _fmt(rec.rho[n]), str(rec.segments[n]),
                         _fmt(rec.transmit_power[n]), _fmt(rec.computation_power[n]),
                         _fmt(total), _fmt(rec.max_power[n]), _fmt(rec.objective),
                         "ok" if ok else "SUM_MISMATCH"])
    return rows


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# --- sweeps ----------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    trials: int = 50
    schemes: tuple[Scheme, ...] = (Scheme.PSC,)
    jobs: int = 1

    def __post_init__(self):
        errors = []
        if self.param not in SWEEP_PARAMS:
            errors.append(f"cannot sweep {self.param!r}; choose from {', '.join(SWEEP_PARAMS)}")
        if not self.values:
            errors.append("sweep needs at least one value")
        if not self.schemes:
            errors.append("sweep needs at least one scheme")
        if self.trials < 1:
            errors.append("trials must be at least 1")
        if errors:
            raise ConfigError(errors)


def point_bundle(base: Bundle, param: str, value) -> Bundle:
    """Bundle for one sweep point.

    The generated default load is tied to the power budget, so it is rebuilt
    when the user count or budget changes. An explicit load is always kept,
    and so is any load when sweeping noise or the computation coefficient
    (the load describes the task, not the hardware).
    """
    cfg = base.config.replace(**{param: value})
    load = base.load
    is_default = base.load == default_load(base.config)
    if is_default and param in ("num_users", "max_power_dbm"):
        load = default_load(cfg)
    return validate(cfg, load, base.params)


@dataclass
class TrialOutcome:
    objective: float | None
    error: str | None = None


def _run_trial(bundle: Bundle, schemes, trial: int) -> list[TrialOutcome]:
    H = sample_channel(bundle.config, RngStream(bundle.config.rng_seed, trial))
    out = []
    for scheme in schemes:
        try:
            out.append(TrialOutcome(run_scheme(scheme, H, bundle).objective))
        except (ValueError, np.linalg.LinAlgError) as exc:
            out.append(TrialOutcome(None, type(exc).__name__))
    return out


def _run_point(args):
    bundle, schemes, trials = args
    return [_run_trial(bundle, schemes, t) for t in range(trials)]


@dataclass
class SweepResult:
    rows: list[list[str]]
    # (value, scheme) -> per-trial outcomes, in trial order
    outcomes: dict
    all_infeasible: bool

    def objectives(self, value, scheme: Scheme) -> np.ndarray:
        return np.array([o.objective for o in self.outcomes[value, scheme] if o.error is None])

    def mean(self, value, scheme: Scheme) -> float:
        return float(np.mean(self.objectives(value, scheme)))


def run_sweep(spec: SweepSpec, base: Bundle) -> SweepResult:
    bundles = [point_bundle(base, spec.param, v) for v in spec.values]
    tasks = [(b, spec.schemes, spec.trials) for b in bundles]
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]

    rows = []
    outcomes = {}
    n_fail = n_total = 0
    all_infeasible = True
    for value, per_trial in zip(spec.values, results):
        for k, scheme in enumerate(spec.schemes):
            trial_out = [t[k] for t in per_trial]
            outcomes[value, scheme] = trial_out
            ok = np.array([o.objective for o in trial_out if o.error is None])
            errs = [(i, o.error) for i, o in enumerate(trial_out) if o.error is not None]
            n_total += len(trial_out)
            n_fail += len(errs)
            all_infeasible &= all(e == "InfeasibleError" for _, e in errs) and len(errs) == len(trial_out)
            mean = float(np.mean(ok)) if len(ok) else None
            std = float(np.std(ok, ddof=1)) if len(ok) > 1 else None
            rows.append([spec.param, _fmt(value), scheme.label, str(spec.trials),
                         _fmt(mean), _fmt(std), str(len(errs))])
            for i, kind in errs:
                rows.append([spec.param, _fmt(value), scheme.label, "", "", "", f"trial {i}: {kind}"])
    if n_fail:
        log.warning("%d of %d trials failed", n_fail, n_total)
    return SweepResult(rows, outcomes, all_infeasible)
