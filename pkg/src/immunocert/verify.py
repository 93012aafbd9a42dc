"""End-to-end verification of the decay estimates, and parameter sweeps.

A run builds the certificate, checks the basin hypotheses on the initial
data, integrates the shifted system and compares the trajectory with the
guaranteed floors, organ-damage bound and exponential envelopes.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import config as config_mod
from .certificate import Certificate, CertificateChoices, build_certificate
from .config import Numerics, RunConfig
from .dde import History, Trajectory, integrate
from .errors import CertificateInfeasible, IntegrationError
from .lyapunov import (
    BasinResult,
    EnvelopeBound,
    check_basin,
    default_monitor_grid,
    envelope,
    monitor_differential_inequality,
)
from .model import ModelParameters, XiFunction, check_stability_condition, make_rhs, stationary_point

VERIFIED = "verified"
HYPOTHESES_FAILED = "hypotheses-failed"
BOUND_VIOLATED = "bound-violated"
EVENT_STOPPED = "event-stopped"

XI_CLAMP_TOL = 1e-12


@dataclass
class VerificationReport:
    verdict: str
    stability_margin: float
    certificate: Certificate | None = None
    basin: BasinResult | None = None
    trajectory: dict | None = None
    max_ratio: list[float] | None = None
    floor_violations: int | None = None
    x10_max: float | None = None
    monitor: dict | None = None
    bound_violated_by_event: bool = False
    diagnostic: str | None = None
    # not serialised; kept for callers that want to post-process
    traj: Trajectory | None = field(default=None, repr=False)
    env: EnvelopeBound | None = field(default=None, repr=False)

    @property
    def max_ratio_overall(self) -> float | None:
        return None if self.max_ratio is None else max(self.max_ratio)

    @property
    def v0(self) -> float | None:
        return None if self.basin is None else self.basin.v0.total

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "stability_margin": self.stability_margin,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "basin": None if self.basin is None else self.basin.to_dict(),
            "trajectory": self.trajectory,
            "max_ratio": self.max_ratio,
            "max_ratio_overall": self.max_ratio_overall,
            "floor_violations": self.floor_violations,
            "x10_max": self.x10_max,
            "monitor": self.monitor,
            "bound_violated_by_event": self.bound_violated_by_event,
            "diagnostic": self.diagnostic,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _ratios(y: np.ndarray, b: np.ndarray) -> np.ndarray:
    absy = np.abs(y)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(b > 0, absy / np.where(b > 0, b, 1.0), np.where(absy > 0, np.inf, 0.0))
    return r.max(axis=0)


def run_verification(
    p: ModelParameters,
    xi: XiFunction,
    choices: CertificateChoices,
    psi: History,
    t_end: float | None = None,
    numerics: Numerics | None = None,
) -> VerificationReport:
    """Full pipeline for shifted-frame initial data ``psi``."""
    numerics = Numerics() if numerics is None else numerics
    t_end = numerics.t_end if t_end is None else t_end
    ok, margin = check_stability_condition(p)
    if not ok:
        return VerificationReport(HYPOTHESES_FAILED, margin,
                                  diagnostic=f"stability condition fails: a11*a99 - a19*a91 = {margin!r}")
    try:
        cert = build_certificate(p, choices)
    except CertificateInfeasible as exc:
        return VerificationReport(HYPOTHESES_FAILED, margin, diagnostic=str(exc))

    basin = check_basin(cert, psi, quad_points=numerics.quad_points)
    if not basin.passed:
        return VerificationReport(HYPOTHESES_FAILED, margin, cert, basin,
                                  diagnostic=f"basin conditions fail: {basin.failed_items()}")

    step = numerics.resolved_step(p.delays)
    rhs = make_rhs(p, xi, "shifted", xi_tol=XI_CLAMP_TOL)
    try:
        traj = integrate(rhs, p.delays, psi, t_end, step, event=lambda t, y: y[9] - 1.0)
    except IntegrationError as exc:
        return VerificationReport(BOUND_VIOLATED, margin, cert, basin,
                                  diagnostic=f"integration failed: {exc}")

    env = envelope(cert, basin.v0)
    ts = traj.grid(numerics.output_grid_spacing or step)
    y = traj(ts)
    ratios = _ratios(y, env.bound(ts))
    floor = y + stationary_point(p)
    floor_violations = int(np.count_nonzero(floor < -numerics.floor_tol))
    x10_max = float(np.max(y[:, 9]))

    meta = {"status": traj.status, "t_end": traj.t_end, "t_event": traj.t_event,
            "step": step, "grid_size": int(ts.size)}
    report = VerificationReport(VERIFIED, margin, cert, basin, meta, [float(r) for r in ratios],
                                floor_violations, x10_max, traj=traj, env=env)

    if traj.status == "event":
        report.verdict = EVENT_STOPPED
        report.bound_violated_by_event = True
        report.diagnostic = "organ fully destroyed at t' under passing hypotheses; numerics or implementation fault"
        return report

    grid = default_monitor_grid(traj, numerics.monitor_points)
    recs = monitor_differential_inequality(cert, traj, grid, numerics.quad_points)
    bad = [r for r in recs if r.violated]
    report.monitor = {
        "points": len(recs),
        "violations": len(bad),
        "min_slack": min(r.slack for r in recs),
        "violation_times": [r.t for r in bad],
    }

    if (max(ratios) > 1.0 + numerics.tol_bound or floor_violations or not x10_max < 1.0 or bad):
        report.verdict = BOUND_VIOLATED
    return report


def run_config(cfg: RunConfig) -> VerificationReport:
    return run_verification(cfg.parameters, cfg.xi, cfg.choices, cfg.history(), numerics=cfg.numerics)


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian product of ``axes`` applied to ``base`` (a config document)."""

    base: dict
    axes: tuple[tuple[str, tuple[Any, ...]], ...]
    workers: int = 1
    output_key: str = "sweep"

    def __post_init__(self):
        if not self.axes:
            raise ValueError("a sweep needs at least one axis")
        for path, values in self.axes:
            if not values:
                raise ValueError(f"axis {path!r} has no values")

    @classmethod
    def from_config(cls, doc: dict) -> "SweepSpec":
        norm = config_mod.normalize(doc)
        if "sweep" not in norm:
            raise config_mod.ConfigurationError("missing 'sweep' section", "sweep")
        base = {k: v for k, v in norm.items() if k != "sweep"}
        axes = tuple((ax["path"], tuple(ax["values"])) for ax in norm["sweep"]["axes"])
        return cls(base, axes, norm["sweep"]["workers"])

    def points(self) -> list[tuple[int, dict]]:
        names = [a for a, _ in self.axes]
        combos = itertools.product(*(vals for _, vals in self.axes))
        return [(i, dict(zip(names, combo))) for i, combo in enumerate(combos)]

    def config_for(self, point: dict) -> dict:
        doc = self.base
        for path, value in point.items():
            doc = config_mod.set_path(doc, path, value)
        return doc


@dataclass
class SweepResult:
    index: int
    point: dict
    report: VerificationReport


def _run_point(args) -> SweepResult:
    index, point, doc = args
    try:
        cfg = config_mod.parse(doc)
    except config_mod.ConfigurationError as exc:
        return SweepResult(index, point, VerificationReport(HYPOTHESES_FAILED, math.nan,
                                                            diagnostic=f"invalid configuration: {exc}"))
    try:
        report = run_config(cfg)
    except Exception as exc:  # a sweep never aborts on one bad point
        report = VerificationReport(BOUND_VIOLATED, math.nan, diagnostic=f"{type(exc).__name__}: {exc}")
    report.traj = None
    report.env = None
    return SweepResult(index, point, report)


def run_sweep(spec: SweepSpec) -> list[SweepResult]:
    """Run every grid point independently; results ordered by point index."""
    jobs = [(i, pt, spec.config_for(pt)) for i, pt in spec.points()]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    return sorted(results, key=lambda r: r.index)


SUMMARY_FIELDS = ("verdict", "max_ratio", "V0", "omega", "q")


def sweep_summary_csv(spec: SweepSpec, results: list[SweepResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    axis_names = [a for a, _ in spec.axes]
    w.writerow(["index"] + axis_names + list(SUMMARY_FIELDS))
    for res in results:
        rep = res.report
        cert = rep.certificate
        row = [res.index] + [json.dumps(res.point[a]) for a in axis_names] + [
            rep.verdict,
            _fmt(rep.max_ratio_overall),
            _fmt(rep.v0),
            _fmt(None if cert is None else cert.omega),
            _fmt(None if cert is None else cert.q),
        ]
        w.writerow(row)
    return buf.getvalue()


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def write_sweep(spec: SweepSpec, results: list[SweepResult], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.csv").write_text(sweep_summary_csv(spec, results))
    for res in results:
        doc = {"index": res.index, "point": res.point, "report": res.report.to_dict()}
        (out / f"point_{res.index:04d}.json").write_text(json.dumps(_jsonable(doc), indent=2) + "\n")
    return out
