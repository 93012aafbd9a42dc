"""Command-line front end.

Subcommands ``simulate``, ``certify``, ``check-basin``, ``verify`` and
``sweep`` all read one JSON config and write plain CSV/JSON files into the
output directory, together with the default-filled ``effective_config.json``.

Exit codes: 0 success, 1 usage or validation error, 2 infeasible
certificate, 3 bound violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as config_mod
from .certificate import build_certificate
from .config import RunConfig
from .dde import FunctionHistory, integrate, trajectory_to_csv
from .errors import CertificateInfeasible, ConfigurationError, IntegrationError
from .lyapunov import check_basin, envelope_to_csv
from .model import check_stability_condition, make_rhs, stationary_point
from .verify import (
    BOUND_VIOLATED,
    EVENT_STOPPED,
    SweepSpec,
    _jsonable,
    run_config,
    run_sweep,
    write_sweep,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_BOUND = 3

STABILITY_CONDITION = "a11*a99 > a19*a91"


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(_jsonable(doc), indent=2) + "\n")


def _infeasible_message(margin: float) -> str:
    return (f"certificate infeasible: stability condition {STABILITY_CONDITION} fails "
            f"(a11*a99 - a19*a91 = {margin!r})")


def _load_doc(args) -> dict:
    path = Path(args.config)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"no such file {str(path)!r}", "--config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", str(path)) from exc
    if not isinstance(doc, dict):
        raise ConfigurationError("config must be a JSON object", "<root>")
    if args.t_end is not None:
        doc = config_mod.set_path(doc, "numerics.t_end", args.t_end)
    if args.step is not None:
        doc = config_mod.set_path(doc, "numerics.step", args.step)
    return doc


def _out_dir(args, cfg_output: dict) -> Path:
    out = Path(args.out if args.out is not None else cfg_output["directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    step = cfg.numerics.resolved_step(_delays(cfg))
    psi = cfg.history()
    if cfg.system == "linear-delay-test":
        traj = integrate(lambda t, y, yd: -yd[0], (1.0,), psi, cfg.numerics.t_end, step)
    else:
        p = cfg.parameters
        frame = cfg.initial["coordinate-frame"]
        if frame == "original":
            psi = _shift_history(psi, stationary_point(p))
            event = lambda t, x: x[9] - 1.0  # noqa: E731
        else:
            event = lambda t, y: y[9] - 1.0  # noqa: E731
        traj = integrate(make_rhs(p, cfg.xi, frame), p.delays, psi, cfg.numerics.t_end, step, event=event)
        if traj.status == "event":
            print(f"stopped at t' = {traj.t_event!r}: organ fully destroyed (x10 = 1)", file=sys.stderr)
    trajectory_to_csv(traj, out / "trajectory.csv", cfg.numerics.output_grid_spacing)
    return EXIT_OK


def _delays(cfg: RunConfig):
    return (1.0,) if cfg.system == "linear-delay-test" else cfg.parameters.delays


def _shift_history(psi, shift):
    return FunctionHistory(lambda ts: psi.values(ts) + shift, psi.tau, psi.dim)


def cmd_certify(cfg: RunConfig, out: Path) -> int:
    ok, margin = check_stability_condition(cfg.parameters)
    if not ok:
        print(_infeasible_message(margin), file=sys.stderr)
        return EXIT_INFEASIBLE
    cert = build_certificate(cfg.parameters, cfg.choices)
    doc = cert.to_dict()
    doc["stability_margin"] = margin
    if "json" in cfg.output["formats"]:
        _write_json(out / "certificate.json", doc)
    print(json.dumps(_jsonable(doc), indent=2))
    return EXIT_OK


def cmd_check_basin(cfg: RunConfig, out: Path) -> int:
    ok, margin = check_stability_condition(cfg.parameters)
    if not ok:
        print(_infeasible_message(margin), file=sys.stderr)
        return EXIT_INFEASIBLE
    cert = build_certificate(cfg.parameters, cfg.choices)
    basin = check_basin(cert, cfg.history(), quad_points=cfg.numerics.quad_points)
    doc = basin.to_dict()
    if "json" in cfg.output["formats"]:
        _write_json(out / "basin.json", doc)
    print(json.dumps(_jsonable(doc), indent=2))
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    report = run_config(cfg)
    if "json" in cfg.output["formats"]:
        (out / "report.json").write_text(report.to_json())
    if "csv" in cfg.output["formats"] and report.env is not None and report.traj is not None:
        ts = report.traj.grid(cfg.numerics.output_grid_spacing)
        envelope_to_csv(report.certificate, report.env, ts, out / "envelope.csv")
        trajectory_to_csv(report.traj, out / "trajectory.csv", cfg.numerics.output_grid_spacing)
    print(f"verdict: {report.verdict}")
    if report.diagnostic:
        print(report.diagnostic, file=sys.stderr)
    if report.certificate is None:
        print(_infeasible_message(report.stability_margin), file=sys.stderr)
        return EXIT_INFEASIBLE
    if report.verdict in (BOUND_VIOLATED, EVENT_STOPPED):
        return EXIT_BOUND
    return EXIT_OK


def cmd_sweep(doc: dict, out: Path) -> int:
    spec = SweepSpec.from_config(doc)
    results = run_sweep(spec)
    write_sweep(spec, results, out)
    verdicts = [r.report.verdict for r in results]
    for v in sorted(set(verdicts)):
        print(f"{v}: {verdicts.count(v)}")
    return EXIT_BOUND if any(v in (BOUND_VIOLATED, EVENT_STOPPED) for v in verdicts) else EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "check-basin": cmd_check_basin,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="immunocert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["sweep"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
        sp.add_argument("--t-end", type=float, dest="t_end", metavar="REAL")
        sp.add_argument("--step", type=float, metavar="REAL")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        doc = _load_doc(args)
        if args.command == "sweep":
            norm = config_mod.normalize(doc)
            out = _out_dir(args, norm["output"])
            (out / "effective_config.json").write_text(json.dumps(norm, indent=2, sort_keys=True) + "\n")
            return cmd_sweep(doc, out)
        cfg = config_mod.parse(doc)
        out = _out_dir(args, cfg.output)
        (out / "effective_config.json").write_text(cfg.effective_json())
        return COMMANDS[args.command](cfg, out)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificateInfeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except IntegrationError as exc:
        print(f"error: integration failed: {exc}", file=sys.stderr)
        return EXIT_BOUND


if __name__ == "__main__":
    sys.exit(main())
