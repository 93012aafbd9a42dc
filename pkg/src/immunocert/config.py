"""Run configuration: a single JSON document, validated and default-filled.

Top-level keys: ``system``, ``parameters``, ``xi``, ``choices``, ``initial``,
``numerics``, ``output`` and (for sweeps) ``sweep``. Unknown keys are errors.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .certificate import KAPPA_NAMES, THETA_NAMES, CertificateChoices
from .dde import ConstantHistory, History, TableHistory
from .errors import ConfigurationError
from .model import ModelParameters, XiFunction, stationary_point

SYSTEMS = ("immune", "linear-delay-test")
FRAMES = ("original", "shifted")

DEFAULT_INITIAL_VALUES = [1e-3] * 9 + [0.0]


@dataclass(frozen=True)
class Numerics:
    step: float | None = None  # None: tau_min / 20
    t_end: float = 50.0
    quad_points: int = 64
    output_grid_spacing: float | None = None  # None: step
    monitor_points: int = 100
    tol_bound: float = 1e-6
    floor_tol: float = 1e-10

    def resolved_step(self, delays) -> float:
        return self.step if self.step is not None else min(delays) / 20.0


@dataclass(frozen=True)
class RunConfig:
    system: str
    parameters: ModelParameters
    xi: XiFunction
    choices: CertificateChoices
    initial: dict
    numerics: Numerics
    output: dict
    sweep: dict | None = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def history(self) -> History:
        """Initial data in the shifted frame (psi = phi - X* for original-frame input)."""
        return build_history(self.initial, self.parameters, self.system)

    def effective(self) -> dict:
        return copy.deepcopy(self.raw)

    def effective_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"


def _expect(cond: bool, msg: str, path: str) -> None:
    if not cond:
        raise ConfigurationError(msg, path)


def _real(v, path, positive=False, allow_none=False):
    if v is None and allow_none:
        return None
    ok = isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)
    _expect(ok, f"expected a finite real number, got {v!r}", path)
    if positive:
        _expect(v > 0, f"must be positive, got {v!r}", path)
    return float(v)


def _section(doc: dict, name: str, allowed) -> dict:
    sec = doc.get(name, {})
    _expect(isinstance(sec, dict), "expected an object", name)
    unknown = sorted(set(sec) - set(allowed))
    _expect(not unknown, f"unknown keys {unknown}", name)
    return sec


def default_config() -> dict:
    return normalize({})


def normalize(doc: dict) -> dict:
    """Validate ``doc`` and return the fully default-filled document."""
    _expect(isinstance(doc, dict), "config must be a JSON object", "<root>")
    allowed_top = ("system", "parameters", "xi", "choices", "initial", "numerics", "output", "sweep")
    unknown = sorted(set(doc) - set(allowed_top))
    _expect(not unknown, f"unknown keys {unknown}", "<root>")

    system = doc.get("system", "immune")
    _expect(system in SYSTEMS, f"must be one of {SYSTEMS}", "system")

    names = ModelParameters.field_names()
    psec = _section(doc, "parameters", names)
    defaults = ModelParameters().as_dict()
    params = {n: _real(psec.get(n, defaults[n]), f"parameters.{n}", positive=True) for n in names}

    xsec = _section(doc, "xi", ("kind", "table"))
    xi = {"kind": xsec.get("kind", "linear")}
    if "table" in xsec and xsec["table"] is not None:
        _expect(isinstance(xsec["table"], list), "expected a list of [u, xi(u)] pairs", "xi.table")
        xi["table"] = [[_real(u, "xi.table"), _real(v, "xi.table")] for u, v in xsec["table"]]

    csec = _section(doc, "choices", THETA_NAMES + KAPPA_NAMES + ("delta_fraction",))
    choices = {n: _real(csec.get(n), f"choices.{n}", positive=True, allow_none=True)
               for n in THETA_NAMES + KAPPA_NAMES}
    choices["delta_fraction"] = _real(csec.get("delta_fraction", 0.5), "choices.delta_fraction")

    isec = _section(doc, "initial", ("kind", "values", "times", "coordinate-frame", "scale"))
    initial = {
        "kind": isec.get("kind", "constant"),
        "coordinate-frame": isec.get("coordinate-frame", "shifted"),
        "scale": _real(isec.get("scale", 1.0), "initial.scale"),
    }
    _expect(initial["kind"] in ("constant", "table"), "must be 'constant' or 'table'", "initial.kind")
    _expect(initial["coordinate-frame"] in FRAMES, f"must be one of {FRAMES}", "initial.coordinate-frame")
    dim = 1 if system == "linear-delay-test" else 10
    if initial["kind"] == "constant":
        vals = isec.get("values", [1.0] if dim == 1 else DEFAULT_INITIAL_VALUES)
        _expect(isinstance(vals, list) and len(vals) == dim, f"expected a list of {dim} numbers", "initial.values")
        initial["values"] = [_real(v, f"initial.values[{i}]") for i, v in enumerate(vals)]
    else:
        times = isec.get("times")
        vals = isec.get("values")
        _expect(isinstance(times, list) and len(times) >= 2, "table needs a 'times' list", "initial.times")
        _expect(isinstance(vals, list) and len(vals) == len(times), "one row of values per time", "initial.values")
        initial["times"] = [_real(t, f"initial.times[{i}]") for i, t in enumerate(times)]
        rows = []
        for i, row in enumerate(vals):
            _expect(isinstance(row, list) and len(row) == dim, f"expected {dim} numbers", f"initial.values[{i}]")
            rows.append([_real(v, f"initial.values[{i}]") for v in row])
        initial["values"] = rows

    nsec = _section(doc, "numerics", Numerics.__dataclass_fields__.keys())
    nd = Numerics()
    numerics = {
        "step": _real(nsec.get("step", nd.step), "numerics.step", positive=True, allow_none=True),
        "t_end": _real(nsec.get("t_end", nd.t_end), "numerics.t_end", positive=True),
        "quad_points": nsec.get("quad_points", nd.quad_points),
        "output_grid_spacing": _real(nsec.get("output_grid_spacing", nd.output_grid_spacing),
                                     "numerics.output_grid_spacing", positive=True, allow_none=True),
        "monitor_points": nsec.get("monitor_points", nd.monitor_points),
        "tol_bound": _real(nsec.get("tol_bound", nd.tol_bound), "numerics.tol_bound", positive=True),
        "floor_tol": _real(nsec.get("floor_tol", nd.floor_tol), "numerics.floor_tol", positive=True),
    }
    q = numerics["quad_points"]
    _expect(isinstance(q, int) and not isinstance(q, bool) and q >= 8 and q % 2 == 0,
            "must be an even integer >= 8", "numerics.quad_points")
    m = numerics["monitor_points"]
    _expect(isinstance(m, int) and not isinstance(m, bool) and m >= 1, "must be a positive integer",
            "numerics.monitor_points")

    osec = _section(doc, "output", ("directory", "formats"))
    output = {"directory": osec.get("directory", "out"), "formats": osec.get("formats", ["csv", "json"])}
    _expect(isinstance(output["directory"], str), "expected a path string", "output.directory")
    _expect(isinstance(output["formats"], list) and set(output["formats"]) <= {"csv", "json"},
            "expected a subset of ['csv', 'json']", "output.formats")

    out = {"system": system, "parameters": params, "xi": xi, "choices": choices,
           "initial": initial, "numerics": numerics, "output": output}

    if "sweep" in doc:
        ssec = _section(doc, "sweep", ("axes", "workers"))
        axes = ssec.get("axes")
        _expect(isinstance(axes, list) and axes, "at least one axis required", "sweep.axes")
        norm_axes = []
        for i, ax in enumerate(axes):
            _expect(isinstance(ax, dict) and set(ax) == {"path", "values"},
                    "each axis is {'path': str, 'values': [...]}", f"sweep.axes[{i}]")
            _expect(isinstance(ax["path"], str) and "." in ax["path"], "expected 'section.key'",
                    f"sweep.axes[{i}].path")
            _expect(isinstance(ax["values"], list) and ax["values"], "non-empty list required",
                    f"sweep.axes[{i}].values")
            norm_axes.append({"path": ax["path"], "values": list(ax["values"])})
        workers = ssec.get("workers", 1)
        _expect(isinstance(workers, int) and workers >= 1, "must be a positive integer", "sweep.workers")
        out["sweep"] = {"axes": norm_axes, "workers": workers}
    return out


def parse(doc: dict) -> RunConfig:
    """Validate, default-fill and build domain objects; invariants are checked here."""
    raw = normalize(doc)
    params = ModelParameters(**raw["parameters"])
    xi_raw = raw["xi"]
    xi = XiFunction(xi_raw["kind"], tuple(tuple(r) for r in xi_raw["table"]) if "table" in xi_raw else None)
    choices = CertificateChoices(**raw["choices"])
    numerics = Numerics(**raw["numerics"])
    cfg = RunConfig(raw["system"], params, xi, choices, raw["initial"], numerics, raw["output"],
                    raw.get("sweep"), raw)
    psi = cfg.history()
    _validate_history(psi, params, raw["system"])
    return cfg


def load(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigurationError(f"no such file {str(path)!r}", "--config") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", str(path)) from exc
    return parse(doc)


def build_history(initial: dict, p: ModelParameters, system: str = "immune") -> History:
    tau = 1.0 if system == "linear-delay-test" else p.tau
    scale = initial.get("scale", 1.0)
    shift = np.zeros(1) if system == "linear-delay-test" else stationary_point(p)
    original = initial["coordinate-frame"] == "original"
    if initial["kind"] == "constant":
        v = np.array(initial["values"], dtype=float)
        if original:
            v = v - shift
        return ConstantHistory(scale * v, tau)
    times = np.array(initial["times"], dtype=float)
    vals = np.array(initial["values"], dtype=float)
    if original:
        vals = vals - shift
    if times[0] > -tau * (1 - 1e-12):
        raise ConfigurationError(f"table must start at or before -tau = {-tau!r}", "initial.times")
    return TableHistory(times, scale * vals)


def _validate_history(psi: History, p: ModelParameters, system: str) -> None:
    if system == "linear-delay-test":
        return
    _, vals = psi.sample(512)
    floor = vals + stationary_point(p)
    if np.any(floor < 0):
        j = int(np.argmin(floor.min(axis=0)))
        raise ConfigurationError(f"component {j + 1} falls below -X*_{j + 1} (negative cell count)", "initial.values")
    if not np.max(vals[:, 9]) < 1.0:
        raise ConfigurationError("component 10 must stay below 1 on [-tau, 0]", "initial.values")


def set_path(doc: dict, path: str, value: Any) -> dict:
    """Copy of ``doc`` with ``section.key`` set to ``value``."""
    out = copy.deepcopy(doc)
    section, _, key = path.partition(".")
    out.setdefault(section, {})
    if not isinstance(out[section], dict):
        raise ConfigurationError("cannot index into a non-object", path)
    out[section][key] = value
    return out
