import csv
import io
import json
import math
from dataclasses import replace

import pytest

from immunocert import verify
from immunocert.certificate import CertificateChoices
from immunocert.config import Numerics
from immunocert.dde import ConstantHistory
from immunocert.errors import IntegrationError
from immunocert.lyapunov import envelope
from immunocert.model import ModelParameters, XiFunction
from immunocert.verify import (
    BOUND_VIOLATED,
    HYPOTHESES_FAILED,
    VERIFIED,
    SweepSpec,
    run_sweep,
    run_verification,
    sweep_summary_csv,
    write_sweep,
)

P = ModelParameters()
SMALL = ConstantHistory([1e-3] * 9 + [0.0], P.tau)
SHORT = Numerics(t_end=10.0)


def run(psi=SMALL, p=P, numerics=SHORT):
    return run_verification(p, XiFunction(), CertificateChoices(), psi, numerics=numerics)


def sweep_doc(axes, workers=1, t_end=5.0):
    return {"numerics": {"t_end": t_end}, "sweep": {"axes": axes, "workers": workers}}


def test_zero_history_verified_with_zero_ratios():
    rep = run(ConstantHistory([0.0] * 10, P.tau))
    assert rep.verdict == VERIFIED
    assert rep.max_ratio == [0.0] * 10
    assert rep.monitor["violations"] == 0


def test_small_history_verified():
    rep = run()
    assert rep.verdict == VERIFIED
    assert rep.max_ratio_overall < 1.0
    assert rep.floor_violations == 0 and rep.x10_max < 1.0
    assert rep.trajectory["status"] == "completed" and rep.trajectory["t_end"] == 10.0
    assert rep.monitor["points"] == 100 and rep.monitor["min_slack"] >= 0


def test_infeasible_parameters_report_margin_only():
    rep = run(p=replace(P, sigma=50.0))
    assert rep.verdict == HYPOTHESES_FAILED
    assert rep.stability_margin < 0
    assert rep.certificate is None and rep.trajectory is None and rep.max_ratio is None
    d = json.loads(rep.to_json())
    assert d["trajectory"] is None and d["max_ratio_overall"] is None


def test_basin_failure_is_hypotheses_failed():
    rep = run(SMALL.scaled(1e3))
    assert rep.verdict == HYPOTHESES_FAILED
    assert rep.certificate is not None and not rep.basin.passed
    assert rep.trajectory is None and "basin" in rep.diagnostic


def test_step_halving_keeps_verdict():
    coarse = run(numerics=replace(SHORT, step=0.1))
    fine = run(numerics=replace(SHORT, step=0.05))
    assert coarse.verdict == fine.verdict == VERIFIED
    assert coarse.max_ratio_overall == pytest.approx(fine.max_ratio_overall, rel=1e-4)


def test_report_json_is_deterministic():
    assert run().to_json() == run().to_json()


def test_tampered_envelope_is_caught(monkeypatch):
    monkeypatch.setattr(verify, "envelope", lambda cert, v0: envelope(cert, 1e-6 * v0.total))
    rep = run()
    assert rep.verdict == BOUND_VIOLATED and rep.max_ratio_overall > 1.0


def test_integration_failure_is_bound_violated(monkeypatch):
    def boom(*args, **kwargs):
        raise IntegrationError("state left its domain", t=1.5)

    monkeypatch.setattr(verify, "integrate", boom)
    rep = run()
    assert rep.verdict == BOUND_VIOLATED and "t=1.5" in rep.diagnostic


def test_non_finite_values_serialise_as_strings():
    rep = verify.VerificationReport(HYPOTHESES_FAILED, math.nan)
    assert json.loads(rep.to_json())["stability_margin"] == "nan"


# ---------------------------------------------------------------------------
# sweeps


def test_single_point_sweep_matches_direct_run():
    spec = SweepSpec.from_config(sweep_doc([{"path": "numerics.t_end", "values": [5.0]}]))
    (res,) = run_sweep(spec)
    direct = run(numerics=replace(SHORT, t_end=5.0))
    assert res.report.to_json() == direct.to_json()


def test_grid_order_is_lexicographic():
    spec = SweepSpec.from_config(sweep_doc([
        {"path": "parameters.sigma", "values": [0.05, 0.1, 0.2]},
        {"path": "initial.scale", "values": [0.1, 0.5, 1.0, 3.0]},
    ]))
    pts = spec.points()
    assert len(pts) == 12
    assert [i for i, _ in pts] == list(range(12))
    assert pts[1][1] == {"parameters.sigma": 0.05, "initial.scale": 0.5}
    assert pts[4][1] == {"parameters.sigma": 0.1, "initial.scale": 0.1}


def test_parallel_matches_serial(tmp_path):
    axes = [{"path": "parameters.sigma", "values": [0.05, 0.2]}, {"path": "initial.scale", "values": [0.5, 1.0]}]
    serial = SweepSpec.from_config(sweep_doc(axes, workers=1, t_end=3.0))
    parallel = SweepSpec.from_config(sweep_doc(axes, workers=2, t_end=3.0))
    a = write_sweep(serial, run_sweep(serial), tmp_path / "a")
    b = write_sweep(parallel, run_sweep(parallel), tmp_path / "b")
    for name in ["summary.csv"] + [f"point_{i:04d}.json" for i in range(4)]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_ratio_does_not_grow_with_amplitude():
    # the envelope scales with sqrt(V0), so larger data are not relatively closer to it
    scales = [0.1, 0.3, 1.0, 3.0, 10.0, 100.0]
    spec = SweepSpec.from_config(sweep_doc([{"path": "initial.scale", "values": scales}]))
    rows = list(csv.DictReader(io.StringIO(sweep_summary_csv(spec, run_sweep(spec)))))
    verdicts = [r["verdict"] for r in rows]
    assert verdicts[0] == VERIFIED and verdicts[-1] == HYPOTHESES_FAILED
    k = verdicts.index(HYPOTHESES_FAILED)
    assert set(verdicts[:k]) == {VERIFIED} and set(verdicts[k:]) == {HYPOTHESES_FAILED}
    ratios = [float(r["max_ratio"]) for r in rows[:k]]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(ratios, ratios[1:]))
    assert all(r["max_ratio"] == "" for r in rows[k:])


def test_bad_point_is_recorded_not_fatal():
    spec = SweepSpec.from_config(sweep_doc([{"path": "parameters.sigma", "values": [0.1, -1.0]}]))
    good, bad = run_sweep(spec)
    assert good.report.verdict == VERIFIED
    assert bad.report.verdict == HYPOTHESES_FAILED and "parameters.sigma" in bad.report.diagnostic


def test_summary_columns():
    spec = SweepSpec.from_config(sweep_doc([{"path": "parameters.sigma", "values": [0.1]}], t_end=2.0))
    header = sweep_summary_csv(spec, run_sweep(spec)).splitlines()[0]
    assert header == "index,parameters.sigma,verdict,max_ratio,V0,omega,q"


def test_sweep_spec_requires_axes():
    with pytest.raises(ValueError):
        SweepSpec({}, ())
    with pytest.raises(ValueError):
        SweepSpec.from_config({})
