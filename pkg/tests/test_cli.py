import csv
import io
import json
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from crossdet import cli
from crossdet import scenario as scen
from crossdet.detlab import CapacityCertificate


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def write_json(tmp_path, doc, name="scenario.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def pinned_doc(**overrides):
    doc = {"H": [[1, 0.5], [0.5, 1]], "G": [[1, 0.3], [0.3, 1]], "N": 1, "P": 10, "R0": 1}
    doc.update(overrides)
    return doc


def test_fmt_is_twelve_digits():
    assert cli.fmt(1 / 3) == "0.333333333333"
    assert cli.fmt(1e-6) == "1e-06"


def test_region_outputs(tmp_path, capsys):
    code, out, _ = run(["region", "--out", str(tmp_path), "--grid", "50"], capsys)
    assert code == 0
    base, ext = rows(tmp_path / "region_base.csv"), rows(tmp_path / "region_extended.csv")
    sums = [max(float(r["R1"]) + float(r["R2"]) for r in t) for t in (base, ext)]
    assert sums[1] == pytest.approx(sums[0] + 1, abs=1e-9)
    svg = (tmp_path / "region.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 2
    assert b"\r" not in (tmp_path / "region_base.csv").read_bytes()
    assert "max sum rate" in out


def test_region_is_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert run(["region", "--out", str(tmp_path / d), "--grid", "40"], capsys)[0] == 0
    for name in ("region_base.csv", "region_extended.csv", "region.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_region_zero_link(tmp_path, capsys):
    p = write_json(tmp_path, pinned_doc(R0=0))
    assert run(["region", "--scenario", str(p), "--out", str(tmp_path), "--grid", "20"],
               capsys)[0] == 0
    assert (tmp_path / "region_base.csv").read_bytes() == \
        (tmp_path / "region_extended.csv").read_bytes()


@pytest.mark.parametrize("scheme", cli.SCHEMES)
def test_sweep_rows(tmp_path, capsys, scheme):
    p = write_json(tmp_path, pinned_doc(sweep=[1, 1e-2, 1e-4]))
    code, out, _ = run(["sweep", "--scheme", scheme, "--scenario", str(p),
                        "--out", str(tmp_path)], capsys)
    assert code == 0
    table = rows(tmp_path / "sweep.csv")
    assert [float(r["N"]) for r in table] == [1, 1e-2, 1e-4]
    assert all(r["status"] == "ok" for r in table)
    for r in table:
        assert -1e-9 <= float(r["delta_r"]) <= 1 + 1e-9
        assert float(r["delta_r"]) == pytest.approx(
            float(r["bonus"]) - float(r["penalty"]), abs=1e-9)
    if scheme == "interfered":
        d = [float(r["delta_r"]) for r in table]
        assert d == sorted(d)
    if scheme == "three-stage":
        # only noise survives an exact beamformer solve, so residual / N is constant
        ratios = [float(r["residual"]) / float(r["N"]) for r in table]
        assert ratios == pytest.approx([ratios[0]] * len(ratios), rel=1e-6)


def test_sweep_jitter_marks_rows(tmp_path, capsys):
    p = write_json(tmp_path, pinned_doc(sweep=[1e-3]))
    run(["sweep", "--scheme", "interfered", "--jitter", "--scenario", str(p),
         "--out", str(tmp_path)], capsys)
    assert rows(tmp_path / "sweep.csv")[0]["status"] == "ok+jitter"


def test_sweep_all_rows_infeasible(tmp_path, capsys):
    # the relay observation cannot carry 100 bits: no distortion meets the link
    p = write_json(tmp_path, pinned_doc(R0=100, sweep=[1, 0.1]))
    code, _, _ = run(["sweep", "--scheme", "interfered", "--scenario", str(p),
                      "--out", str(tmp_path)], capsys)
    assert code == 3
    assert [r["status"] for r in rows(tmp_path / "sweep.csv")] == ["infeasible"] * 2


def test_sweep_rejects_bad_split(tmp_path, capsys):
    code, _, err = run(["sweep", "--scheme", "three-stage", "--power-split", "1.5",
                        "--out", str(tmp_path)], capsys)
    assert code == 2 and "--power-split" in err
    assert not (tmp_path / "sweep.csv").exists()


def test_detlab_fig4(tmp_path, capsys):
    code, out, _ = run(["detlab", "--example", "fig4", "--out", str(tmp_path)], capsys)
    assert code == 0 and "capacity match: PASS" in out
    assert "extractor: found, H(W) = 2" in out
    assert rows(tmp_path / "detlab_outer.csv") == rows(tmp_path / "detlab_achieved.csv")


def test_detlab_precondition_skips(tmp_path, capsys):
    code, out, _ = run(["detlab", "--example", "fig4", "--r0", "3", "--out", str(tmp_path)],
                       capsys)
    assert code == 0 and "SKIPPED" in out
    assert not (tmp_path / "detlab_outer.csv").exists()


def test_detlab_mismatch_exit_code(tmp_path, capsys, monkeypatch):
    def broken(channel, g=None):
        from crossdet.detlab import outer_bound, RateRegion
        return CapacityCertificate(False, outer_bound(channel),
                                   RateRegion.from_points([(0, 0)]), (), None)
    monkeypatch.setattr(cli, "verify_capacity_match", broken)
    code, out, _ = run(["detlab", "--example", "fig4", "--out", str(tmp_path)], capsys)
    assert code == 4 and "capacity match: FAIL" in out


def det_doc(**overrides):
    xs = [str(x) for x in range(8)]
    doc = {"kind": "deterministic", "X": xs,
           "f1": {x: int(x) >> 2 for x in xs}, "f2": {x: int(x) >> 1 for x in xs},
           "fr": {x: x for x in xs}, "pmf": {x: "1/8" for x in xs}, "R0": 1}
    doc.update(overrides)
    return doc


def test_detlab_scenario_file(tmp_path, capsys):
    p = write_json(tmp_path, det_doc())
    code, out, _ = run(["detlab", "--scenario", str(p), "--out", str(tmp_path)], capsys)
    assert code == 0 and "PASS" in out


def test_detlab_bad_pmf(tmp_path, capsys):
    xs = [str(x) for x in range(8)]
    p = write_json(tmp_path, det_doc(pmf={x: "1/7" for x in xs}))
    code, _, err = run(["detlab", "--scenario", str(p), "--out", str(tmp_path)], capsys)
    assert code == 2 and "crossdet: error" in err
    assert not list(tmp_path.glob("*.csv"))


def test_check_deterministic(capsys):
    code, first, _ = run(["check"], capsys)
    assert code == 0
    assert run(["check", "--seed", "42"], capsys)[1] == first
    assert first.splitlines()[-1].endswith("properties passed (seed 42)")


def test_check_fault_injection(capsys):
    code, out, _ = run(["check", "--inject-fault"], capsys)
    assert code == 5 and "FAIL gaussian.chain_rule" in out


def test_check_runtime(capsys):
    t = time.perf_counter()
    run(["check", "--seed", "7"], capsys)
    assert time.perf_counter() - t < 60


def test_check_rejects_negative_seed(capsys):
    code, _, err = run(["check", "--seed", "-1"], capsys)
    assert code == 2 and "--seed" in err


@pytest.mark.parametrize("doc, field", [
    (pinned_doc(H=[[1, 0], [0]]), "H[1]"),
    (pinned_doc(P="ten"), "P"),
    (pinned_doc(sweep=[1e-2, 1]), "sweep"),
    (pinned_doc(plan={"vectors": [[1, 0], [0, 1]], "powers": [5, 4]}), "plan.powers"),
    (pinned_doc(quantizer={"w_r": [0, 0]}), "quantizer.w_r"),
    ({"kind": "mystery"}, "kind"),
])
def test_scenario_validation(tmp_path, capsys, doc, field):
    p = write_json(tmp_path, doc)
    code, _, err = run(["region", "--scenario", str(p), "--out", str(tmp_path / "o")], capsys)
    assert code == 2 and field in err
    assert not (tmp_path / "o").exists()


def test_scenario_complex_entries():
    s = scen.parse(pinned_doc(H=[[[1, 1], 0.5], [0.5, [0, -1]]]))
    assert s.spec.H[0, 0] == 1 + 1j and s.spec.H[1, 1] == -1j
    assert np.allclose(s.plan.vectors[0], [1, 0])


def test_scenario_deterministic_rational_pmf():
    s = scen.parse(det_doc())
    assert sum(s.channel.pmf.values()) == 1


def test_pinned_scenario():
    s = scen.pinned()
    assert s.spec.P == 10 and s.spec.R0 == 1 and s.sweep[0] == 1 and s.sweep[-1] == 1e-8


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "crossdet.cli", "check", "--seed", "1"],
                         capture_output=True, text=True, timeout=120)
    assert res.returncode == 0 and "(seed 1)" in res.stdout


def test_log_level_from_environment():
    env_run = subprocess.run(
        [sys.executable, "-m", "crossdet.cli", "check"], capture_output=True, text=True,
        timeout=120, env={**os.environ, "CROSSDET_LOG": "info"})
    assert "took" in env_run.stderr
