import csv
import json
import shutil
import subprocess

import pytest

from wedgeheat.cli import DEFAULTS, EXIT_CONFIG, EXIT_GUARD, EXIT_OK, main
from wedgeheat.discretization import load_field

SMALL_GRID = {"n_s": 128, "n_phi": 17}


def _cfg(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(tmp_path, command, cfg=None, *extra, out="out"):
    argv = [command, "--out-dir", str(tmp_path / out)]
    if cfg is not None:
        argv += ["--config", _cfg(tmp_path, cfg, f"{out}.json")]
    return main(argv + list(extra))


def _load(tmp_path, out="out"):
    d = tmp_path / out
    return json.loads((d / "report.json").read_text()), json.loads((d / "manifest.json").read_text())


def test_every_command_has_defaults():
    assert set(DEFAULTS) == {"solve-neumann", "solve-resolvent", "solve-heat", "cascade",
                             "verify-inequalities", "sweep-estimates", "coercivity"}


def test_zero_data_resolvent_artifact(tmp_path):
    code = _run(tmp_path, "solve-resolvent", {"grid": SMALL_GRID, "data": {"f": None, "g": None}})
    assert code == EXIT_OK
    report, manifest = _load(tmp_path)
    assert report["max_abs"] == 0.0
    assert manifest["exit_code"] == 0 and len(manifest["config_hash"]) == 64
    field = load_field(tmp_path / "out" / "solution.txt")
    assert not field.values.any()


def test_zero_data_neumann(tmp_path):
    code = _run(tmp_path, "solve-neumann", {"grid": SMALL_GRID, "data": {"f": None, "g": {"kind": "zero"}}})
    assert code == EXIT_OK
    assert _load(tmp_path)[0]["max_abs"] == 0.0


@pytest.mark.parametrize("cfg", [
    {"grid": {"n_s": 128, "bogus": 1}},
    {"params": {"alpha": "x"}},
    {"defect_steps": 1.5},
    {"save_field": 1},
])
def test_invalid_config_exits_2(tmp_path, cfg, capsys):
    assert _run(tmp_path, "solve-resolvent", cfg) == EXIT_CONFIG
    assert "invalid config" in capsys.readouterr().err
    assert not (tmp_path / "out" / "report.json").exists()


def test_malformed_json_and_bad_flags_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve-resolvent", "--config", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["verify-inequalities", "--cases", "lots", "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["verify-inequalities", "--out-dir", str(tmp_path / "o"),
                 "--config", _cfg(tmp_path, {"ids": ["nope"]})]) == EXIT_CONFIG


def test_guard_violations_exit_3(tmp_path, capsys):
    # mu on the negative axis lies outside the admissible sector
    assert _run(tmp_path, "solve-resolvent", {"grid": SMALL_GRID, "params": {"mu": [-1.0, 0.0]}}) == EXIT_GUARD
    assert "guard" in capsys.readouterr().err
    # an opening angle above 2 pi is not a wedge
    assert _run(tmp_path, "solve-resolvent", {"grid": dict(SMALL_GRID, theta=7.0)}, out="o2") == EXIT_GUARD
    # too few nodes per decade to fit the corner expansion
    assert _run(tmp_path, "solve-heat", {"grid": {"n_s": 64}, "time": {"n_t": 128}}, out="o3") == EXIT_GUARD


def test_report_is_byte_identical_across_runs(tmp_path):
    cfg = {"grid": SMALL_GRID}
    assert _run(tmp_path, "solve-resolvent", cfg, "--seed", "3", out="a") == EXIT_OK
    assert _run(tmp_path, "solve-resolvent", cfg, "--seed", "3", out="b") == EXIT_OK
    ra = (tmp_path / "a" / "report.json").read_bytes()
    assert ra == (tmp_path / "b" / "report.json").read_bytes()
    ma, mb = _load(tmp_path, "a")[1], _load(tmp_path, "b")[1]
    assert ma["config_hash"] == mb["config_hash"]
    assert "total_seconds" in ma["timings"]
    assert _run(tmp_path, "solve-resolvent", cfg, "--seed", "4", out="c") == EXIT_OK
    assert _load(tmp_path, "c")[1]["config_hash"] != ma["config_hash"]


def test_resolvent_report_contents(tmp_path):
    assert _run(tmp_path, "solve-resolvent", {"grid": dict(SMALL_GRID, n_s=512, n_phi=33)}) == EXIT_OK
    report, _ = _load(tmp_path)
    assert report["info"]["log_relative"] <= 1e-6
    assert report["info"]["linear_residual"] <= 1e-10


def test_sweep_writes_csv_rows(tmp_path):
    cfg = {"mu_args": [0.0], "families": ["base", "weighted"]}
    code = _run(tmp_path, "sweep-estimates", cfg)
    assert code == EXIT_OK
    with open(tmp_path / "out" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8
    assert {r["family"] for r in rows} == {"base", "weighted"}
    assert _load(tmp_path)[0]["within_tolerance"] is True


def test_sweep_flags_override_config(tmp_path):
    code = main(["sweep-estimates", "--out-dir", str(tmp_path / "out"), "--theorem", "base",
                 "--mu-grid", "4,16,64", "--config", _cfg(tmp_path, {"mu_args": [0.0]})])
    assert code == EXIT_OK
    assert _load(tmp_path)[1]["config"]["mu_moduli"] == [4.0, 16.0, 64.0]


def test_verify_inequalities_small(tmp_path):
    code = main(["verify-inequalities", "--cases", "5", "--out-dir", str(tmp_path / "out"),
                 "--config", _cfg(tmp_path, {"ids": ["complane", "wedge-1", "interp-1"]})])
    assert code == EXIT_OK
    report, manifest = _load(tmp_path)
    assert report["failures"] == 0 and report["cases_per_id"] == 5
    assert set(report["results"]) == {"complane", "wedge-1", "interp-1"}
    assert manifest["results"]["failures"] == 0
    assert (tmp_path / "out" / "inequalities.csv").exists()


def test_verify_inequalities_threads_match_serial(tmp_path):
    ids = {"ids": ["complane", "hardy", "wedge-2"]}
    main(["verify-inequalities", "--cases", "3", "--out-dir", str(tmp_path / "s"), "--config", _cfg(tmp_path, ids)])
    main(["verify-inequalities", "--cases", "3", "--threads", "2", "--out-dir", str(tmp_path / "p"),
          "--config", _cfg(tmp_path, ids)])
    assert (tmp_path / "s" / "report.json").read_bytes() == (tmp_path / "p" / "report.json").read_bytes()


def test_coercivity_manifest_has_constant(tmp_path):
    code = _run(tmp_path, "coercivity", {"n_fields": 6, "n_calibration": 4})
    assert code == EXIT_OK
    report, manifest = _load(tmp_path)
    assert manifest["results"]["c_star"] > 0
    assert report["c_star"] == manifest["results"]["c_star"]


def test_heat_command(tmp_path):
    code = _run(tmp_path, "solve-heat", {"time": {"n_t": 128}})
    assert code == EXIT_OK
    report, _ = _load(tmp_path)
    assert report["causality_defect"] <= 1e-8
    assert report["wellposedness"][0]["ratio"] > 0


def test_console_script_installed(tmp_path):
    exe = shutil.which("wedgeheat")
    assert exe is not None
    r = subprocess.run([exe, "verify-inequalities", "--cases", "2", "--out-dir", str(tmp_path / "out"),
                        "--config", _cfg(tmp_path, {"ids": ["complane"]})], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert _load(tmp_path)[0]["failures"] == 0
