"""End-to-end runs of the command line driver.

Everything goes through cli.main() in process: each test writes a
config, runs a command into a fresh output directory and inspects
report.json.  Reports must be deterministic outside the meta block,
and failures must land on the documented exit codes (2 for config
problems, 3 for numeric failures with the error still reported).
"""

import json
import math

import pytest

from dblab import cli

PI = math.pi

PW = {"kind": "pw", "a": PI}


def write_cfg(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(tmp_path, command, cfg_doc, *extra, out="out"):
    cfg = write_cfg(tmp_path, command + ".json", cfg_doc)
    outdir = tmp_path / out
    rc = cli.main([command, "--config", cfg, "--out", str(outdir), *extra])
    report = outdir / "report.json"
    doc = json.loads(report.read_text()) if report.exists() else None
    return rc, doc, outdir


DENSITY_CFG = {"space": PW, "window": [-10, 10],
               "sequence": {"kind": "phase", "step": PI},
               "r_values": [PI, 1.5 * PI]}


def test_report_shape_and_meta(tmp_path):
    rc, doc, _ = run(tmp_path, "density", DENSITY_CFG)
    assert rc == 0
    assert set(doc) == {"command", "config", "results", "meta"}
    assert doc["command"] == "density"
    assert set(doc["meta"]) == {"timestamp", "wall_time_s", "tool_version",
                               "threads"}
    assert doc["results"]["r_values"][0] == PI
    assert doc["results"]["lower"][0] == pytest.approx(1 / PI, abs=1e-12)
    assert doc["results"]["upper"][0] == pytest.approx(1 / PI, abs=1e-12)


def test_reports_are_deterministic_outside_meta(tmp_path):
    _, a, _ = run(tmp_path, "density", DENSITY_CFG, out="a")
    _, b, _ = run(tmp_path, "density", DENSITY_CFG, out="b")
    a.pop("meta"), b.pop("meta")
    assert a == b


def test_window_override_is_echoed(tmp_path):
    cfg = {"space": PW, "window": [-5, 5], "grid_n": 51}
    rc, doc, _ = run(tmp_path, "phase", cfg, "--window", "3,9")
    assert rc == 0
    assert doc["config"]["window"] == [3.0, 9.0]
    res = doc["results"]
    assert res["mass"] == pytest.approx(6 * PI, abs=1e-12)
    assert res["phase_hi"] - res["phase_lo"] == pytest.approx(6 * PI,
                                                             abs=1e-12)


def test_phase_csv_table(tmp_path):
    cfg = {"space": PW, "window": [-5, 5], "grid_n": 51}
    rc, _, outdir = run(tmp_path, "phase", cfg, "--format", "csv")
    assert rc == 0
    lines = (outdir / "phase_profile.csv").read_text().splitlines()
    assert lines[0].split(",")[0] == "x"
    assert len(lines) == 52


def test_invalid_json_exits_2(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("not json {")
    rc = cli.main(["phase", "--config", str(cfg),
                   "--out", str(tmp_path / "o")])
    assert rc == 2


def test_unknown_config_key_exits_2(tmp_path):
    rc, doc, _ = run(tmp_path, "phase",
                     {"space": PW, "window": [-5, 5], "bogus": 1})
    assert rc == 2 and doc is None


def test_bad_sequence_kind_exits_2(tmp_path):
    cfg = dict(DENSITY_CFG)
    cfg["sequence"] = {"kind": "bogus"}
    rc, doc, _ = run(tmp_path, "density", cfg)
    assert rc == 2 and doc is None


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DBLAB_THREADS", "4")
    rc, doc, _ = run(tmp_path, "density", DENSITY_CFG)
    assert rc == 0 and doc["meta"]["threads"] == 4
    monkeypatch.setenv("DBLAB_THREADS", "zero")
    rc, _, _ = run(tmp_path, "density", DENSITY_CFG, out="bad")
    assert rc == 2


def test_numeric_failure_exits_3_with_report(tmp_path):
    cfg = {"space": PW, "window": [-2, 2],
           "sequence": {"kind": "phase", "step": PI},
           "r_values": [1000.0]}
    rc, doc, _ = run(tmp_path, "density", cfg)
    assert rc == 3
    assert doc["results"]["error"]["type"] == "WindowMassError"
    assert "exceeds" in doc["results"]["error"]["message"]


def test_interpolate_delta(tmp_path):
    cfg = {"space": PW, "window": [-10, 10],
           "sequence": {"kind": "phase", "step": PI},
           "values": {"kind": "delta"}, "method": "both", "eval_grid_n": 41}
    rc, doc, _ = run(tmp_path, "interpolate", cfg)
    assert rc == 0
    res = doc["results"]
    assert res["min_norm"]["residual_max"] <= 1e-9
    assert res["min_norm"]["norm_sq"] == pytest.approx(1.0, abs=1e-9)
    assert res["norm_ratio"] > 0


def test_interpolate_random_seeding(tmp_path):
    base = {"space": PW, "window": [-10, 10],
            "sequence": {"kind": "phase", "step": PI},
            "values": {"kind": "random"}, "method": "min_norm"}
    _, a, _ = run(tmp_path, "interpolate", dict(base, seed=1), out="s1")
    _, b, _ = run(tmp_path, "interpolate", dict(base, seed=1), out="s1b")
    _, c, _ = run(tmp_path, "interpolate", dict(base, seed=2), out="s2")
    assert a["results"]["values"] == b["results"]["values"]
    assert a["results"]["values"] != c["results"]["values"]


def test_frame_on_nodes(tmp_path):
    cfg = {"space": PW, "window": [-20, 20],
           "sequence": {"kind": "on_nodes"}, "trim_margin": 4}
    rc, doc, _ = run(tmp_path, "frame", cfg)
    assert rc == 0
    res = doc["results"]
    assert res["mode"] == "frame"
    assert 0.9 < res["eig_min"] <= res["eig_max"] < 1.1


def test_multiplier_command(tmp_path):
    cfg = {"space": PW, "window": [-25, 25],
           "sequence": {"kind": "explicit",
                        "points": [2.5 * k for k in range(-10, 11)]},
           "epsilon_margin": 0.6}
    rc, doc, _ = run(tmp_path, "multiplier", cfg)
    assert rc == 0
    res = doc["results"]
    assert res["block_moment_max"] <= 1e-7
    assert res["plan"]["M"] == 8 and res["plan"]["n"] == 2
    assert math.isfinite(res["verify"]["spread_max"])


def test_peak_command(tmp_path):
    cfg = {"space": PW, "window": [-60, 60], "x0": 0.0, "m_poles": 6,
           "epsilon_margin": 0.5, "d_fit": [7, 40], "d_cut": 20, "d_max": 55}
    rc, doc, _ = run(tmp_path, "peak", cfg)
    assert rc == 0
    res = doc["results"]
    assert res["normalization"] == pytest.approx(1.0, abs=1e-9)
    assert res["decay_fit"]["slope"] < -4.5
    assert res["mass_profile"]["tail_fraction"] < 1e-6


def test_suite_subset(tmp_path, capsys):
    rc, doc, _ = run(tmp_path, "suite", {"criteria": [1]})
    assert rc == 0
    assert doc["results"]["passed"] is True
    assert doc["results"]["results"][0]["number"] == 1
    stdout = capsys.readouterr().out
    assert "criterion  1" in stdout
    assert "suite: PASS" in stdout
