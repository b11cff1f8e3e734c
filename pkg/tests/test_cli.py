import csv
import json
import math
import subprocess
import sys

import pytest

from curvewalk.cli import main, run

RADEMACHER = {"kind": "lattice", "support": [-1, 1], "probs": [0.5, 0.5]}


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run_task(tmp_path, task, cfg, *extra, name="run"):
    out = tmp_path / name
    code = main([task, "--config", write_config(tmp_path, cfg, f"{name}.json"), "--out", str(out), *extra])
    return code, out


def test_oracle_row_matches_closed_form(tmp_path, capsys):
    code, out = run_task(tmp_path, "oracle", {"model": RADEMACHER, "n_max": 60, "kind": "zero"})
    assert code == 0
    rows = list(csv.DictReader(open(out / "survival.csv")))
    assert rows[60]["n"] == "60"
    assert abs(float(rows[60]["prob"]) - math.comb(60, 30) / 2**60) <= 1e-12
    assert rows[60]["provenance"] == "dp-exact"
    man = json.loads((out / "manifest.json").read_text())
    assert man["schema_version"] == 1 and man["task"] == "oracle"
    assert man["outputs"] == ["survival.csv"]
    assert {"numpy", "scipy", "curvewalk", "python"} <= set(man["versions"])
    assert json.loads(capsys.readouterr().out)["status"] == "ok"


def test_tests_task_verdicts(tmp_path):
    cfg = {"model": RADEMACHER, "boundary": {"kind": "power", "amplitude": 1.0, "gamma": 0.25}}
    code, out = run_task(tmp_path, "tests", cfg)
    assert code == 0
    assert json.loads((out / "verdicts.json").read_text()) == {
        "GC": "Convergent", "GC2": "Convergent", "NEW": "Convergent", "HKK": "Convergent"}


@pytest.mark.parametrize("bad", [
    {"model": RADEMACHER, "n_paths": -5},
    {"model": RADEMACHER, "n_paths": 10, "colour": "red"},
    {"n_paths": 10},
    {"model": {"kind": "stable", "alpha": 1.0, "beta": 0.5}, "n_paths": 10},
    {"model": RADEMACHER, "n_paths": 10, "seed": -1},
])
def test_invalid_configs_exit_with_status_two(tmp_path, capsys, bad):
    code, out = run_task(tmp_path, "sample", bad)
    assert code == 2
    err = json.loads(capsys.readouterr().out)
    assert err["status"] == "error" and err["error"] == "validation"
    assert json.loads((out / "error.json").read_text()) == err


def test_task_mismatch_and_unreadable_config(tmp_path, capsys):
    p = write_config(tmp_path, {"task": "oracle", "model": RADEMACHER, "n_max": 3})
    assert main(["sample", "--config", p]) == 2
    assert main(["sample", "--config", str(tmp_path / "missing.json")]) == 2


def test_lattice_only_tasks_reject_stable_models(tmp_path):
    cfg = {"model": {"kind": "stable", "alpha": 1.5, "beta": 1.0}, "n_max": 5}
    assert run_task(tmp_path, "oracle", cfg)[0] == 2


def test_runtime_failure_exits_with_status_one(tmp_path, capsys):
    # a window with too few dyadic points fails inside the tail fit
    cfg = {"model": RADEMACHER, "n_grid": [1, 2, 3], "n_paths": 100, "horizon": 100, "window": [1, 3]}
    code, out = run_task(tmp_path, "ladder", cfg)
    assert code == 1
    assert json.loads((out / "error.json").read_text())["error"] == "runtime"


REPRO = [
    ("sample", {"model": {"kind": "stable", "alpha": 1.5, "beta": 1.0}, "n_paths": 5000}),
    ("passage", {"model": RADEMACHER, "boundary": {"kind": "constant", "level": 1.0}, "n_grid": [1, 4, 16, 64],
                 "n_paths": 20000, "horizon": 2000}),
    ("ladder", {"model": {"kind": "pareto", "alpha": 1.5, "weight_right": 0.7}, "n_grid": [1, 2, 4, 8, 16, 32],
                "n_paths": 20000, "horizon": 1000}),
    ("htransform", {"model": RADEMACHER, "boundary": {"kind": "constant", "level": 2.0}, "n_grid": [4, 16, 64],
                    "n_paths": 20000, "start": 2}),
    ("vg", {"model": RADEMACHER, "boundary": {"kind": "power", "amplitude": 1.0, "gamma": 0.25, "offset": 1.0},
            "n_grid": [4, 16, 64], "n_paths": 20000}),
    ("renewal", {"model": {"kind": "lattice", "support": [-2, 1], "probs": [1 / 3, 2 / 3]}, "grid": [0, 1, 2, 4],
                 "n_paths": 5000, "horizon": 10**7}),
]


@pytest.mark.parametrize("task,cfg", REPRO, ids=[t for t, _ in REPRO])
def test_outputs_are_byte_identical_across_runs_and_workers(tmp_path, task, cfg):
    outs = []
    for i, w in enumerate((1, 1, 3)):
        code, out = run_task(tmp_path, task, {**cfg, "seed": 2024}, "--workers", str(w), name=f"r{i}")
        assert code == 0
        outs.append(out)
    files = json.loads((outs[0] / "manifest.json").read_text())["outputs"]
    assert files
    for f in files:
        ref = (outs[0] / f).read_bytes()
        assert (outs[1] / f).read_bytes() == ref
        assert (outs[2] / f).read_bytes() == ref


def test_seed_changes_outputs(tmp_path):
    cfg = {"model": RADEMACHER, "n_paths": 100}
    _, a = run_task(tmp_path, "sample", {**cfg, "seed": 1}, name="a")
    _, b = run_task(tmp_path, "sample", {**cfg, "seed": 2}, name="b")
    assert (a / "samples.csv").read_bytes() != (b / "samples.csv").read_bytes()


def test_whbound_task(tmp_path):
    cfg = {"model": RADEMACHER, "n_max": 64}
    code, out = run_task(tmp_path, "whbound", cfg)
    assert code == 0
    s = json.loads((out / "manifest.json").read_text())["summary"]
    assert s["precondition_ok"] and s["holds"] and s["worst_slack"] == 0
    bad = {"model": RADEMACHER, "n_max": 16, "boundary": {"kind": "power", "amplitude": 1.0, "gamma": 0.5}}
    code, out = run_task(tmp_path, "whbound", bad, name="bad")
    assert code == 0
    assert json.loads((out / "manifest.json").read_text())["summary"]["precondition_ok"] is False


def test_report_collects_runs_and_flags_uncoupled_ratios(tmp_path):
    base = {"model": RADEMACHER, "boundary": {"kind": "constant", "level": 1.0}, "n_grid": [1, 4, 16],
            "n_paths": 5000, "horizon": 1000}
    _, p1 = run_task(tmp_path, "passage", {**base, "seed": 1}, name="p1")
    _, p2 = run_task(tmp_path, "passage", {**base, "seed": 2}, name="p2")
    _, o = run_task(tmp_path, "oracle", {"model": RADEMACHER, "n_max": 10}, name="o")
    _, t = run_task(tmp_path, "tests", {"model": RADEMACHER, "boundary": {"kind": "power", "gamma": 0.6}}, name="t")
    missing = tmp_path / "nowhere"
    cfg = {"run_dirs": [str(p1), str(p2), str(o), str(t), str(missing)]}
    code, out = run_task(tmp_path, "report", cfg, name="rep")
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["skipped"] == [str(missing)]
    rows = {r["run"]: r for r in rep["runs"]}
    assert rows[str(o)]["curve_last"] == pytest.approx(math.comb(10, 5) / 2**10)
    assert "last_doubling_change" in rows[str(p1)]
    assert rep["verdict_matrix"][str(t)]["GC"] == "Divergent"
    assert rep["cross_run_ratios"] and all(r["flag"] == "non-coupled ratio" for r in rep["cross_run_ratios"])
    assert all(r["method"] == "independent" for r in rep["cross_run_ratios"])
    assert "skipped unreadable run" in (out / "report.txt").read_text()


def test_module_entry_point(tmp_path):
    p = write_config(tmp_path, {"model": RADEMACHER, "n_max": 3})
    res = subprocess.run([sys.executable, "-m", "curvewalk", "oracle", "--config", p, "--out", str(tmp_path / "m")],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["summary"]["last"] == 0.375


def test_run_accepts_dicts_directly(tmp_path):
    assert run({"task": "oracle", "model": RADEMACHER, "n_max": 2, "out_dir": str(tmp_path / "d")}) == 0
