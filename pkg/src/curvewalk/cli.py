"""Batch experiment runner.

``curvewalk <task> --config cfg.json [--seed S] [--workers W] [--out DIR]``

Every run writes its task outputs plus ``manifest.json`` into the output
directory.  Validation problems exit with status 2 and an error JSON on
stdout; runtime failures exit with status 1.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import Kind, Test, boundary_from_dict, classify
from .curves import SurvivalCurve, fmt, ratio_curve
from .increments import Lattice, model_from_dict, norming_c
from .rng import RngStream

SCHEMA_VERSION = 1
TASKS = ("sample", "ladder", "renewal", "passage", "ratio", "vg", "tests",
         "htransform", "whbound", "oracle", "report")

COMMON = {"task", "model", "boundary", "n_grid", "n_paths", "horizon", "seed", "workers", "out_dir"}
EXTRA = {
    "sample": set(),
    "ladder": {"window"},
    "renewal": {"grid"},
    "passage": {"kind"},
    "ratio": {"exact"},
    "vg": {"variant", "exact", "grid"},
    "tests": {"mode", "x_hi", "tests"},
    "htransform": {"start", "x_max"},
    "whbound": {"n_max", "exact"},
    "oracle": {"kind", "n_max", "exact"},
    "report": {"run_dirs"},
}
REQUIRED = {
    "sample": {"model", "n_paths"},
    "ladder": {"model", "n_grid", "n_paths"},
    "renewal": {"model", "grid", "n_paths"},
    "passage": {"model", "n_grid", "n_paths"},
    "ratio": {"model", "boundary", "n_grid"},
    "vg": {"model", "boundary", "n_grid", "n_paths"},
    "tests": {"model", "boundary"},
    "htransform": {"model", "n_grid", "n_paths"},
    "whbound": {"model", "n_max"},
    "oracle": {"model", "n_max"},
    "report": {"run_dirs"},
}
DEFAULTS = {"seed": 0, "workers": 1, "out_dir": "out", "horizon": 10**6}


class ConfigError(ValueError):
    pass


def validate(cfg: dict) -> dict:
    """Check a config dict and return it with defaults filled in."""
    task = cfg.get("task")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    allowed = COMMON | EXTRA[task]
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(f"unknown fields for task {task}: {unknown}")
    missing = sorted(REQUIRED[task] - set(cfg))
    if missing:
        raise ConfigError(f"missing fields for task {task}: {missing}")
    out = {**DEFAULTS, **cfg}
    for key in ("n_paths", "horizon", "workers", "n_max", "x_max"):
        if key in out and (not isinstance(out[key], int) or isinstance(out[key], bool) or out[key] < 1):
            raise ConfigError(f"{key} must be a positive integer")
    if not isinstance(out["seed"], int) or not 0 <= out["seed"] < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    if "n_grid" in out:
        g = out["n_grid"]
        if not g or not all(isinstance(v, int) and v >= 0 for v in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigError("n_grid must be a strictly increasing list of nonnegative integers")
    if "model" in out:
        try:
            out["_model"] = model_from_dict(out["model"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad model: {exc}") from None
    if "boundary" in out:
        try:
            out["_boundary"] = boundary_from_dict(out["boundary"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad boundary: {exc}") from None
    if task in ("oracle", "whbound", "htransform") and not isinstance(out["_model"], Lattice):
        raise ConfigError(f"task {task} needs a lattice model")
    if task == "ratio" and out.get("exact") and not isinstance(out["_model"], Lattice):
        raise ConfigError("exact ratios need a lattice model")
    if "kind" in out and out["kind"] not in [k.value for k in Kind]:
        raise ConfigError(f"kind must be one of {[k.value for k in Kind]}")
    if "variant" in out and out["variant"] not in ("sub", "super"):
        raise ConfigError("variant must be 'sub' or 'super'")
    return out


# ---------------------------------------------------------------------------
# task implementations; each returns (files written, summary dict)


def _write(out: Path, name: str, text: str, files: list):
    (out / name).write_text(text)
    files.append(name)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    if hasattr(o, "value"):
        return o.value
    return str(o)


def _est(e) -> dict:
    return {"value": e.mean, "stderr": e.stderr, "n_paths": e.n, "seed": e.seed}


def task_sample(cfg, rng, out):
    model = cfg["_model"]
    x = model.sample(rng.generator, cfg["n_paths"])
    files = []
    _write(out, "samples.csv", "value\n" + "".join(fmt(v) + "\n" for v in x), files)
    summary = {"mean": float(x.mean()), "median": float(np.median(x)), "rho": model.rho,
               "alpha": model.alpha, "beta": model.beta}
    if "n_grid" in cfg:
        summary["norming_c"] = {str(n): norming_c(model, max(1, n)) for n in cfg["n_grid"]}
    return files, summary


def task_ladder(cfg, rng, out):
    from .ladder import fit_tail, simulate_ladders, survival_T0

    model = cfg["_model"]
    files = []
    lad = simulate_ladders(model, cfg["n_paths"], cfg["horizon"], rng.child(0), cfg["workers"])
    rows = ["tau,chi,censored"] + [f"{int(t)},{'' if c else fmt(x)},{int(c)}"
                                   for t, x, c in zip(lad.tau, lad.chi, lad.censored)]
    _write(out, "ladder.csv", "\n".join(rows) + "\n", files)
    curve = survival_T0(model, cfg["n_grid"], cfg["n_paths"], rng.child(1), cfg["workers"])
    _write(out, "survival_T0.csv", curve.to_csv(), files)
    summary = {"censored_fraction": lad.censored_fraction}
    if "window" in cfg:
        fit = fit_tail(curve, tuple(cfg["window"]))
        summary["tail_fit"] = {"exponent": fit.exponent, "amplitude": fit.amplitude,
                               "window": list(fit.window), "residual": fit.residual}
    return files, summary


def task_renewal(cfg, rng, out):
    from .ladder import estimate_renewal_h

    tab = estimate_renewal_h(cfg["_model"], cfg["grid"], cfg["n_paths"], rng, cfg["horizon"], cfg["workers"])
    files = []
    _write(out, "renewal.csv", tab.to_csv(), files)
    return files, {"monotone": tab.is_monotone, "censored_samples": tab.censored}


def task_passage(cfg, rng, out):
    from .passage import estimate_E_nu, survival_curves

    model, g = cfg["_model"], cfg.get("_boundary")
    kind = cfg.get("kind", "lower")
    files = []
    cg, c0 = survival_curves(model, [g, None], kind, cfg["n_grid"], cfg["n_paths"], rng.child(0), cfg["workers"])
    _write(out, "curve_g.csv", cg.to_csv(), files)
    _write(out, "curve_T0.csv", c0.to_csv(), files)
    r = ratio_curve(cg, c0)
    _write(out, "ratio.csv", r.to_csv(), files)
    summary = {"kind": kind, "ratio_tail": float(r.ratio[-1]), "ratio_method": r.method}
    if Kind(kind) is Kind.LOWER:
        nu = estimate_E_nu(model, g, cfg["horizon"], cfg["n_paths"], rng.child(1), cfg["workers"])
        summary["e_nu"] = None if nu.estimate is None else _est(nu.estimate)
        summary["nu_censored_fraction"] = nu.censored_fraction
        summary["nu_infinite_mean_flag"] = nu.infinite_mean_flag
    return files, summary


def task_ratio(cfg, rng, out):
    from .oracle import dp_survival
    from .passage import survival_curves

    model, g = cfg["_model"], cfg["_boundary"]
    files = []
    if cfg.get("exact"):
        cg = dp_survival(model, g, "lower", n_grid=cfg["n_grid"])
        c0 = dp_survival(model, None, "zero", n_grid=cfg["n_grid"])
    else:
        if "n_paths" not in cfg:
            raise ConfigError("Monte Carlo ratio needs n_paths")
        cg, c0 = survival_curves(model, [g, None], "lower", cfg["n_grid"], cfg["n_paths"], rng, cfg["workers"])
    r = ratio_curve(cg, c0)
    _write(out, "curve_g.csv", cg.to_csv(), files)
    _write(out, "curve_T0.csv", c0.to_csv(), files)
    _write(out, "ratio.csv", r.to_csv(), files)
    summary = {"ratio_tail": float(r.ratio[-1]), "ratio_method": r.method}
    try:
        summary["last_doubling_change"] = r.last_doubling_change()
    except ValueError:
        pass
    return files, summary


def _renewal_for(cfg, rng, x_need: float):
    from .ladder import estimate_renewal_h
    from .oracle import lattice_renewal
    from .renewal import RenewalFunction

    model = cfg["_model"]
    index = model.alpha * (1 - model.rho)
    if isinstance(model, Lattice):
        return lattice_renewal(model, int(math.ceil(x_need)) + 1).function(index)
    grid = cfg.get("grid")
    if grid is None:
        raise ConfigError("non-lattice V estimates need a renewal 'grid'")
    tab = estimate_renewal_h(model, grid, cfg["n_paths"], rng, cfg["horizon"], cfg["workers"])
    return RenewalFunction.from_table(tab, index)


def task_vg(cfg, rng, out):
    from .passage import estimate_V

    model, g = cfg["_model"], cfg["_boundary"]
    n_max = cfg["n_grid"][-1]
    up = float(model.support[-1]) if isinstance(model, Lattice) else 0.0
    h = _renewal_for(cfg, rng.child(1), n_max * up + float(g(n_max)) + 1)
    tr = estimate_V(model, g, cfg.get("variant", "sub"), h, cfg["n_grid"], cfg["n_paths"], rng.child(0), cfg["workers"])
    files = []
    _write(out, "vg.csv", tr.to_csv(), files)
    summary = {"v_estimate": _est(tr.v_estimate), "variant": tr.variant.value,
               "monotone": tr.is_monotone(), "final_gap": tr.final_gap if len(tr.values) > 1 else None,
               "extended_h_evaluations": getattr(h, "extended_evaluations", 0)}
    return files, summary


def task_tests(cfg, rng, out):
    model, g = cfg["_model"], cfg["_boundary"]
    mode = cfg.get("mode", "symbolic")
    tests = cfg.get("tests", [t.value for t in Test])
    verdicts = {}
    for t in tests:
        kw = {}
        if mode == "numeric":
            kw["h"] = _renewal_for({**cfg, "n_paths": cfg.get("n_paths", 10**4)}, rng, cfg.get("x_hi", 1e6))
            kw["x_hi"] = cfg.get("x_hi", 1e6)
        verdicts[t] = classify(t, g, model, mode=mode, **kw).to_dict()
    files = []
    _write(out, "verdicts.json", _json({t: v["verdict"] for t, v in verdicts.items()}), files)
    _write(out, "verdicts_full.json", _json(verdicts), files)
    return files, {"verdicts": {t: v["verdict"] for t, v in verdicts.items()}}


def task_htransform(cfg, rng, out):
    from .htransform import build_kernel, estimate_never_cross, importance_survival

    model, g = cfg["_model"], cfg.get("_boundary")
    start = int(cfg.get("start", 0))
    N = cfg["n_grid"]
    k = build_kernel(model, start + N[-1] * model.support[-1])
    files = []
    _write(out, "kernel.csv", k.to_csv(x_range=range(min(k.x_max, cfg.get("x_max", 100)) + 1)), files)
    tab = estimate_never_cross(k, g, N, cfg["n_paths"], rng.child(0), start, cfg["workers"])
    rows = ["n,prob,stderr,provenance"] + [f"{fmt(n)},{fmt(e.mean)},{fmt(e.stderr)},mc" for n, e in zip(tab.N, tab.values)]
    _write(out, "never_cross.csv", "\n".join(rows) + "\n", files)
    imp = importance_survival(k, g, N, cfg["n_paths"], rng.child(1), start, cfg["workers"])
    rows = ["n,prob,stderr,provenance"] + [f"{fmt(n)},{fmt(e.mean)},{fmt(e.stderr)},importance" for n, e in zip(N, imp)]
    _write(out, "importance.csv", "\n".join(rows) + "\n", files)
    return files, {"last_drop": tab.last_drop, "plateau": tab.plateau, "plateau_value": float(tab.means[-1])}


def task_whbound(cfg, rng, out):
    from .whbound import bound_check

    rep = bound_check(cfg["_model"], cfg.get("_boundary"), cfg["n_max"], exact=cfg.get("exact", True))
    files = []
    summary = {"precondition_ok": rep.precondition_ok, "additivity_worst": rep.additivity_worst}
    if rep.precondition_ok:
        _write(out, "whbound.csv", rep.to_csv(), files)
        r1 = rep.r1
        summary.update(holds=rep.holds, worst_slack=rep.worst_slack,
                       r1=None if r1 is None else {"partial_sum_exp": r1.partial_sum_exp, "tail_bound": r1.tail_bound,
                                                   "block_ratio": r1.block_ratio, "divergent": r1.divergent})
        _write(out, "r1.json", _json(summary["r1"]), files)
    return files, summary


def task_oracle(cfg, rng, out):
    from .oracle import dp_survival

    kind = cfg.get("kind", "zero")
    c = dp_survival(cfg["_model"], cfg.get("_boundary"), kind, cfg["n_max"], exact=cfg.get("exact", False))
    files = []
    _write(out, "survival.csv", c.to_csv(), files)
    return files, {"kind": kind, "n_max": cfg["n_max"], "last": float(c.prob[-1])}


def _read_curve(path: Path) -> SurvivalCurve | None:
    try:
        return SurvivalCurve.from_csv(path)
    except (OSError, ValueError, KeyError):
        return None


def task_report(cfg, rng, out):
    runs, skipped = [], []
    for d in cfg["run_dirs"]:
        p = Path(d) / "manifest.json"
        try:
            m = json.loads(p.read_text())
            runs.append((Path(d), m))
        except (OSError, ValueError):
            skipped.append(str(d))
    table, verdicts, ratios = [], {}, []
    curves = []
    for d, m in runs:
        s = m.get("summary", {})
        row = {"run": str(d), "task": m.get("task"), "seed": m.get("seed")}
        if m.get("task") == "oracle":
            row["curve_last"] = s.get("last")
            row["n_max"] = s.get("n_max")
        if m.get("task") in ("ratio", "passage"):
            row["ratio_tail"] = s.get("ratio_tail")
            row["ratio_method"] = s.get("ratio_method")
            r = _read_ratio(d / "ratio.csv")
            if r is not None and len(r) >= 2:
                row["last_doubling_change"] = abs(r[-1] - r[-2]) / abs(r[-2])
        if m.get("task") == "passage":
            row["e_nu"] = s.get("e_nu")
            for name in ("curve_g.csv", "curve_T0.csv"):
                c = _read_curve(d / name)
                if c is not None:
                    curves.append((name, m, c))
        if m.get("task") == "vg":
            row["v_estimate"] = s.get("v_estimate")
            row["monotone"] = s.get("monotone")
        if m.get("task") == "tests":
            verdicts[str(d)] = s.get("verdicts")
        if m.get("task") == "whbound":
            row["wh_bound_holds"] = s.get("holds")
        table.append(row)
    # cross-run ratios between T_g curves and T_0 curves from different runs
    num = [(m, c) for n, m, c in curves if n == "curve_g.csv"]
    den = [(m, c) for n, m, c in curves if n == "curve_T0.csv"]
    for mg, cg in num:
        for m0, c0 in den:
            if mg is m0 or cg.n.shape != c0.n.shape or np.any(cg.n != c0.n):
                continue
            coupled = mg.get("seed") == m0.get("seed") and mg["config"].get("n_paths") == m0["config"].get("n_paths")
            if coupled:
                continue  # already reported within the run
            cg.n_paths = mg["config"].get("n_paths")
            c0.n_paths = m0["config"].get("n_paths")
            r = ratio_curve(cg, c0, coupled=False)
            ratios.append({"numerator_seed": mg.get("seed"), "denominator_seed": m0.get("seed"),
                           "ratio_tail": float(r.ratio[-1]), "stderr": float(r.stderr[-1]),
                           "method": r.method, "flag": "non-coupled ratio"})
    report = {"runs": table, "verdict_matrix": verdicts, "cross_run_ratios": ratios, "skipped": skipped}
    files = []
    _write(out, "report.json", _json(report), files)
    lines = [f"runs: {len(runs)}  skipped: {len(skipped)}"]
    for row in table:
        lines.append("  " + ", ".join(f"{k}={v}" for k, v in row.items()))
    for d, v in verdicts.items():
        lines.append(f"verdicts {d}: " + ", ".join(f"{k}:{x}" for k, x in (v or {}).items()))
    for r in ratios:
        lines.append(f"non-coupled ratio (independent-stream error): {r['ratio_tail']:.6g} +- {r['stderr']:.3g}")
    for s in skipped:
        lines.append(f"skipped unreadable run: {s}")
    _write(out, "report.txt", "\n".join(lines) + "\n", files)
    return files, {"n_runs": len(runs), "skipped": skipped}


def _read_ratio(path: Path):
    try:
        with open(path) as fh:
            next(fh)
            return [float(line.split(",")[1]) for line in fh if line.strip()]
    except (OSError, ValueError, StopIteration, IndexError):
        return None


TASK_FUNCS = {
    "sample": task_sample, "ladder": task_ladder, "renewal": task_renewal, "passage": task_passage,
    "ratio": task_ratio, "vg": task_vg, "tests": task_tests, "htransform": task_htransform,
    "whbound": task_whbound, "oracle": task_oracle, "report": task_report,
}


def _versions() -> dict:
    import scipy

    return {"curvewalk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run(config: dict) -> int:
    """Validate and execute one experiment; returns the process exit status."""
    try:
        cfg = validate(config)
    except ConfigError as exc:
        _error("validation", str(exc), config.get("out_dir"))
        return 2
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    # the stream id is the task index so each task has its own stream family
    rng = RngStream(cfg["seed"], TASKS.index(cfg["task"]))
    t0 = time.perf_counter()
    try:
        files, summary = TASK_FUNCS[cfg["task"]](cfg, rng, out)
    except ConfigError as exc:
        _error("validation", str(exc), out)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as runtime failure
        _error("runtime", f"{type(exc).__name__}: {exc}", out, traceback.format_exc())
        return 1
    echo = {k: v for k, v in cfg.items() if not k.startswith("_")}
    manifest = {"schema_version": SCHEMA_VERSION, "task": cfg["task"], "seed": cfg["seed"],
                "workers": cfg["workers"], "config": echo, "versions": _versions(),
                "wall_time_s": time.perf_counter() - t0, "outputs": files, "summary": summary}
    (out / "manifest.json").write_text(_json(manifest))
    print(_json({"status": "ok", "task": cfg["task"], "out_dir": str(out), "summary": summary}), end="")
    return 0


def _error(kind: str, message: str, out_dir=None, tb: str | None = None):
    err = {"status": "error", "error": kind, "message": message}
    if tb:
        err["traceback"] = tb
    text = _json(err)
    print(text, end="")
    if out_dir is not None:
        try:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            (Path(out_dir) / "error.json").write_text(text)
        except OSError:
            pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curvewalk", description="Boundary-crossing experiments for random walks.")
    sub = p.add_subparsers(dest="task", required=True)
    for t in TASKS:
        s = sub.add_parser(t, help=f"run the {t} task")
        s.add_argument("--config", required=True, help="JSON experiment config")
        s.add_argument("--seed", type=int, help="master seed (overrides config)")
        s.add_argument("--workers", type=int, help="worker threads (overrides config)")
        s.add_argument("--out", help="output directory (overrides config)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise ValueError("config must be a JSON object")
    except (OSError, ValueError) as exc:
        _error("validation", f"cannot read config: {exc}", args.out)
        return 2
    if config.get("task", args.task) != args.task:
        _error("validation", f"config task {config['task']!r} does not match subcommand {args.task!r}", args.out)
        return 2
    config["task"] = args.task
    for key, val in (("seed", args.seed), ("workers", args.workers), ("out_dir", args.out)):
        if val is not None:
            config[key] = val
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
