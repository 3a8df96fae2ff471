"""Command-line experiment runner.

Every subcommand expands its config into a list of independent cells, runs
them (optionally on a process pool), and a single collector writes the CSV
tables, ``summary.json`` and ``manifest.json`` in cell order.  The cell seed
is ``[seed, cell_index]``, so the bytes written depend only on the config.

Exit status: 0 on success, 1 if any cell failed (an ``error.json`` lists the
failures), 2 for an invalid config, 3 when ``zoo-check`` finds a verdict that
differs from the known ground truth.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Any, Sequence

from . import __version__
from .config import (
    COMMANDS,
    ConfigError,
    ExperimentConfig,
    build,
    canonical_json,
    load,
    validate,
    workers_from_env,
)
from .covering import BOUNDED, GROWING, classify
from .equicont import close_pairs, fitted_for, modulus, mu_equicontinuity_report
from .lattice import Direction, parse_slope, slope_label, strip_window
from .metrics import MetricSeq
from .spectral import spectrum_verdict
from .suspension import cross_validate, domination_gaps, suspend
from .systems import fit_system, make_system, sample_measure

COVER_COLUMNS = ["family", "beta", "b", "k", "eps", "exact", "greedy", "lower", "verdict"]
ZOO_COLUMNS = ["system", "mode"] + COVER_COLUMNS
EQUICONT_COLUMNS = ["family", "eps", "delta", "discarded", "verdict"]
SUSPEND_COLUMNS = ["side", "b", "k", "eps", "greedy", "lower", "verdict"]
SPECTRAL_COLUMNS = ["function_id", "k", "eps", "greedy", "lower", "verdict"]

# known verdicts of the bowen/mean complexity on the zoo
ROTATION_LIKE = ("rotation", "permutation")


def expected_verdict(kind: str, beta: Any) -> str:
    if kind in ROTATION_LIKE:
        return BOUNDED
    if kind == "skewshift":
        return BOUNDED if beta == 1 else GROWING
    return GROWING


# ----------------------------------------------------------------------
# cells (top level so they pickle)


def _cover_cell(task: dict) -> dict:
    sys_ = make_system(task["system"])
    d = Direction.planar(parse_slope(task["beta"]), task["b"])
    ks, eps = task["k_grid"], task["eps_grid"]
    sys_ = fit_system(sys_, [strip_window(d, max(ks))])
    pts = sample_measure(sys_, task["n"], task["seed"])
    prof = classify(MetricSeq(task["family"], sys_, d), pts, ks, eps, task["mode"],
                    task["exact_cap"], half_scale=task.get("half_scale", True))
    beta, b = d.label()
    rows = []
    for e in prof.eps_grid:
        for k in prof.k_grid:
            row = prof.results[(k, e)].row()
            rows.append({"family": task["family"], "beta": beta, "b": b, **row,
                         "verdict": str(prof.verdicts[e])})
    return {
        "rows": rows,
        "summary": {
            "system": task["system"],
            "family": task["family"],
            "mode": task["mode"],
            "beta": beta,
            "b": b,
            "verdict": prof.verdict,
            "per_eps": {repr(e): str(v) for e, v in prof.verdicts.items()},
            "half_scale": {repr(e): str(v) for e, v in prof.companion_verdicts.items()},
        },
    }


def _equicont_cell(task: dict) -> dict:
    base = make_system(task["system"])
    d = Direction.planar(parse_slope(task["beta"]), task["b"])
    k_max = max(task["k_grid"])
    sys_ = fitted_for(base, d, k_max)
    pairs = close_pairs(sys_, task["n"], task["seed"], partners=3)
    rows, verdicts = [], {}
    for fam in task["families"]:
        curve = modulus(sys_, d, fam, pairs, k_max, task["eps_grid"])
        rows.extend(curve.rows(0))
        verdicts[fam] = {"verdict": curve.verdict,
                         "delta": {repr(e): v for e, v in curve.delta.items()}}
        if task["tau"] is not None:
            rep = mu_equicontinuity_report(base, d, fam, task["tau"], task["n"],
                                           [*task["seed"], 1], k_max, task["eps_grid"])
            for row in rep.rows():
                rows.append({**row, "family": f"mu:{fam}"})
            verdicts[f"mu:{fam}"] = {"verdict": rep.verdict, "discarded": len(rep.discarded),
                                     "budget": rep.budget,
                                     "delta": {repr(e): v for e, v in rep.curve.delta.items()}}
    beta, b = d.label()
    return {"rows": rows, "summary": {"system": task["system"], "beta": beta, "b": b,
                                      "families": verdicts}}


def _suspend_cell(task: dict) -> dict:
    base = make_system(task["system"])
    d = Direction.planar(parse_slope(task["beta"]), 1.0)
    cv = cross_validate(base, d, task["eps_grid"], task["k_grid"], task["seed"],
                        n=task["n"], bs=task["bs"], exact_cap=task["exact_cap"])
    ss = suspend(base, d.beta[0])
    gaps = domination_gaps(ss, task["n_pairs"], task["k_grid"], [*task["seed"], 2])
    summary = cv.summary()
    summary["system"] = task["system"]
    summary["verdict"] = cv.verdict
    summary["domination_min_gap"] = float(gaps.min())
    summary["domination_violations"] = int((gaps < -1e-12).sum())
    return {"rows": cv.rows(), "summary": summary}


def _spectral_cell(task: dict) -> dict:
    sys_ = make_system(task["system"])
    d = Direction.planar(parse_slope(task["beta"]), task["b"])
    rep = spectrum_verdict(sys_, d, None, task["eps_grid"], task["k_grid"], task["seed"],
                           n=task["n"], exact_cap=task["exact_cap"])
    beta, b = d.label()
    return {
        "rows": rep.rows(),
        "summary": {
            "system": task["system"], "beta": beta, "b": b, "verdict": rep.verdict,
            "functions": {name: rep.function_verdict(name) for name in rep.verdicts},
        },
    }


CELL_RUNNERS = {
    "cover": _cover_cell,
    "equicont": _equicont_cell,
    "suspend": _suspend_cell,
    "spectral": _spectral_cell,
}


def run_cell(task: dict) -> dict:
    """Run one cell; failures come back as an error record instead of raising."""
    try:
        return CELL_RUNNERS[task["kind"]](task)
    except Exception as exc:  # recorded per cell, the run carries on
        return {"error": {"cell": task["index"], "type": type(exc).__name__, "message": str(exc),
                          "traceback": traceback.format_exc(limit=3)}}


# ----------------------------------------------------------------------
# planning


def plan(cfg: ExperimentConfig) -> list[dict]:
    common = {"eps_grid": cfg.eps_grid, "k_grid": cfg.k_grid, "n": cfg.n, "exact_cap": cfg.exact_cap}
    betas = [_beta_json(s) for s in cfg.slopes]
    tasks: list[dict] = []

    def add(**kw):
        kw.update({k: v for k, v in common.items() if k not in kw})
        kw["index"] = len(tasks)
        kw["seed"] = [cfg.seed, len(tasks)]
        tasks.append(kw)

    cmd = cfg.command
    if cmd in ("span", "measure-span", "sweep"):
        mode = "measure" if cmd == "measure-span" else ("topological" if cmd == "span" else cfg.mode)
        for beta in betas:
            for b in cfg.bs:
                for fam in cfg.families:
                    add(kind="cover", system=cfg.system, beta=beta, b=b, family=fam, mode=mode)
    elif cmd == "equicont":
        for beta in betas:
            for b in cfg.bs:
                add(kind="equicont", system=cfg.system, beta=beta, b=b,
                    families=cfg.families, tau=cfg.tau)
    elif cmd == "suspend":
        for beta in betas:
            add(kind="suspend", system=cfg.system, beta=beta, bs=cfg.bs, n_pairs=cfg.n_pairs)
    elif cmd == "spectral":
        for beta in betas:
            for b in cfg.bs:
                add(kind="spectral", system=cfg.system, beta=beta, b=b)
    elif cmd == "zoo-check":
        modes = {"bowen": "topological", "maxmean": "topological", "mean": "measure"}
        for desc in cfg.systems:
            for beta in betas:
                for b in cfg.bs:
                    for fam in cfg.families:
                        add(kind="cover", system=desc, beta=beta, b=b, family=fam,
                            mode=modes[fam], half_scale=False)
    return tasks


def _beta_json(s: Any) -> Any:
    return f"{s.numerator}/{s.denominator}" if isinstance(s, Fraction) else s


def execute(tasks: list[dict], workers: int) -> list[dict]:
    if workers <= 1 or len(tasks) <= 1:
        return [run_cell(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(run_cell, tasks))


# ----------------------------------------------------------------------
# output


def csv_text(columns: Sequence[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n", extrasaction="raise")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _cell_text(row[c]) for c in columns})
    return buf.getvalue()


def _cell_text(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _numbered(stem: str, i: int, total: int) -> str:
    return f"{stem}.csv" if total == 1 else f"{stem}_{i}.csv"


def collect(cfg: ExperimentConfig, tasks: list[dict], results: list[dict]) -> tuple[dict[str, str], dict, list]:
    """Turn ordered cell results into ``{filename: text}``, a summary and errors."""
    files: dict[str, str] = {}
    errors = [r["error"] for r in results if "error" in r]
    ok = [(t, r) for t, r in zip(tasks, results) if "error" not in r]
    cells = []
    for t, r in zip(tasks, results):
        cells.append(r.get("summary", {"error": r.get("error", {}).get("message")}) | {"cell": t["index"]})
    summary: dict[str, Any] = {"command": cfg.command, "cells": cells, "failed_cells": [e["cell"] for e in errors]}
    cmd = cfg.command
    if cmd in ("span", "measure-span", "sweep"):
        rows = [row for _, r in ok for row in r["rows"]]
        files[f"{cmd}.csv"] = csv_text(COVER_COLUMNS, rows)
    elif cmd == "zoo-check":
        rows = []
        matrix: dict = {}
        expected: dict = {}
        mismatches = []
        for t, r in zip(tasks, results):
            kind = t["system"]["kind"]
            label = slope_label(parse_slope(t["beta"]))
            want = expected_verdict(kind, parse_slope(t["beta"]))
            expected.setdefault(kind, {}).setdefault(label, {})[t["family"]] = want
            got = r["summary"]["verdict"] if "summary" in r else "ERROR"
            matrix.setdefault(kind, {}).setdefault(label, {})[t["family"]] = got
            if got != want:
                mismatches.append({"system": kind, "beta": label, "family": t["family"],
                                   "expected": want, "got": got})
            for row in r.get("rows", []):
                rows.append({"system": kind, "mode": t["mode"], **row})
        files["zoo.csv"] = csv_text(ZOO_COLUMNS, rows)
        summary.update(matrix=matrix, expected=expected, mismatches=mismatches,
                       all_match=not mismatches)
    else:
        stem, columns = {
            "equicont": ("equicont", EQUICONT_COLUMNS),
            "suspend": ("suspend", SUSPEND_COLUMNS),
            "spectral": ("spectral", SPECTRAL_COLUMNS),
        }[cmd]
        for t, r in ok:
            files[_numbered(stem, t["index"], len(tasks))] = csv_text(columns, r["rows"])
        if cmd == "suspend":
            files["agreement.json"] = json_text({
                "cells": [r["summary"] for _, r in ok],
                "all_agree": bool(ok) and all(r["summary"]["agreement"] for _, r in ok),
            })
    files["summary.json"] = json_text(summary)
    return files, summary, errors


def manifest_text(cfg: ExperimentConfig, files: dict[str, str]) -> str:
    return json_text({
        "tool": "dircomplex",
        "version": __version__,
        "command": cfg.command,
        "seed": cfg.seed,
        "config_sha256": cfg.sha256(),
        "config": cfg.semantic(),
        "outputs": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
    })


def write_files(out: str, files: dict[str, str]) -> None:
    os.makedirs(out, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out, name), "w", newline="") as fh:
            fh.write(text)


def write_error(out: str | None, record: dict) -> None:
    text = json_text(record)
    sys.stderr.write(text)
    if out is None:
        return
    try:
        write_files(out, {"error.json": text})
    except OSError:
        pass


# ----------------------------------------------------------------------
# argument parsing


def _list_of(cast):
    def parse(text: str) -> list:
        return [cast(tok.strip()) for tok in text.split(",") if tok.strip()]
    return parse


def _beta_token(tok: str) -> Any:
    if "/" in tok:
        return tok
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", metavar="PATH", help="JSON config or a previous run's manifest.json")
    g.add_argument("--seed", type=int, metavar="N")
    g.add_argument("--out", metavar="DIR")
    g.add_argument("--workers", type=int, metavar="N",
                   help="worker processes (fallback: $DIRCOMPLEX_WORKERS, then 1)")
    g.add_argument("--exact-cap", dest="exact_cap", type=int, metavar="NODES",
                   help="branch-and-bound node budget for exact covers (0 disables)")
    o = common.add_argument_group("config overrides")
    o.add_argument("--system", metavar="KIND", help="system kind with default parameters")
    o.add_argument("--betas", type=_list_of(_beta_token), metavar="LIST", help="e.g. 0,1/2,1.4142135623730951")
    o.add_argument("--bs", type=_list_of(float), metavar="LIST")
    o.add_argument("--families", type=_list_of(str), metavar="LIST")
    o.add_argument("--eps", dest="eps_grid", type=_list_of(float), metavar="LIST")
    o.add_argument("--ks", dest="k_grid", type=_list_of(int), metavar="LIST")
    o.add_argument("--n", type=int, metavar="N", help="sample size (pairs for equicont)")
    o.add_argument("--tau", type=float)
    o.add_argument("--mode", choices=["topological", "measure"], help="sweep only")

    parser = argparse.ArgumentParser(prog="dircomplex",
                                     description="Directional bounded complexity experiments on Z^2-actions.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "span": "topological covering profiles",
        "measure-span": "measure-theoretic covering profiles",
        "equicont": "equicontinuity moduli",
        "suspend": "base vs suspension cross-validation",
        "spectral": "L2 orbit compactness of test functions",
        "sweep": "covering profiles across a beta grid",
        "zoo-check": "all zoo systems against their known verdicts",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw = load(args.config)
    overrides = {
        name: getattr(args, name)
        for name in ("seed", "out", "exact_cap", "betas", "bs", "families", "eps_grid", "k_grid",
                     "n", "tau", "mode")
    }
    if args.system is not None:
        overrides["system"] = {"kind": args.system}
    overrides["workers"] = workers_from_env(args.workers)
    cfg = build(args.command, raw, overrides)
    return validate(cfg)


def run(cfg: ExperimentConfig) -> int:
    tasks = plan(cfg)
    results = execute(tasks, cfg.workers)
    files, summary, errors = collect(cfg, tasks, results)
    files["manifest.json"] = manifest_text(cfg, files)
    write_files(cfg.out, files)
    if errors:
        write_error(cfg.out, {"command": cfg.command, "errors": errors})
        return 1
    if cfg.command == "zoo-check" and not summary["all_match"]:
        return 3
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        write_error(args.out, {"command": args.command, "type": "ConfigError", "message": str(exc)})
        return 2
    try:
        return run(cfg)
    except Exception as exc:
        write_error(cfg.out, {"command": cfg.command, "type": type(exc).__name__, "message": str(exc),
                              "traceback": traceback.format_exc(limit=5)})
        return 1


if __name__ == "__main__":
    sys.exit(main())
