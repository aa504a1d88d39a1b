"""Command-line entry point: ``colearn {simulate,oracle-diff,berk-check,validate}``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .config import ConfigError
from .consistency import berk_nash_check
from .engine import record_csv, run_episode, summarize
from .planner import RolloutBudgetError

OUT_ENV = "COLEARN_OUT"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"colearn: {msg}", file=sys.stderr)


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _run_seed(args):
    setup, seed = args
    return run_episode(setup.spec, setup.agents, setup.base, setup.T, seed, None,
                       setup.learner, setup.node_budget)


def cmd_simulate(ns) -> int:
    try:
        doc = cfgmod.load(ns.config, "simulate")
        setup = cfgmod.build_run(doc, ns.paper_scale)
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    out = Path(ns.out or setup.output or os.environ.get(OUT_ENV) or "colearn-out")
    try:
        jobs = [(setup, s) for s in setup.seeds]
        if ns.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=ns.jobs) as pool:
                records = list(pool.map(_run_seed, jobs))
        else:
            records = [_run_seed(j) for j in jobs]
        out.mkdir(parents=True, exist_ok=True)
        for rec in records:
            _write_atomic(out / f"run_{rec.seed}.csv", record_csv(rec))
        summary = summarize(records)
        summary["config"] = doc
        _write_atomic(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    except (RolloutBudgetError, ArithmeticError, ValueError, OSError) as e:
        _err(f"runtime error: {e}")
        return EXIT_RUNTIME
    pooled = summary["pooled"]["discounted_cost"]
    print(f"{len(records)} seed(s) -> {out}; discounted cost {pooled['mean']:.4f} "
          f"[{pooled['ci95'][0]:.4f}, {pooled['ci95'][1]:.4f}]")
    return EXIT_OK


def cmd_oracle_diff(ns) -> int:
    from .oracles import run_suites

    try:
        doc = cfgmod.load(ns.config, "oracle-diff")
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    tol = doc.get("tolerance", 1e-10)
    try:
        reports = run_suites(doc)
    except RolloutBudgetError as e:
        _err(f"oracle budget exceeded: {e}")
        return EXIT_RUNTIME
    ok = True
    total = 0
    for r in reports:
        total += r.comparisons
        label = "belief deviation" if r.kind == "belief" else "value deviation"
        mism = "feasibility mismatches" if r.kind == "belief" else "action mismatches"
        print(f"{r.kind}: {r.comparisons} comparisons, max {label} {r.max_deviation:.3e}, "
              f"{r.mismatches} {mism}")
        for d in r.details[:5]:
            print(f"  {d}")
        ok &= r.passed(tol)
    print(f"total comparisons {total}; tolerance {tol:g}; {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_berk_check(ns) -> int:
    try:
        doc = cfgmod.load(ns.config, "berk-check")
        spec, conj, profile, post, tol = cfgmod.berk_inputs(doc)
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    verdict = berk_nash_check(spec, conj, profile, post, tol)
    print(verdict.describe(spec))
    for v in verdict.violations[1:]:
        print(f"  also clause ({v.clause}) player {spec.player_names[v.player]}: {v.detail}")
    return EXIT_OK if verdict.accept else EXIT_FAIL


def cmd_validate(ns) -> int:
    try:
        try:
            doc = json.loads(Path(ns.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {ns.config}: {e}") from None
        # GameSpec documents carry no "kind" field
        kind = doc.get("kind", "game") if isinstance(doc, dict) else None
        if kind == "game":
            cfgmod.game_from_dict(doc)
        else:
            cfgmod.check(doc, kind)
        if kind == "simulate":
            cfgmod.build_run(doc, ns.paper_scale)
        elif kind == "berk-check":
            cfgmod.berk_inputs(doc)
    except ConfigError as e:
        _err(str(e))
        return EXIT_CONFIG
    print(f"{ns.config}: valid {kind} config")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="colearn", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in [
        ("simulate", cmd_simulate, "run an experiment, write CSV traces and summary.json"),
        ("oracle-diff", cmd_oracle_diff, "compare filter and rollout with brute-force oracles"),
        ("berk-check", cmd_berk_check, "check a repeated-game profile for a Berk-Nash equilibrium"),
        ("validate", cmd_validate, "validate a config (or GameSpec) against its schema"),
    ]:
        sp = sub.add_parser(name, help=helptext)
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./colearn-out)")
        sp.add_argument("--jobs", type=int, default=1, help="parallel seeds")
        sp.add_argument("--paper-scale", action="store_true", help="intrusion game with N=64")
        sp.set_defaults(func=fn)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    return ns.func(ns)


if __name__ == "__main__":
    sys.exit(main())
