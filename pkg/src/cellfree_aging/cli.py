"""
Command line entry point.

    cellfree-aging run spec.yaml --out results/
    cellfree-aging figure F5 --scale desk --threads 4
    cellfree-aging oracle --draws 100000
    cellfree-aging selftest
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, InfeasiblePilotAssignment
from .harness import (FIGURES, emit_results, figure_specs, format_value, load_spec,
                      run_experiment)

log = logging.getLogger("cellfree_aging")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="override the base seed")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=int, default=1, help="worker threads over realizations")
    p.add_argument("--realizations", type=int, default=None, help="override realization count")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cellfree-aging",
                                 description="Downlink SE of cell-free / cellular massive MIMO "
                                             "under channel aging")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment spec (YAML or JSON)")
    p.add_argument("spec")
    _common(p)

    p = sub.add_parser("figure", help="run the preset experiments of one figure")
    p.add_argument("fig_id", choices=FIGURES)
    p.add_argument("--scale", choices=("desk", "paper"), default="desk")
    _common(p)

    p = sub.add_parser("oracle", help="closed forms vs Monte-Carlo table")
    p.add_argument("--spec", default=None, help="experiment spec whose base config to check")
    p.add_argument("--draws", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, help="directory for the JSON report")

    p = sub.add_parser("selftest", help="fast invariant checks")
    p.add_argument("--deployments", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return ap


def _fail(command: str, failures: list, out=None) -> int:
    record = {"status": "fail", "command": command, "failures": failures}
    print(json.dumps(record), file=sys.stderr)
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / f"{command}_failures.json").write_text(json.dumps(record, indent=1))
    return 1


def _run_specs(specs, args) -> int:
    for spec in specs:
        if args.seed is not None:
            spec = replace(spec, base=spec.base.with_(seed=args.seed))
        if args.realizations is not None:
            spec = spec.with_realizations(args.realizations)
        report = run_experiment(spec, threads=args.threads)
        files = emit_results(report, args.out, args.format)
        print(f"{report.name}: {report.realizations} realizations in {report.runtime:.2f}s, "
              f"dominance violations {report.dominance_violations}/{report.dominance_checked}")
        for s in report.schemes:
            q, m = report.ninety_likely(s), report.mean_sum_se(s)
            for v, a, b in zip(report.values, q, m):
                print(f"  {s:10s} {format_value(v):>8s}  90%-likely {a:.4f}  sum {b:.3f}")
        log.info("wrote %s", ", ".join(str(f) for f in files))
        if report.dominance_violations:
            return _fail("run", [{"name": report.name, "dominance_violations":
                                  report.dominance_violations}], args.out)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            return _run_specs([load_spec(args.spec)], args)
        if args.command == "figure":
            return _run_specs(figure_specs(args.fig_id, args.scale), args)
        if args.command == "oracle":
            from .validation import oracle_suite

            config = load_spec(args.spec).base if args.spec else None
            rows = oracle_suite(config, seed=args.seed, n_draws=args.draws)
            for r in rows:
                flag = "PASS" if r.passed else "FAIL"
                print(f"{flag} {r.term:16s} [{r.index:>5s}] n={r.n:<4d} closed={r.closed_form:.6g} "
                      f"mc={r.estimate:.6g} ({r.tolerance})")
            bad = [r.to_dict() for r in rows if not r.passed]
            print(f"{len(rows) - len(bad)}/{len(rows)} passed")
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "oracle.json").write_text(
                    json.dumps([r.to_dict() for r in rows], indent=1))
            return _fail("oracle", bad, args.out) if bad else 0
        if args.command == "selftest":
            from .validation import selftest

            rows = selftest(args.deployments, args.seed)
            for r in rows:
                print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
            bad = [r for r in rows if not r["passed"]]
            return _fail("selftest", bad, args.out) if bad else 0
    except (ConfigError, InfeasiblePilotAssignment, OSError) as exc:
        return _fail(args.command, [{"error": type(exc).__name__, "message": str(exc)}])
    return 2


if __name__ == "__main__":
    sys.exit(main())
