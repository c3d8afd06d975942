"""Command-line entry point: ``onlinecover <subcommand> ...``.

Exit status is 0 when every enabled check in the report passed, 1 when a
check failed and 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import ExperimentConfig, InstanceSpec, emit_report, generate_instance, run_experiment


def _common(sp, instance=True):
    sp.add_argument("--seed", type=int, default=0, help="base seed (unsigned 64-bit)")
    sp.add_argument("--out", default=None, help="output directory for report.json and CSV tables")
    if instance:
        sp.add_argument("--instance", default=None, help="instance JSON file")


def _gen_args(sp):
    sp.add_argument("--m", type=int, default=3)
    sp.add_argument("--n", type=int, default=4)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--cost-dist", default="uniform:1:5")
    sp.add_argument("--proc-dist", default="uniform:1:3")
    sp.add_argument("--allow-large-p", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="onlinecover", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("gen", help="generate a random instance stamped with (C, L)")
    _gen_args(sp)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", default=None, help="instance JSON path (stdout if omitted)")

    sp = sub.add_parser("frac", help="fractional assignment and potential report")
    _common(sp)
    _gen_args(sp)
    sp.add_argument("--doubling", action="store_true", help="search budgets C' = 2^k")
    sp.add_argument("--phi-cap", type=float, default=10.0, help="tier cap factor for --doubling")

    for name, desc in (("round-lp", "l_p randomized rounding"), ("round-l1", "l_1 randomized rounding")):
        sp = sub.add_parser(name, help=desc)
        _common(sp)
        _gen_args(sp)
        sp.add_argument("--trials", type=int, default=100)
        sp.add_argument("--alpha", type=float, default=None, help="override the default alpha")
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("ocg", help="online covering with a convex objective")
    _common(sp)
    sp.add_argument("--step-eps", type=float, default=1e-3)
    sp.add_argument("--dim", type=int, default=4)
    sp.add_argument("--rows", type=int, default=3)
    sp.add_argument("--kind", choices=("linear", "lp-violation"), default="linear")
    sp.add_argument("--p", type=float, default=2.0)

    sp = sub.add_parser("adversary", help="binary-tree lower-bound adversary")
    _common(sp, instance=False)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--r", type=int, default=2)
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--step-eps", type=float, default=1e-3)

    sp = sub.add_parser("brute", help="exhaustive Pareto frontier")
    _common(sp)
    _gen_args(sp)

    sp = sub.add_parser("report", help="summarise a report.json")
    sp.add_argument("path")
    return ap


def _generator(args) -> dict:
    return {"m": args.m, "n": args.n, "p": args.p, "cost_dist": args.cost_dist, "proc_dist": args.proc_dist,
            "allow_large_p": args.allow_large_p}


def _summary(report: dict) -> str:
    lines = [f"schema {report.get('schema_version')}  algorithm {report['config']['algorithm']}  ok {report['ok']}"]
    for k, v in sorted(report.get("checks", {}).items()):
        lines.append(f"  {k:<22} {'pass' if v else 'FAIL'}")
    for key in ("aggregate", "fractional"):
        if key in report:
            for k, v in report[key].items():
                if isinstance(v, (int, float, str, bool)):
                    lines.append(f"  {key}.{k} = {v}")
    if "error" in report:
        lines.append(f"  error {report['error']['type']}: {report['error']['message']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "gen":
        inst = generate_instance(InstanceSpec(**_generator(args)), args.seed)
        text = json.dumps(inst.to_json(), indent=1)
        if args.out:
            Path(args.out).write_text(text, encoding="utf-8")
        else:
            print(text)
        return 0
    if args.cmd == "report":
        print(_summary(json.loads(Path(args.path).read_text(encoding="utf-8"))))
        return 0
    cfg = ExperimentConfig(algorithm=args.cmd, base_seed=args.seed, out_dir=args.out)
    if args.cmd == "ocg":
        cfg.instance_path = args.instance
        cfg.step_eps = args.step_eps
        cfg.generator = {"dim": args.dim, "n_rows": args.rows, "kind": args.kind, "p": args.p}
    elif args.cmd == "adversary":
        cfg.d, cfg.r, cfg.p, cfg.step_eps = args.d, args.r, args.p, args.step_eps
    else:
        cfg.instance_path = args.instance
        if args.instance is None:
            cfg.generator = _generator(args)
        if args.cmd == "frac":
            cfg.doubling, cfg.phi_cap_factor = args.doubling, args.phi_cap
        if args.cmd in ("round-lp", "round-l1"):
            cfg.trials, cfg.alpha, cfg.workers = args.trials, args.alpha, args.workers
    try:
        report = run_experiment(cfg)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out is None:
        print(emit_report(report))
    else:
        print(_summary(report))
    return 0 if report["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
