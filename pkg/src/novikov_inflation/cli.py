"""Command-line entry point: ``novikov-lab <verb> --config PATH [...]``.

Exit status is 0 when every verdict passes, 1 when any fails and 2 on a
usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, ConfigError, load_config, run, sweep


def build_parser():
    ap = argparse.ArgumentParser(prog="novikov-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    for verb in (*EXPERIMENTS, "sweep"):
        p = sub.add_parser(verb)
        if verb == "sweep":
            p.add_argument("--config", action="append", default=[], metavar="PATH",
                           help="member config; repeat for each member")
        else:
            p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR", help="output directory (per member: DIR/<index>)")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--mem-ceiling", type=int, metavar="BYTES")
    return ap


def _summary(rec):
    lines = []
    for v in rec.verdicts:
        bound = f"[{v.tolerance:g}, {v.upper:g}]" if v.comparator == "in" else f"{v.comparator} {v.tolerance:g}"
        lines.append(f"{'PASS' if v.passed else 'FAIL'}  {v.name} = {v.value:.6g} ({bound})")
    if rec.status != "ok":
        lines.append(f"FAIL  status: {rec.status}")
    return "\n".join(lines)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "sweep":
            cfgs = []
            for i, path in enumerate(args.config):
                out = None if args.out is None else Path(args.out) / f"{i:03d}"
                cfgs.append(load_config(path, out_dir=out, seed=args.seed))
            corpus = sweep(cfgs, args.mem_ceiling, args.threads)
            for rec in corpus.records:
                print(f"== {rec.experiment}")
                print(_summary(rec))
            for v in corpus.verdicts:
                print(f"{'PASS' if v.passed else 'FAIL'}  {v.name} = {v.value:.6g} (< {v.tolerance:g})")
            for f in corpus.failures:
                print(f"FAIL  {f}")
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "corpus.json").write_text(json.dumps(corpus.to_dict(), indent=2, sort_keys=True))
            return 0 if corpus.passed else 1
        cfg = load_config(args.config, name=args.verb, out_dir=args.out, seed=args.seed)
        rec = run(cfg, args.mem_ceiling, args.threads)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    print(_summary(rec))
    return 0 if rec.passed else 1


if __name__ == "__main__":
    sys.exit(main())
