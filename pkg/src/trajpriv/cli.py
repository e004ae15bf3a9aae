"""Command-line entry point: ``trajpriv {run,sweep,compare,selftest}``."""

import argparse
import json
import logging
import sys

from . import checks
from .pipeline import (comparison_rows, compare_equal_qos, point_rows, run_point, sweep, to_csv)
from .scenario import ScenarioConfig, load_config


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mechanism:
        changes["mechanism"] = args.mechanism
    if args.reps is not None:
        changes["reps"] = args.reps
    return cfg.with_(**changes) if changes else cfg


def _emit(rows, out):
    text = to_csv(rows, out)
    if out is None:
        sys.stdout.write(text)


def _trace(point, path):
    """Dump beliefs, pmfs and strategies so every CSV row can be recomputed."""
    runs = []
    for rec in point.runs:
        steps = []
        for s in rec.steps:
            members = list(s.dset.members)
            steps.append({
                "t": s.t, "true_cell": s.true_cell, "used_cell": s.used_cell, "observed": s.observed,
                "prior": s.prior.probs.tolist(), "posterior": s.posterior.probs.tolist(),
                "metric_prior": s.metric_prior.tolist(), "delta_set": members,
                "pmfs": {str(c): s.family[c].tolist() for c in members},
                "strategy": s.strategy.tolist(),
                "pls": {str(c): list(p.members) for c, p in s.pls.items()},
            })
        runs.append({"seed": rec.seed, "steps": steps})
    with open(path, "w") as fh:
        json.dump({"grid": [point.config.width, point.config.height, point.config.cell_size],
                   "runs": runs}, fh)


def cmd_run(args):
    cfg = _config(args)
    point = run_point(cfg)
    _emit(point_rows(point), args.out)
    if args.trace:
        _trace(point, args.trace)
    return 0


def cmd_sweep(args):
    cfg = _config(args)
    _, rows = sweep(cfg, _floats(args.epsilons), _floats(args.e_ms), detail=not args.summary)
    _emit(rows, args.out)
    return 0


def cmd_compare(args):
    cfg = _config(args)
    cmps = compare_equal_qos(cfg, _floats(args.targets), tuple(args.bracket), rel_tol=args.rel_tol)
    _emit(comparison_rows(cfg, cmps), args.out)
    for c in cmps:
        if c.error:
            print(f"target q={c.target_q:g}: skipped ({c.error})", file=sys.stderr)
        else:
            print(f"target q={c.target_q:g}: pf p={c.p('pf'):.4f}, exp p={c.p('exp'):.4f}, "
                  f"relative difference {100 * c.rel_diff:+.2f}%", file=sys.stderr)
    return 0


def cmd_selftest(args):
    return 0 if checks.selftest() else 1


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML file (default: built-in 10x10 scenario)")
    common.add_argument("--seed", type=int, help="master seed; replication r uses seed + r")
    common.add_argument("--out", help="CSV output path (default: stdout)")
    common.add_argument("--mechanism", choices=["pf", "closed", "exp"])
    common.add_argument("--reps", type=int, help="replications per point (default 100)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="trajpriv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="replicated runs of one scenario")
    p.add_argument("--trace", help="also write beliefs and pmfs of every step to this JSON file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", parents=[common], help="epsilon x E_m grid")
    p.add_argument("--epsilons", default="0.1 0.5 1 1.5 2 4 8")
    p.add_argument("--e-ms", default="1 2 3")
    p.add_argument("--summary", action="store_true", help="only the per-point aggregate rows")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", parents=[common], help="privacy of pf vs exp at equal QoS loss")
    p.add_argument("--targets", default="7 10 13", help="QoS loss targets in km")
    p.add_argument("--bracket", type=float, nargs=2, default=[2.5, 10.0], metavar=("LO", "HI"))
    p.add_argument("--rel-tol", type=float, default=0.001)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("selftest", parents=[common], help="quick randomized correctness checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
