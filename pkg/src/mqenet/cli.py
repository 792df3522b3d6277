"""Command line interface: generate users, optimize one network, sweep, theory tables.

Exit codes: 0 success, 1 invalid input, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .geometry import load_users, sample_users, save_users
from .harness import SweepConfig, run_sweep
from .metrics import observables
from .optimizer import ReconstructionError, build_mqe, save_network, write_edge_list
from . import theory
from .theory import NumericError


def _cmd_generate(args) -> int:
    u = sample_users(args.n, args.side, args.seed, lambda0=args.lambda0)
    save_users(u, args.out)
    print(f"wrote {u.n} users to {args.out}")
    return 0


def _cmd_optimize(args) -> int:
    u = load_users(args.users)
    net = build_mqe(u, args.alpha, args.p)
    obs = observables(net)
    print(f"n={net.n} alpha={args.alpha:g} p={args.p:g}")
    print(f"q_star={obs.q_star:.6g}")
    print(f"l_star={obs.l_star:.6g}")
    print(f"q_min={obs.q_min:.6g}")
    print(f"rho={obs.rho:.6g}")
    print(f"efficiency={obs.efficiency:.6g}")
    if args.out:
        save_network(net, args.out)
        print(f"wrote network document to {args.out}")
    if args.edge_list:
        write_edge_list(net, args.edge_list)
        print(f"wrote edge list to {args.edge_list}")
    return 0


def _cmd_sweep(args) -> int:
    config = SweepConfig.from_json(args.config)
    if args.outdir:
        config.outdir = args.outdir
    result = run_sweep(config, workers=args.workers)
    print(f"sweep {result.config_hash}: {len(result.cells)} cells in {result.outdir}")
    return 0


def _theory_rows(args):
    what = args.what
    if what == "thresholds":
        yield ("m", "p", "alpha_c")
        for m in range(1, args.m_max + 1):
            yield (m, args.p, theory.alpha_c_step(m, args.p))
    elif what == "qfc":
        yield ("l_over_lambda", "q_fc", "q_fc_small_extent", "q_fc_large_extent")
        for l in args.l_over_lambda:
            yield (l, theory.q_fc(l), theory.q_fc_small_extent(l), theory.q_fc_large_extent(l))
    elif what == "qmst":
        yield ("n", "l_over_lambda", "q_mst")
        for l in args.l_over_lambda:
            for n in args.n:
                yield (n, l, theory.q_mst(n, l))
    elif what == "alpha-bar":
        yield ("l_over_lambda", "p", "alpha_bar")
        for l in args.l_over_lambda:
            yield (l, args.p, theory.alpha_bar(l, args.p))
    elif what == "regime":
        ds = np.geomspace(args.d_min, args.d_max, args.d_points)
        diagram = theory.regime_diagram(ds, args.p)
        yield ("curve", "m", "d_over_lambda", "alpha")
        for i, d in enumerate(diagram.d_over_lambda):
            yield ("first_transition", int(diagram.mbar[i]), float(d), float(diagram.alpha_first[i]))
        for m, curve in sorted(diagram.step_boundaries.items()):
            for d, a in zip(diagram.d_over_lambda, curve):
                yield ("step", m, float(d), float(a))


def _cmd_theory(args) -> int:
    rows = list(_theory_rows(args))
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.writer(out)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mqenet",
        description="Maximal-quantum-efficiency networks over planar users: "
        "optimal trusted-node topologies trading capacitance against security.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a uniform user set and write a coordinates file")
    g.add_argument("--n", type=int, required=True, help="number of users")
    g.add_argument("--side", type=float, required=True, help="square side L (same units as lambda0)")
    g.add_argument("--lambda0", type=float, default=1.0, help="decay length (default 1)")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="coordinates file to write")
    g.set_defaults(func=_cmd_generate)

    o = sub.add_parser("optimize", help="optimal network for a coordinates file")
    o.add_argument("--users", required=True, help="coordinates file (see generate)")
    o.add_argument("--alpha", type=float, required=True, help="trade-off weight in [0, 1]")
    o.add_argument("--p", type=float, required=True, help="per-node compromise probability")
    o.add_argument("--out", help="write the JSON network document here")
    o.add_argument("--edge-list", help="write a plain 'i j d_ij q_ij' edge list here")
    o.set_defaults(func=_cmd_optimize)

    s = sub.add_parser("sweep", help="run an ensemble sweep from a JSON config")
    s.add_argument("--config", required=True, help="SweepConfig JSON file")
    s.add_argument("--outdir", help="override the config's output directory")
    s.add_argument("--workers", type=int, default=None, help="parallel realizations per cell")
    s.set_defaults(func=_cmd_sweep)

    t = sub.add_parser("theory", help="closed-form reference tables as CSV")
    t.add_argument("--what", required=True,
                   choices=("thresholds", "qfc", "qmst", "alpha-bar", "regime"))
    t.add_argument("--p", type=float, default=1.0 - 1.0 / np.e)
    t.add_argument("--m-max", type=int, default=5)
    t.add_argument("--l-over-lambda", type=float, nargs="*", default=[0.1, 1.0, 3.0, 10.0])
    t.add_argument("--n", type=int, nargs="*", default=[256, 512, 1024, 2048])
    t.add_argument("--d-min", type=float, default=0.01)
    t.add_argument("--d-max", type=float, default=100.0)
    t.add_argument("--d-points", type=int, default=41)
    t.add_argument("--out", default="-", help="CSV path, or - for stdout")
    t.set_defaults(func=_cmd_theory)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, ReconstructionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
