"""Command line front end.

    fedcell-sim run      --config cfg.yaml --algorithms rnd,opt,opt+dp --out dir
    fedcell-sim schedule --config cfg.yaml --algorithm opt --out dir
    fedcell-sim privacy  --config cfg.yaml --algorithm opt+dp
    fedcell-sim bound    --config cfg.yaml --algorithm opt
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .bounds import c3_constraint_check, evaluate_bound
from .config import load_config
from .dp import leakage_report, optimize_noise
from .harness import (ALGORITHMS, SCENARIOS, ExperimentSpec, MetricsTable,
                      emit_csv, run_experiment)
from .mlp import Mlp
from .radio import dump_power_system, uplink_rate
from .scheduler import objective_value, normalized_objective, opt_sched, rnd_sched
from .topology import generate_topology


def _build_allocation(topo, config, algorithm, seed):
    if algorithm == "rnd":
        return rnd_sched(topo, config, seed)
    if algorithm == "opt":
        return opt_sched(topo, config, seed)
    if algorithm == "opt+dp":
        alloc = opt_sched(topo, config, seed)
        out = alloc.copy()
        out.sigmas = optimize_noise(topo, alloc, config)
        return out
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _open_out(path):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def cmd_run(args) -> int:
    config = load_config(args.config)
    algorithms = tuple(a.strip() for a in args.algorithms.split(",") if a.strip())
    for alg in algorithms:
        if alg not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {alg!r} (choose from {', '.join(ALGORITHMS)})")
    spec = ExperimentSpec(
        config=config,
        algorithms=algorithms,
        replicas=args.replicas,
        seed_base=args.seed,
        train=args.train,
        jobs=args.jobs,
        scenario=args.scenario,
    )
    table = run_experiment(spec)
    paths = emit_csv(table, spec, args.out)
    print(f"replicas: {args.replicas}  algorithms: {','.join(algorithms)}  "
          f"rows: {len(table.rows)}  failures: {len(table.errors)}")
    for alg, rep, msg in table.errors:
        print(f"failed: {alg} replica {rep}: {msg}", file=sys.stderr)
    for p in paths:
        print(p)
    return 0


def cmd_schedule(args) -> int:
    config = load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    topo = generate_topology(config, seed)
    alloc = _build_allocation(topo, config, args.algorithm, seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rb_idx = alloc.rb_index(topo)
    with open(out_dir / "allocation.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["user", "cell", "samples", "block", "power_w", "sigma", "rate_bit_s"])
        for u in range(topo.num_users):
            rate = uplink_rate(alloc, topo, config, u)
            wr.writerow([u, int(topo.assignment[u]), int(topo.samples[u]),
                         int(rb_idx[u]), repr(float(alloc.powers[u])),
                         repr(float(alloc.sigmas[u])), repr(rate)])

    mask = alloc.scheduled(topo).astype(bool)
    K = topo.samples.astype(float)
    with open(out_dir / "cell_objectives.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["cell", "objective"])
        for s, users in enumerate(topo.cell_users):
            on = mask[users]
            served = 1.0 / (K[users][on] * alloc.sigmas[users][on]) ** 2
            val = float(K[users][~on].sum() + config.gamma * served.sum())
            wr.writerow([s, repr(val)])

    if args.dump_system:
        dump_power_system(topo, alloc, config, out_dir)
    print(f"objective={objective_value(topo, alloc, config)!r} "
          f"normalized={normalized_objective(topo, alloc, config)!r} "
          f"scheduled={int(mask.sum())}")
    return 0


def cmd_privacy(args) -> int:
    config = load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    topo = generate_topology(config, seed)
    alloc = _build_allocation(topo, config, args.algorithm, seed)
    report = leakage_report(topo, alloc, config)
    mask = alloc.scheduled(topo).astype(bool)
    fh, close = _open_out(args.out)
    try:
        wr = csv.writer(fh)
        wr.writerow(["user", "cell", "samples", "sigma", "rho"])
        for u in np.flatnonzero(mask):
            wr.writerow([int(u), int(topo.assignment[u]), int(topo.samples[u]),
                         repr(float(alloc.sigmas[u])), repr(float(report.rho[u]))])
        wr.writerow(["total", "", "", "", repr(report.total)])
    finally:
        if close:
            fh.close()
    return 0


def cmd_bound(args) -> int:
    config = load_config(args.config)
    seed = config.seed if args.seed is None else args.seed
    topo = generate_topology(config, seed)
    alloc = _build_allocation(topo, config, args.algorithm, seed)
    dim = args.dim
    if dim is None:
        dim = Mlp(config.synthetic_features, config.synthetic_classes).dim
    const = evaluate_bound(topo, alloc, config, dim)
    ok = c3_constraint_check(topo, alloc, config)
    wr = csv.writer(sys.stdout)
    wr.writerow(["c1", "c2", "c3", "converges", "c3_check"])
    wr.writerow([repr(const.c1), repr(const.c2), repr(const.c3),
                 "true" if const.converges else "false", "true" if ok else "false"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedcell-sim",
                                     description="multi-cell federated learning simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="replica experiment with csv output")
    run.add_argument("--config", required=True)
    run.add_argument("--algorithms", default=",".join(ALGORITHMS))
    run.add_argument("--replicas", type=int, default=100)
    run.add_argument("--train", action="store_true")
    run.add_argument("--out", required=True)
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--scenario", choices=sorted(SCENARIOS), default=None)
    run.set_defaults(func=cmd_run)

    sched = sub.add_parser("schedule", help="one allocation as csv")
    sched.add_argument("--config", required=True)
    sched.add_argument("--algorithm", choices=ALGORITHMS, default="opt")
    sched.add_argument("--seed", type=int, default=None)
    sched.add_argument("--out", required=True)
    sched.add_argument("--dump-system", action="store_true",
                       help="also write the power equality system A, b")
    sched.set_defaults(func=cmd_schedule)

    priv = sub.add_parser("privacy", help="per-user privacy loss as csv")
    priv.add_argument("--config", required=True)
    priv.add_argument("--algorithm", choices=ALGORITHMS, default="opt+dp")
    priv.add_argument("--seed", type=int, default=None)
    priv.add_argument("--out", default="-")
    priv.set_defaults(func=cmd_privacy)

    bound = sub.add_parser("bound", help="convergence constants for a schedule")
    bound.add_argument("--config", required=True)
    bound.add_argument("--algorithm", choices=ALGORITHMS, default="opt")
    bound.add_argument("--seed", type=int, default=None)
    bound.add_argument("--dim", type=int, default=None,
                       help="model dimension; defaults to the configured model")
    bound.set_defaults(func=cmd_bound)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
