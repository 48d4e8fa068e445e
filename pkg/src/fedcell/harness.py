"""Replica experiments: run algorithms across seeds, emit deterministic csv.

A replica = one topology seed.  All requested algorithms run against the same
topology and the same initial draws, so per-seed comparisons are paired.
Replica work can fan out over processes; rows are ordered by (replica,
algorithm) before writing, so output bytes do not depend on the job count.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import c3_constraint_check, evaluate_bound
from .config import SystemConfig
from .data import load_dataset
from .dp import leakage_report, optimize_noise
from .fl import train
from .mlp import Mlp
from .scheduler import normalized_objective, objective_value, opt_sched, rnd_sched
from .topology import generate_topology

ALGORITHMS = ("rnd", "opt", "opt+dp")

SCENARIOS = {
    "r5": {"num_rbs": 5, "gamma": 1e6},
    "r8": {"num_rbs": 8, "gamma": 1e7},
}

CSV_NAMES = ("objective_cdf.csv", "accuracy.csv", "loss.csv",
             "leakage_cdf.csv", "bounds.csv")


@dataclass
class ExperimentSpec:
    config: SystemConfig
    algorithms: tuple = ALGORITHMS
    replicas: int = 100
    seed_base: int | None = None   # defaults to config.seed
    train: bool = False
    jobs: int = 1
    scenario: str | None = None    # shorthand presets over the config

    def resolved_config(self) -> SystemConfig:
        cfg = self.config
        if self.scenario is not None:
            if self.scenario not in SCENARIOS:
                raise ValueError(f"unknown scenario {self.scenario!r}")
            cfg = cfg.replace(**SCENARIOS[self.scenario])
        return cfg

    def base_seed(self) -> int:
        return self.config.seed if self.seed_base is None else self.seed_base


@dataclass
class ReplicaRecord:
    algorithm: str
    replica: int
    seed: int
    objective: float
    normalized_objective: float
    scheduled_users: int
    scheduled_samples: float
    leakage_total: float
    leakage_users: list          # (user id, rho) for scheduled users
    c1: float
    c2: float
    c3: float
    converges: bool
    c3_ok: bool
    accuracy: list | None = None
    loss: list | None = None


@dataclass
class MetricsTable:
    rows: list = field(default_factory=list)
    errors: list = field(default_factory=list)   # (algorithm, replica, message)

    def rows_for(self, algorithm: str) -> list:
        return [r for r in self.rows if r.algorithm == algorithm]

    def paired(self, metric: str, first: str, second: str):
        """Aligned per-replica metric arrays for two algorithms, skipping
        replicas where either side failed."""
        a = {r.replica: getattr(r, metric) for r in self.rows_for(first)}
        b = {r.replica: getattr(r, metric) for r in self.rows_for(second)}
        keys = sorted(set(a) & set(b))
        return (np.array([a[k] for k in keys]), np.array([b[k] for k in keys]))


_DATASET_CACHE = {}


def _dataset_for(config: SystemConfig):
    key = (config.synthetic_data, config.dataset_path, config.dataset_train_size,
           config.dataset_test_size, config.synthetic_features,
           config.synthetic_classes, config.seed)
    if key not in _DATASET_CACHE:
        _DATASET_CACHE[key] = load_dataset(config)
    return _DATASET_CACHE[key]


def _model_dim(config: SystemConfig, dataset) -> int:
    if dataset is not None:
        return Mlp(dataset.input_dim, dataset.num_classes).dim
    return Mlp(config.synthetic_features, config.synthetic_classes).dim


def run_replica(config: SystemConfig, algorithms, replica: int, seed: int,
                do_train: bool):
    """All requested algorithms on one topology seed.  Returns
    (records, errors)."""
    records = []
    errors = []
    topo = generate_topology(config, seed)
    dataset = _dataset_for(config) if do_train else None
    dim = _model_dim(config, dataset)
    base_opt = None
    for alg in algorithms:
        try:
            if alg == "rnd":
                alloc = rnd_sched(topo, config, seed)
            elif alg == "opt":
                base_opt = opt_sched(topo, config, seed)
                alloc = base_opt
            elif alg == "opt+dp":
                if base_opt is None:
                    base_opt = opt_sched(topo, config, seed)
                alloc = base_opt.copy()
                alloc.sigmas = optimize_noise(topo, base_opt, config)
            else:
                raise ValueError(f"unknown algorithm {alg!r}")
            mask = alloc.scheduled(topo).astype(bool)
            report = leakage_report(topo, alloc, config)
            const = evaluate_bound(topo, alloc, config, dim)
            rec = ReplicaRecord(
                algorithm=alg,
                replica=replica,
                seed=seed,
                objective=objective_value(topo, alloc, config),
                normalized_objective=normalized_objective(topo, alloc, config),
                scheduled_users=int(mask.sum()),
                scheduled_samples=float(topo.samples[mask].sum()),
                leakage_total=report.total,
                leakage_users=[(int(u), float(report.rho[u]))
                               for u in np.flatnonzero(mask)],
                c1=const.c1,
                c2=const.c2,
                c3=const.c3,
                converges=const.converges,
                c3_ok=c3_constraint_check(topo, alloc, config),
            )
            if do_train:
                state = train(topo, alloc, dataset, config, seed)
                rec.accuracy = list(state.test_accuracy)
                rec.loss = list(state.test_loss)
            records.append(rec)
        except Exception as exc:  # keep the sweep alive; pairing drops this replica
            errors.append((alg, replica, f"{type(exc).__name__}: {exc}"))
    return records, errors


def _replica_task(args):
    return run_replica(*args)


def run_experiment(spec: ExperimentSpec) -> MetricsTable:
    config = spec.resolved_config()
    base = spec.base_seed()
    tasks = [(config, tuple(spec.algorithms), r, base + r, spec.train)
             for r in range(spec.replicas)]
    table = MetricsTable()
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            outcomes = list(pool.map(_replica_task, tasks))
    else:
        outcomes = [_replica_task(t) for t in tasks]
    order = {alg: i for i, alg in enumerate(spec.algorithms)}
    for records, errors in outcomes:
        table.rows.extend(records)
        table.errors.extend(errors)
    table.rows.sort(key=lambda r: (r.replica, order[r.algorithm]))
    table.errors.sort(key=lambda e: (e[1], e[0]))
    return table


def empirical_cdf(values):
    """(sorted values, k/n levels) of the empirical distribution."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return v, v
    return v, np.arange(1, v.size + 1) / v.size


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def emit_csv(table: MetricsTable, spec: ExperimentSpec, out_dir) -> list:
    """Write the five experiment csv files; returns their paths.

    Sections without data (e.g. accuracy without --train) still get their
    header, so downstream readers never branch on file existence.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / name for name in CSV_NAMES]

    def write(path, header, rows):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for row in rows:
                wr.writerow([_fmt(x) for x in row])

    cdf_rows = []
    leak_rows = []
    acc_rows = []
    loss_rows = []
    bound_rows = []
    for alg in spec.algorithms:
        rows = table.rows_for(alg)
        vals, lev = empirical_cdf([r.normalized_objective for r in rows])
        cdf_rows += [(alg, v, l) for v, l in zip(vals, lev)]
        pooled = [rho for r in rows for _, rho in r.leakage_users]
        vals, lev = empirical_cdf(pooled)
        leak_rows += [(alg, v, l) for v, l in zip(vals, lev)]
    for r in table.rows:
        if r.accuracy is not None:
            acc_rows += [(r.algorithm, r.replica, t, a)
                         for t, a in enumerate(r.accuracy)]
        if r.loss is not None:
            loss_rows += [(r.algorithm, r.replica, t, x)
                          for t, x in enumerate(r.loss)]
        bound_rows.append((r.algorithm, r.replica, r.seed, r.objective,
                           r.normalized_objective, r.scheduled_users,
                           r.scheduled_samples, r.leakage_total,
                           r.c1, r.c2, r.c3, r.converges, r.c3_ok))

    write(paths[0], ["algorithm", "normalized_objective", "cdf"], cdf_rows)
    write(paths[1], ["algorithm", "replica", "round", "test_accuracy"], acc_rows)
    write(paths[2], ["algorithm", "replica", "round", "test_loss"], loss_rows)
    write(paths[3], ["algorithm", "rho", "cdf"], leak_rows)
    write(paths[4], ["algorithm", "replica", "seed", "objective",
                     "normalized_objective", "scheduled_users",
                     "scheduled_samples", "leakage_total",
                     "c1", "c2", "c3", "converges", "c3_check"], bound_rows)
    return paths
