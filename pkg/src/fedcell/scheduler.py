"""Resource block scheduling.

The global objective rewards scheduling sample-rich users and penalises their
aggregate noise contribution:

    sum_users K * (1 - a)  +  gamma * sum_users a / (K * sigma)^2

subject to one block per user, exclusive blocks inside a cell, a power cap,
a minimum uplink rate, and a cap on the sample-weighted noise variance of the
scheduled set.  Holding every other cell fixed, the per-cell subproblem is a
small assignment problem with a knapsack-style budget, solved exactly by
branch and bound.  `opt_sched` sweeps the cells with that exact solver,
`rnd_sched` keeps the randomised initial schedule; both then solve powers
jointly and drop users whose minimum rate cannot be met.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeding
from .config import SystemConfig
from .radio import (Allocation, empty_allocation, enforce_rate,
                    interference_matrix, snr_gap, solve_powers)
from .topology import Topology


class ScheduleInfeasibleError(RuntimeError):
    """No schedule satisfies the noise budget for this cell."""


@dataclass
class CellProblem:
    """One cell's scheduling subproblem with the rest of the system frozen."""
    cell: int
    users: np.ndarray            # global user ids, ascending
    samples: np.ndarray          # K per user
    sigmas: np.ndarray           # current noise scale per user
    feasible: np.ndarray         # (users, blocks) True where power cap allows the pairing
    required_power: np.ndarray   # (users, blocks) W needed to hit the minimum rate
    foreign_samples: float       # sum of K over scheduled users of other cells
    foreign_noise: float         # sum of K sigma^2 over scheduled users of other cells
    gamma: float
    v_max: float
    num_rbs: int

    @property
    def budget_tol(self) -> float:
        """Absolute slop for the noise budget, scaled to the instance."""
        scale = self.v_max * (self.foreign_samples + float(self.samples.sum()))
        scale += abs(self.foreign_noise)
        return 1e-9 * max(1.0, scale)


@dataclass
class ScheduleSolution:
    rb: np.ndarray               # (users, blocks) 0/1
    objective: float             # cell share of the global objective
    status: str = "exact"


def build_cell_problem(topo: Topology, alloc: Allocation, cell: int,
                       config: SystemConfig) -> CellProblem:
    users = topo.cell_users[cell]
    if users.size and (alloc.sigmas[users] <= 0.0).any():
        raise ValueError("every user needs a positive noise scale to score a schedule")
    inter = interference_matrix(alloc, topo, config.num_rbs)[cell]
    gap = snr_gap(config)
    h = topo.gains[cell, users]
    req = gap * (inter[None, :] + config.bandwidth * config.noise_psd) / h[:, None]
    feasible = req <= config.p_max * (1.0 + 1e-12)

    mask = alloc.scheduled(topo).astype(bool)
    foreign = mask & (topo.assignment != cell)
    fk = topo.samples[foreign].astype(float)
    fsig = alloc.sigmas[foreign]
    return CellProblem(
        cell=cell,
        users=users,
        samples=topo.samples[users].astype(float),
        sigmas=alloc.sigmas[users].copy(),
        feasible=feasible,
        required_power=req,
        foreign_samples=float(fk.sum()),
        foreign_noise=float((fk * fsig ** 2).sum()),
        gamma=config.gamma,
        v_max=config.v_max,
        num_rbs=config.num_rbs,
    )


def _matchable(users, rb_sets, banned) -> bool:
    """True when every listed user can take a distinct block outside `banned`."""
    match = {}

    def augment(i, seen):
        for nb in rb_sets[i]:
            if nb in banned or nb in seen:
                continue
            seen.add(nb)
            j = match.get(nb)
            if j is None or augment(j, seen):
                match[nb] = i
                return True
        return False

    return all(augment(i, set()) for i in users)


def _lex_min_blocks(users, rb_sets) -> dict:
    """Assign blocks to `users` (sorted) preferring low block ids, keeping the
    remainder matchable at every step."""
    taken = set()
    out = {}
    users = list(users)
    for idx, i in enumerate(users):
        rest = users[idx + 1:]
        for nb in rb_sets[i]:
            if nb in taken:
                continue
            if _matchable(rest, rb_sets, taken | {nb}):
                out[i] = nb
                taken.add(nb)
                break
        else:
            raise AssertionError("chosen set lost matchability")
    return out


def solve_cell_schedule(problem: CellProblem) -> ScheduleSolution:
    """Exact minimiser of the cell subproblem.

    Users are explored in order of their net objective change
    cost_i = -K_i + gamma / (K_i sigma_i)^2, with three prunes: an additive
    bound from the most negative remaining costs, reachability of the noise
    budget, and incremental bipartite matching against the power-feasible
    blocks.  Exact objective ties resolve to the lexicographically smallest
    user set, then lowest block ids.
    """
    K = problem.samples
    U, R = problem.feasible.shape
    w = 1.0 / (K * problem.sigmas) ** 2
    cost = -K + problem.gamma * w
    g = K * (problem.sigmas ** 2 - problem.v_max)
    slack = problem.v_max * problem.foreign_samples - problem.foreign_noise
    tol = problem.budget_tol

    rb_sets = [tuple(np.flatnonzero(problem.feasible[i])) for i in range(U)]
    order = sorted((i for i in range(U) if rb_sets[i]), key=lambda i: (cost[i], i))
    n = len(order)

    # order is ascending in cost, so the negative costs of any suffix are its
    # leading entries; window sums over this prefix array bound completions.
    neg_prefix = [0.0]
    for i in order:
        neg_prefix.append(neg_prefix[-1] + min(float(cost[i]), 0.0))
    # per suffix: partial sums of its sorted negative budget weights
    suffix_g = []
    for pos in range(n + 1):
        negs = sorted(float(g[i]) for i in order[pos:] if g[i] < 0.0)
        sums = [0.0]
        for v in negs:
            sums.append(sums[-1] + v)
        suffix_g.append(sums)

    best_obj = math.inf
    best_set = None
    if slack >= -tol:
        best_obj, best_set = 0.0, ()

    match = {}

    def augment(i, seen):
        for nb in rb_sets[i]:
            if nb in seen:
                continue
            seen.add(nb)
            j = match.get(nb)
            if j is None or augment(j, seen):
                match[nb] = i
                return True
        return False

    chosen = []

    def consider(total):
        nonlocal best_obj, best_set
        key = tuple(sorted(chosen))
        if total < best_obj or (total == best_obj and (best_set is None or key < best_set)):
            best_obj, best_set = total, key

    def dfs(pos, sum_c, sum_g):
        if pos == n or len(chosen) == R:
            return
        cap = R - len(chosen)
        sums = suffix_g[pos]
        if sum_g + sums[min(cap, len(sums) - 1)] > slack + tol:
            return
        bound = sum_c + neg_prefix[min(pos + cap, n)] - neg_prefix[pos]
        if bound > best_obj:
            return
        i = order[pos]
        saved = dict(match)
        if augment(i, set()):
            chosen.append(i)
            nc = sum_c + float(cost[i])
            ng = sum_g + float(g[i])
            if ng <= slack + tol:
                consider(nc)
            dfs(pos + 1, nc, ng)
            chosen.pop()
            match.clear()
            match.update(saved)
        dfs(pos + 1, sum_c, sum_g)

    dfs(0, 0.0, 0.0)
    if best_set is None:
        raise ScheduleInfeasibleError(
            f"cell {problem.cell}: no user set fits the noise budget")

    blocks = _lex_min_blocks(best_set, rb_sets)
    rb = np.zeros((U, R), dtype=np.int8)
    for i, nb in blocks.items():
        rb[i, nb] = 1
    x = np.zeros(U)
    if best_set:
        x[list(best_set)] = 1.0
    objective = float(np.sum(K * (1.0 - x)) + problem.gamma * np.sum(w * x))
    return ScheduleSolution(rb=rb, objective=objective)


def _init_state(topo: Topology, config: SystemConfig, seed: int):
    """Shared random starting point: shuffled round-robin blocks, uniform
    powers, uniform sigma * K in [n_min, 6 n_min]."""
    rng = np.random.default_rng(seeding.subseed(seed, seeding.INIT))
    alloc = empty_allocation(topo, config.num_rbs)
    for s, users in enumerate(topo.cell_users):
        if users.size == 0:
            continue
        perm = rng.permutation(users.size)
        for j in range(min(users.size, config.num_rbs)):
            alloc.rb[s][perm[j], j] = 1
    p_draw = rng.uniform(0.0, config.p_max, topo.num_users)
    mask = alloc.scheduled(topo).astype(bool)
    K = topo.samples.astype(float)
    cap = config.v_max * K[mask].sum()
    for _ in range(100):
        scale = rng.uniform(config.n_min, 6.0 * config.n_min, topo.num_users)
        sig = scale / K
        if float(K[mask] @ sig[mask] ** 2) <= cap:
            break
    else:
        raise RuntimeError("no initial noise draw fits the variance budget")
    alloc.powers = np.where(mask, p_draw, 0.0)
    alloc.sigmas = sig
    return alloc, p_draw


def init_allocation(topo: Topology, config: SystemConfig, seed: int) -> Allocation:
    alloc, _ = _init_state(topo, config, seed)
    return alloc


def rnd_sched(topo: Topology, config: SystemConfig, seed: int) -> Allocation:
    """Keep the random initial schedule; solve powers, then drop users whose
    minimum rate cannot be met."""
    alloc, _ = _init_state(topo, config, seed)
    alloc.powers = solve_powers(topo, alloc, config)
    return enforce_rate(topo, alloc, config)


def opt_sched(topo: Topology, config: SystemConfig, seed: int) -> Allocation:
    """Sweep the cells with the exact subproblem solver, then solve powers
    jointly and drop users whose minimum rate cannot be met.

    During the sweep, powers stay at their initial draws masked by the latest
    schedule; the joint solve afterwards replaces them.
    """
    alloc, p_draw = _init_state(topo, config, seed)
    for _ in range(config.sweeps):
        for s in range(topo.num_cells):
            users = topo.cell_users[s]
            if users.size == 0:
                continue
            sol = solve_cell_schedule(build_cell_problem(topo, alloc, s, config))
            alloc.rb[s] = sol.rb.copy()
            on = sol.rb.sum(axis=1) == 1
            alloc.powers[users] = np.where(on, p_draw[users], 0.0)
    alloc.powers = solve_powers(topo, alloc, config)
    return enforce_rate(topo, alloc, config)


def objective_value(topo: Topology, alloc: Allocation, config: SystemConfig) -> float:
    """sum K (1 - a) + gamma * sum a / (K sigma)^2 over all users."""
    mask = alloc.scheduled(topo).astype(bool)
    if (alloc.sigmas[mask] <= 0.0).any():
        raise ValueError("scheduled users need a positive noise scale")
    K = topo.samples.astype(float)
    served = 1.0 / (K[mask] * alloc.sigmas[mask]) ** 2
    return float(K[~mask].sum() + config.gamma * served.sum())


def normalized_objective(topo: Topology, alloc: Allocation, config: SystemConfig) -> float:
    return objective_value(topo, alloc, config) / float(topo.samples.sum())
