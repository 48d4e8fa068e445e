"""Convergence bound constants for a fixed schedule.

With total sample count K, scheduled samples K_a = sum K a, gradient bound L,
strong convexity mu, and gradient deviation parameters xi1/xi2, the expected
optimality gap after T rounds contracts per round by C1 with additive terms
C2 (unscheduled data) and C3 (injected noise):

    C1 = 1 - mu/L + (4 xi2 / K^2) (sum K (1 - a))^2
    C2 = (2 xi1 / (L K^2)) (sum K (1 - a))^2
    C3 = (d / (2 L)) sum (K a sigma / K_a)^2

The recursion converges iff C1 < 1.  C3 stays bounded whenever the noise
budget sum K sigma^2 a <= v_max sum K a holds, which `c3_constraint_check`
verifies directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .radio import Allocation
from .topology import Topology


@dataclass(frozen=True)
class BoundConstants:
    c1: float
    c2: float
    c3: float

    @property
    def converges(self) -> bool:
        return self.c1 < 1.0


def evaluate_bound(topo: Topology, alloc: Allocation, config: SystemConfig,
                   dim: int) -> BoundConstants:
    mask = alloc.scheduled(topo).astype(bool)
    K = topo.samples.astype(float)
    total = K.sum()
    k_a = K[mask].sum()
    if k_a == 0.0:
        raise ValueError("bound undefined with no scheduled samples")
    excluded = K[~mask].sum()
    c1 = 1.0 - config.mu / config.clip + 4.0 * config.xi2 * float(excluded / total) ** 2
    c2 = 2.0 * config.xi1 / config.clip * float(excluded / total) ** 2
    noise = float(np.sum((K[mask] * alloc.sigmas[mask] / k_a) ** 2))
    c3 = dim / (2.0 * config.clip) * noise
    return BoundConstants(c1=c1, c2=c2, c3=c3)


def c3_constraint_check(topo: Topology, alloc: Allocation, config: SystemConfig,
                        rel_tol: float = 1e-8) -> bool:
    """True when the scheduled noise variance respects its budget:
    sum K sigma^2 a <= v_max sum K a (within rel_tol)."""
    mask = alloc.scheduled(topo).astype(bool)
    K = topo.samples[mask].astype(float)
    lhs = float(K @ alloc.sigmas[mask] ** 2)
    rhs = config.v_max * float(K.sum())
    return lhs <= rhs * (1.0 + rel_tol)
