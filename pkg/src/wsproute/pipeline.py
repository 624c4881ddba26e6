"""End-to-end helpers: problem -> assignment -> pairs -> routed solution."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .assign import assign_tracks
from .decompose import PadStrategy, RoutingInstance, decompose_problem
from .pattern import RouteSolution, route_sequence
from .problem import Problem

ORACLE_MAX_PAIRS = 8


def build_instance(p: Problem, n_max: int | None = None,
                   strategy: PadStrategy = PadStrategy.EMPTY,
                   seed: int = 0) -> RoutingInstance:
    ta = assign_tracks(p)
    return decompose_problem(p, ta, n_max=n_max, strategy=strategy, seed=seed)


def oracle_sequence(inst: RoutingInstance) -> tuple[list[int], RouteSolution]:
    """Exhaustive minimum over all orders; refuses more than 8 pairs."""
    n = inst.n_real
    if n > ORACLE_MAX_PAIRS:
        raise ValueError(f"oracle sequencer capped at {ORACLE_MAX_PAIRS} pairs, got {n}")
    best = None
    for perm in itertools.permutations(range(n)):
        sol = route_sequence(inst, perm)
        if best is None or sol.cost < best[1].cost:
            best = (list(perm), sol)
    if best is None:  # zero pairs
        return [], route_sequence(inst, [])
    return best


def random_sequence(inst: RoutingInstance,
                    rng: np.random.Generator) -> tuple[list[int], RouteSolution]:
    order = [int(v) for v in rng.permutation(inst.n_real)]
    return order, route_sequence(inst, order)
