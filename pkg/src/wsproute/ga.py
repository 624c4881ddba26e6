"""Genetic-algorithm baseline sequencer over instTerm-pair permutations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .decompose import RoutingInstance
from .pattern import route_sequence


@dataclass(frozen=True)
class GaParams:
    generations: int = 10
    population: int = 10
    elites: int = 4
    mutations: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.elites > self.population:
            raise ValueError("elites must not exceed population")
        if min(self.generations, self.population, self.elites) < 1 or self.mutations < 0:
            raise ValueError("all GA parameters must be positive")


class FitnessCache:
    """Memoizes route costs per order; one cache per RoutingInstance."""

    def __init__(self, inst: RoutingInstance):
        self.inst = inst
        self._cache: dict[tuple[int, ...], int] = {}
        self.evaluations = 0

    def cost(self, order) -> int:
        key = tuple(order)
        if key not in self._cache:
            self._cache[key] = route_sequence(self.inst, key).cost
            self.evaluations += 1
        return self._cache[key]

    def fitness(self, order) -> float:
        return -float(self.cost(order))


def pmx_crossover(pa: list[int], pb: list[int], rng: np.random.Generator) -> list[int]:
    """Partially matched crossover: the child inherits pa's segment [i, j) and
    fills the rest from pb, resolving conflicts through the segment mapping."""
    n = len(pa)
    if n < 2:
        return list(pa)
    i, j = sorted(rng.choice(n + 1, size=2, replace=False))
    return pmx_with_cuts(pa, pb, i, j)


def pmx_with_cuts(pa: list[int], pb: list[int], i: int, j: int) -> list[int]:
    n = len(pa)
    child: list[int | None] = [None] * n
    child[i:j] = pa[i:j]
    segment = set(pa[i:j])
    pos_in_pa = {v: k for k, v in enumerate(pa)}
    for k in list(range(0, i)) + list(range(j, n)):
        v = pb[k]
        while v in segment:
            v = pb[pos_in_pa[v]]
        child[k] = v
    return child  # type: ignore[return-value]


def swap_mutation(order: list[int], rng: np.random.Generator, count: int) -> list[int]:
    """`count` independent uniform position-pair swaps."""
    out = list(order)
    if len(out) < 2:
        return out
    for _ in range(count):
        i, j = rng.choice(len(out), size=2, replace=False)
        out[i], out[j] = out[j], out[i]
    return out


def ga_sequence(inst: RoutingInstance, params: GaParams):
    """Generational GA per the printed loop; the best-ever chromosome is
    tracked outside the population (the loop itself never preserves it).

    Returns (best order, best cost, per-generation best-ever cost history).
    """
    n = inst.n_real
    if n < 1:
        raise ValueError("instance has no real pairs")
    rng = np.random.default_rng(params.seed)
    cache = FitnessCache(inst)

    population = [list(rng.permutation(n)) for _ in range(params.population)]
    population = [[int(v) for v in c] for c in population]
    best_order: list[int] | None = None
    best_cost = None
    history: list[int] = []

    for _gen in range(params.generations):
        ranked = sorted(population, key=cache.cost)
        for c in ranked:
            cost = cache.cost(c)
            if best_cost is None or cost < best_cost:
                best_cost, best_order = cost, list(c)
        history.append(best_cost)
        elites = ranked[: params.elites]
        children = []
        for _ in range(params.population):
            if len(elites) >= 2 and n >= 2:
                ia, ib = rng.choice(len(elites), size=2, replace=False)
                child = pmx_crossover(elites[ia], elites[ib], rng)
            else:
                child = list(elites[0])
            children.append(swap_mutation(child, rng, params.mutations))
        population = children

    assert best_order is not None
    return best_order, best_cost, history
