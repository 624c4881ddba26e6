"""Net decomposition into instTerm pairs via an MST under bar-to-bar distance."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .assign import TrackAssignment
from .problem import Net, Problem

Bar = tuple[int, int, int]  # (x1, x2, y) with y a global track coordinate


class PadStrategy(str, Enum):
    EMPTY = "empty"
    RANDOM = "random"


@dataclass(frozen=True)
class InstTermPair:
    a: int
    b: int
    net_id: int
    feature: tuple[int, int, int, int, int, int, int]  # (xa1, xa2, ya, xb1, xb2, yb, l)

    @property
    def bar_a(self) -> Bar:
        return (self.feature[0], self.feature[1], self.feature[2])

    @property
    def bar_b(self) -> Bar:
        return (self.feature[3], self.feature[4], self.feature[5])


def bar_distance(a: Bar, b: Bar) -> int:
    """Minimum Manhattan distance between two horizontal bars."""
    gap_x = max(0, max(a[0], b[0]) - min(a[1], b[1]))
    return gap_x + abs(a[2] - b[2])


class _UnionFind:
    def __init__(self, items):
        self.parent = {i: i for i in items}

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j) -> bool:
        ri, rj = self.find(i), self.find(j)
        if ri == rj:
            return False
        self.parent[ri] = rj
        return True


def _bar(p: Problem, ta: TrackAssignment, it_id: int) -> Bar:
    it = p.instterm(it_id)
    return (it.x1, it.x2, ta.global_y(it_id, p.wsp))


def decompose_net(
    net: Net, p: Problem, ta: TrackAssignment, net_index: int
) -> list[InstTermPair]:
    """Kruskal MST over the net's assigned members under bar_distance.

    Edges sort by (weight, min id, max id) for cross-platform determinism.
    Single-member nets yield no pairs.
    """
    members = [m for m in net.members if m in ta.slots]
    if len(members) < 2:
        return []
    bars = {m: _bar(p, ta, m) for m in members}
    edges = sorted(
        (bar_distance(bars[a], bars[b]), a, b)
        for i, a in enumerate(members)
        for b in members[i + 1 :]
    )
    uf = _UnionFind(members)
    pairs = []
    for w, a, b in edges:
        if uf.union(a, b):
            xa1, xa2, ya = bars[a]
            xb1, xb2, yb = bars[b]
            pairs.append(
                InstTermPair(
                    a=a, b=b, net_id=net.net_id,
                    feature=(xa1, xa2, ya, xb1, xb2, yb, net_index),
                )
            )
            if len(pairs) == len(members) - 1:
                break
    return pairs


@dataclass
class RoutingInstance:
    problem: Problem
    ta: TrackAssignment
    pairs: list[InstTermPair]
    n_max: int
    mask: np.ndarray  # bool, True on real slots
    features: np.ndarray  # (n_max, 7) raw integer-valued features incl. pads
    pad_strategy: PadStrategy
    extra_opens: int  # unassignable instTerms, each counted as one opening

    @property
    def n_real(self) -> int:
        return len(self.pairs)


def decompose_problem(
    p: Problem,
    ta: TrackAssignment,
    n_max: int | None = None,
    strategy: PadStrategy = PadStrategy.EMPTY,
    seed: int = 0,
) -> RoutingInstance:
    """Concatenate per-net MST pairs (ascending net order) and pad to n_max.

    n_max=None sizes the instance exactly to its real pair count (no padding).
    """
    pairs: list[InstTermPair] = []
    for idx, net in enumerate(sorted(p.nets, key=lambda n: n.net_id)):
        pairs.extend(decompose_net(net, p, ta, idx))
    if n_max is None:
        n_max = max(len(pairs), 1)
    if len(pairs) > n_max:
        raise ValueError(f"n_max={n_max} too small: instance has {len(pairs)} pairs")

    features = np.zeros((n_max, 7), dtype=np.float64)
    for i, pr in enumerate(pairs):
        features[i] = pr.feature
    mask = np.zeros(n_max, dtype=bool)
    mask[: len(pairs)] = True

    if strategy is PadStrategy.RANDOM and len(pairs) < n_max and pairs:
        rng = np.random.default_rng(seed)
        real = features[: len(pairs)]
        lo = real.min(axis=0)
        hi = real.max(axis=0)
        for i in range(len(pairs), n_max):
            features[i] = [int(rng.integers(int(l), int(h) + 1)) for l, h in zip(lo, hi)]

    return RoutingInstance(
        problem=p,
        ta=ta,
        pairs=pairs,
        n_max=n_max,
        mask=mask,
        features=features,
        pad_strategy=strategy,
        extra_opens=len(ta.unassigned),
    )
