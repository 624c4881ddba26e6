"""Sequential L/Z pattern routing on a unit-capacity rectilinear grid.

Rows are flattened into one global grid: track t of row r lives at
y = r*7 + t - 1. Paths are stored as polylines (corner points); consecutive
segments always alternate direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .assign import TrackAssignment
from .decompose import Bar, InstTermPair, RoutingInstance
from .problem import Problem

Vertex = tuple[int, int]
Polyline = list[Vertex]

OPEN_WEIGHT = 10
WIRELENGTH_WEIGHT = 1


class RouteStatus(str, Enum):
    ROUTED = "routed"
    OPEN = "open"


class CapacityGrid:
    """Unit-capacity edges with per-edge net ownership for same-net reuse."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        # horizontal edge (x,y)-(x+1,y); vertical edge (x,y)-(x,y+1)
        self.hcap = np.ones((width, height), dtype=np.uint8)
        self.howner = np.full((width, height), -1, dtype=np.int64)
        self.vcap = np.ones((width + 1, max(height - 1, 0)), dtype=np.uint8)
        self.vowner = np.full((width + 1, max(height - 1, 0)), -1, dtype=np.int64)

    def _seg_free(self, a: Vertex, b: Vertex, net: int) -> bool:
        (xa, ya), (xb, yb) = a, b
        if ya == yb:
            lo, hi = min(xa, xb), max(xa, xb)
            cap = self.hcap[lo:hi, ya]
            own = self.howner[lo:hi, ya]
        else:
            lo, hi = min(ya, yb), max(ya, yb)
            cap = self.vcap[xa, lo:hi]
            own = self.vowner[xa, lo:hi]
        return bool(np.all((cap == 1) | (own == net)))

    def feasible(self, path: Polyline, net: int) -> bool:
        return all(self._seg_free(a, b, net) for a, b in zip(path, path[1:]))

    def consume(self, path: Polyline, net: int) -> None:
        for (xa, ya), (xb, yb) in zip(path, path[1:]):
            if ya == yb:
                lo, hi = min(xa, xb), max(xa, xb)
                self.hcap[lo:hi, ya] = 0
                self.howner[lo:hi, ya] = net
            else:
                lo, hi = min(ya, yb), max(ya, yb)
                self.vcap[xa, lo:hi] = 0
                self.vowner[xa, lo:hi] = net

    def claim_bar(self, x1: int, x2: int, y: int, net: int) -> None:
        self.hcap[x1:x2, y] = 0
        self.howner[x1:x2, y] = net


def init_grid(p: Problem, ta: TrackAssignment) -> CapacityGrid:
    """Fresh grid with every assigned bar pre-consuming its own edges."""
    g = CapacityGrid(p.wsp.width, p.wsp.height)
    for it_id in ta.slots:
        it = p.instterm(it_id)
        g.claim_bar(it.x1, it.x2, ta.global_y(it_id, p.wsp), it.net_id)
    return g


def path_wirelength(path: Polyline) -> int:
    return sum(abs(xb - xa) + abs(yb - ya) for (xa, ya), (xb, yb) in zip(path, path[1:]))


def path_bends(path: Polyline) -> int:
    return max(0, len(path) - 2)


def _dedup(path: Polyline) -> Polyline:
    out = [path[0]]
    for v in path[1:]:
        if v != out[-1]:
            out.append(v)
    return out


def try_l(g: CapacityGrid, vi: Vertex, vj: Vertex, net: int) -> Polyline | None:
    """Straight (when aligned) or single-bend path, first feasible of the two
    corner choices (vertical-first, then horizontal-first)."""
    if vi == vj:
        return [vi]
    xi, yi = vi
    xj, yj = vj
    if xi == xj or yi == yj:
        cands = [[vi, vj]]
    else:
        cands = [[vi, (xi, yj), vj], [vi, (xj, yi), vj]]
    for path in cands:
        if g.feasible(path, net):
            return path
    return None


def try_z(g: CapacityGrid, vi: Vertex, vj: Vertex, net: int) -> Polyline | None:
    """Two-bend path: HVH over interior columns then VHV over interior tracks,
    scanning nearest-to-midpoint first (ties toward the smaller coordinate)."""
    xi, yi = vi
    xj, yj = vj
    if xi == xj or yi == yj:
        return None

    def midout(lo: int, hi: int) -> list[int]:
        interior = range(min(lo, hi) + 1, max(lo, hi))
        mid = (lo + hi) / 2.0
        return sorted(interior, key=lambda v: (abs(v - mid), v))

    if abs(xj - xi) >= 2:
        for xm in midout(xi, xj):
            path = [vi, (xm, yi), (xm, yj), vj]
            if g.feasible(path, net):
                return path
    if abs(yj - yi) >= 2:
        for ym in midout(yi, yj):
            path = [vi, (xi, ym), (xj, ym), vj]
            if g.feasible(path, net):
                return path
    return None


def trim_path(path: Polyline, pair: InstTermPair) -> Polyline:
    """Drop prefix/suffix edges that run along the pair's own bars."""
    pts = list(path)
    pts = _trim_head(pts, pair.bar_a)
    pts.reverse()
    pts = _trim_head(pts, pair.bar_b)
    pts.reverse()
    return pts


def _trim_head(pts: Polyline, bar: Bar) -> Polyline:
    if len(pts) < 2:
        return pts
    (x0, y0), (x1, y1) = pts[0], pts[1]
    bx1, bx2, by = bar
    if y0 != by or y0 != y1:
        return pts
    new_x = min(x1, bx2) if x1 > x0 else max(x1, bx1)
    if new_x == x1:
        return pts[1:]
    if new_x != x0:
        pts = [(new_x, y0)] + pts[1:]
    return pts


@dataclass
class RouteResult:
    status: RouteStatus
    path: Polyline | None
    wirelength: int


def route_pair(g: CapacityGrid, pair: InstTermPair) -> RouteResult:
    """Try every endpoint combination, L then Z; among the shortest feasible
    candidates prefer fewest bends, then the lexicographically smallest
    endpoints. Commits the trimmed path on success."""
    xa1, xa2, ya = pair.bar_a
    xb1, xb2, yb = pair.bar_b
    combos = sorted(
        ((abs(xb - xa) + abs(yb - ya), (xa, ya), (xb, yb))
         for xa in range(xa1, xa2 + 1)
         for xb in range(xb1, xb2 + 1)),
    )
    i = 0
    n = len(combos)
    while i < n:
        dist = combos[i][0]
        best = None
        while i < n and combos[i][0] == dist:
            _, vi, vj = combos[i]
            i += 1
            path = try_l(g, vi, vj, pair.net_id)
            if path is None:
                path = try_z(g, vi, vj, pair.net_id)
            if path is not None:
                key = (path_bends(path), vi, vj)
                if best is None or key < best[0]:
                    best = (key, path)
        if best is not None:
            trimmed = _dedup(trim_path(best[1], pair))
            g.consume(trimmed, pair.net_id)
            return RouteResult(RouteStatus.ROUTED, trimmed, path_wirelength(trimmed))
    return RouteResult(RouteStatus.OPEN, None, 0)


@dataclass
class RouteSolution:
    results: list[RouteResult]  # indexed by pair position in the instance
    total_wirelength: int
    open_count: int  # unrouted pairs plus unassignable instTerms
    cost: int


def route_sequence(inst: RoutingInstance, order) -> RouteSolution:
    """Route the instance's real pairs in the given order on a fresh grid."""
    order = list(order)
    if sorted(order) != list(range(inst.n_real)):
        raise ValueError(f"order is not a permutation of 0..{inst.n_real - 1}: {order}")
    g = init_grid(inst.problem, inst.ta)
    results: list[RouteResult | None] = [None] * inst.n_real
    wl = 0
    opens = inst.extra_opens
    for idx in order:
        res = route_pair(g, inst.pairs[idx])
        results[idx] = res
        if res.status is RouteStatus.OPEN:
            opens += 1
        else:
            wl += res.wirelength
    return RouteSolution(
        results=results,
        total_wirelength=wl,
        open_count=opens,
        cost=WIRELENGTH_WEIGHT * wl + OPEN_WEIGHT * opens,
    )
