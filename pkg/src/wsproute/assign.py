"""Track assignment: iterative max-clique extraction plus weighted bipartite matching.

Every instTerm must land on a WSP track legal for its kind, with no two
overlapping different-net instTerms sharing a (row, track) slot. Cliques of the
per-row overlap graph are matched to slots one at a time; only members whose
matched slot is their sole remaining candidate are committed (look-ahead), with
a cheapest-pair fallback to guarantee progress.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .problem import InstTerm, Kind, Problem, WspConfig

Slot = tuple[int, int]  # (row, track)

_UNMATCHED_COST = 1e6


def eligible_tracks(it: InstTerm, wsp: WspConfig) -> frozenset[int]:
    if it.kind is Kind.G:
        return wsp.g_tracks
    if it.kind is Kind.SD:
        return wsp.sd_tracks
    return wsp.gsd_tracks


def _overlaps(a1: int, a2: int, b1: int, b2: int) -> bool:
    return max(a1, b1) <= min(a2, b2)


@dataclass
class OverlapGraph:
    """Horizontal constraint graph, grouped per row."""

    nodes: set[int]
    adj: dict[int, set[int]]
    rows: dict[int, list[int]]  # row -> member ids

    def remove(self, it_id: int) -> None:
        self.nodes.discard(it_id)
        for other in self.adj.pop(it_id, set()):
            self.adj[other].discard(it_id)
        for members in self.rows.values():
            if it_id in members:
                members.remove(it_id)


def build_overlap_graph(p: Problem) -> OverlapGraph:
    nodes = {it.id for it in p.instterms}
    adj: dict[int, set[int]] = {i: set() for i in nodes}
    rows: dict[int, list[int]] = {}
    for it in p.instterms:
        rows.setdefault(it.row, []).append(it.id)
    for members in rows.values():
        for i, a_id in enumerate(members):
            a = p.instterm(a_id)
            for b_id in members[i + 1 :]:
                b = p.instterm(b_id)
                if a.net_id != b.net_id and _overlaps(a.x1, a.x2, b.x1, b.x2):
                    adj[a_id].add(b_id)
                    adj[b_id].add(a_id)
    for members in rows.values():
        members.sort()
    return OverlapGraph(nodes=nodes, adj=adj, rows=rows)


def max_clique(g: OverlapGraph, row: int, p: Problem) -> list[int]:
    """Maximum clique of one row's interval-overlap graph via endpoint sweep.

    A clique is a set of pairwise-overlapping intervals from pairwise-distinct
    nets; all intervals of a clique share a point (Helly property), so sweeping
    left endpoints and counting distinct covering nets is exact. Ties resolve
    to the smallest sweep x, per-net representatives to the smallest id.
    """
    members = g.rows.get(row, [])
    if not members:
        return []
    intervals = [(p.instterm(i).x1, p.instterm(i).x2, p.instterm(i).net_id, i) for i in members]
    best: list[int] = []
    best_x = None
    for x in sorted({x1 for x1, _, _, _ in intervals}):
        covering: dict[int, int] = {}
        for x1, x2, net, i in intervals:
            if x1 <= x <= x2 and (net not in covering or i < covering[net]):
                covering[net] = i
        if len(covering) > len(best):
            best = sorted(covering.values())
            best_x = x
    assert best_x is not None
    return best


@dataclass
class Occupancy:
    """Per-slot occupied intervals, with net owners for same-net sharing."""

    intervals: dict[Slot, list[tuple[int, int, int]]] = field(default_factory=dict)

    def assignable(self, it: InstTerm, slot: Slot) -> bool:
        for x1, x2, net in self.intervals.get(slot, []):
            if net != it.net_id and _overlaps(it.x1, it.x2, x1, x2):
                return False
        return True

    def occupied_length(self, slot: Slot) -> int:
        """Length of the union of occupied intervals on a slot."""
        ivs = sorted((x1, x2) for x1, x2, _ in self.intervals.get(slot, []))
        total = 0
        cur_lo = cur_hi = None
        for x1, x2 in ivs:
            if cur_hi is None or x1 > cur_hi:
                if cur_hi is not None:
                    total += cur_hi - cur_lo
                cur_lo, cur_hi = x1, x2
            else:
                cur_hi = max(cur_hi, x2)
        if cur_hi is not None:
            total += cur_hi - cur_lo
        return total

    def commit(self, it: InstTerm, slot: Slot) -> None:
        self.intervals.setdefault(slot, []).append((it.x1, it.x2, it.net_id))


def _preferred_track(it: InstTerm, wsp: WspConfig) -> float:
    tracks = sorted(eligible_tracks(it, wsp))
    mid = len(tracks) // 2
    if len(tracks) % 2:
        return float(tracks[mid])
    return (tracks[mid - 1] + tracks[mid]) / 2.0


def assignment_cost(it: InstTerm, slot: Slot, occ_len: int, wsp: WspConfig) -> float:
    """Crowding-penalized cost: bar length scaled by slot utilization, plus a
    tiny deterministic preference for the median eligible track."""
    track = slot[1]
    return it.length * (1.0 + occ_len / wsp.width) + 0.01 * abs(track - _preferred_track(it, wsp))


def candidate_slots(it: InstTerm, occ: Occupancy, wsp: WspConfig) -> list[Slot]:
    return [
        (it.row, t)
        for t in sorted(eligible_tracks(it, wsp))
        if occ.assignable(it, (it.row, t))
    ]


def match_clique(
    p: Problem, members: list[int], occ: Occupancy
) -> tuple[dict[int, Slot], list[int]]:
    """Minimum-cost matching of clique members to distinct candidate slots.

    Returns (matched id -> slot, unmatched ids). Members with no candidate
    slot are always unmatched; otherwise the matching is a rectangular
    assignment with dummy columns so maximum cardinality wins first.
    """
    wsp = p.wsp
    members = sorted(members)
    cands = {i: candidate_slots(p.instterm(i), occ, wsp) for i in members}
    unmatched = [i for i in members if not cands[i]]
    active = [i for i in members if cands[i]]
    if not active:
        return {}, unmatched

    slots = sorted({s for i in active for s in cands[i]})
    m, k = len(active), len(slots)
    cost = np.full((m, k + m), _UNMATCHED_COST, dtype=float)
    for r, i in enumerate(active):
        it = p.instterm(i)
        for s in cands[i]:
            c = s[1] - 1 + r * (k + m)  # lexicographic (id, track) tie-break
            cost[r, slots.index(s)] = assignment_cost(it, s, occ.occupied_length(s), wsp) + 1e-9 * c
    rows, cols = linear_sum_assignment(cost)
    matched: dict[int, Slot] = {}
    for r, c in zip(rows, cols):
        if c < k and cost[r, c] < _UNMATCHED_COST:
            matched[active[r]] = slots[c]
        else:
            unmatched.append(active[r])
    return matched, sorted(unmatched)


@dataclass
class TrackAssignment:
    slots: dict[int, Slot]  # instTerm id -> (row, track)
    total_cost: float
    unassigned: list[int]

    def global_y(self, it_id: int, wsp: WspConfig) -> int:
        row, track = self.slots[it_id]
        return row * wsp.tracks_per_row + track - 1


def static_cost(p: Problem, slots: dict[int, Slot]) -> float:
    """Order-independent cost of a complete assignment: each instTerm pays for
    the utilization contributed by the *other* instTerms on its slot."""
    occ_by_slot: dict[Slot, list[int]] = {}
    for i, s in slots.items():
        occ_by_slot.setdefault(s, []).append(i)
    total = 0.0
    for i, s in slots.items():
        others = Occupancy()
        for j in occ_by_slot[s]:
            if j != i:
                others.commit(p.instterm(j), s)
        total += assignment_cost(p.instterm(i), s, others.occupied_length(s), p.wsp)
    return total


def assign_tracks(p: Problem) -> TrackAssignment:
    """Iteratively extract the largest clique, match it, and commit the
    uniquely-assignable members (cheapest matched pair as fallback)."""
    g = build_overlap_graph(p)
    occ = Occupancy()
    slots: dict[int, Slot] = {}
    unassigned: list[int] = []

    def drop(i: int) -> None:
        g.remove(i)

    while g.nodes:
        # Largest clique over all rows; ties to the smallest row index.
        clique: list[int] = []
        clique_row = None
        for row in sorted(g.rows):
            c = max_clique(g, row, p)
            if len(c) > len(clique):
                clique, clique_row = c, row
        if not clique:
            break

        matched, not_matched = match_clique(p, clique, occ)
        for i in not_matched:
            unassigned.append(i)
            drop(i)
        if not matched:
            continue

        committed = []
        for i, slot in matched.items():
            if len(candidate_slots(p.instterm(i), occ, p.wsp)) == 1:
                committed.append(i)
        if not committed:
            # Look-ahead yields nothing uniquely assignable; commit the single
            # cheapest matched pair so the loop always makes progress.
            cheapest = min(
                matched.items(),
                key=lambda kv: (
                    assignment_cost(
                        p.instterm(kv[0]), kv[1], occ.occupied_length(kv[1]), p.wsp
                    ),
                    kv[0],
                ),
            )
            committed = [cheapest[0]]
        for i in committed:
            slot = matched[i]
            occ.commit(p.instterm(i), slot)
            slots[i] = slot
            drop(i)

    unassigned.sort()
    return TrackAssignment(slots=slots, total_cost=static_cost(p, slots), unassigned=unassigned)
