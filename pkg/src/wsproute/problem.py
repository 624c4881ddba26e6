"""Problem domain model: instTerms, nets, WSP geometry, file I/O and generation.

Coordinates are integers on a unit grid; one grid unit equals one track pitch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np


class Kind(str, Enum):
    G = "G"
    SD = "SD"
    GSD = "GSD"


class ProblemSyntaxError(ValueError):
    """Malformed problem file (bad JSON or missing/odd-typed fields)."""


class ProblemSemanticError(ValueError):
    """Structurally valid file violating a domain invariant."""


class InfeasibleConfigError(ValueError):
    """Generator config demands more instTerms than the geometry can hold."""


@dataclass(frozen=True)
class InstTerm:
    id: int
    net_id: int
    kind: Kind
    x1: int
    x2: int
    row: int
    track: int | None = None

    @property
    def length(self) -> int:
        return self.x2 - self.x1


@dataclass(frozen=True)
class Net:
    net_id: int
    members: tuple[int, ...]


@dataclass(frozen=True)
class WspConfig:
    rows: int
    width: int
    tracks_per_row: int = 7
    g_tracks: frozenset[int] = frozenset({1, 2, 6, 7})
    sd_tracks: frozenset[int] = frozenset({2, 3, 4, 5, 6})
    gsd_tracks: frozenset[int] = frozenset({2, 6})

    @property
    def height(self) -> int:
        """Total number of global tracks across all rows."""
        return self.rows * self.tracks_per_row


@dataclass(frozen=True)
class Problem:
    name: str
    wsp: WspConfig
    instterms: tuple[InstTerm, ...]
    nets: tuple[Net, ...]

    def instterm(self, it_id: int) -> InstTerm:
        return self._by_id[it_id]

    @property
    def _by_id(self) -> dict[int, InstTerm]:
        d = object.__getattribute__(self, "__dict__")
        if "_by_id_cache" not in d:
            d["_by_id_cache"] = {it.id: it for it in self.instterms}
        return d["_by_id_cache"]


@dataclass(frozen=True)
class Violation:
    rule: str
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}[{self.entity}]: {self.message}"


@dataclass(frozen=True)
class GenConfig:
    n_instterms: tuple[int, int]
    nets_count: tuple[int, int]
    rows: int
    width: int
    kind_mix: tuple[float, float, float] = (0.4, 0.4, 0.2)
    seed: int = 0


def _group_nets(instterms: list[InstTerm]) -> tuple[Net, ...]:
    groups: dict[int, list[int]] = {}
    for it in instterms:
        groups.setdefault(it.net_id, []).append(it.id)
    return tuple(
        Net(net_id=n, members=tuple(sorted(ms))) for n, ms in sorted(groups.items())
    )


def parse_problem(text: str) -> Problem:
    """Parse a UTF-8 JSON problem document.

    Raises ProblemSyntaxError for malformed JSON or missing fields,
    ProblemSemanticError when a domain invariant is violated.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProblemSyntaxError(
            f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e

    try:
        name = doc["name"]
        wsp = WspConfig(rows=int(doc["wsp"]["rows"]), width=int(doc["wsp"]["width"]))
        instterms = [
            InstTerm(
                id=int(rec["id"]),
                net_id=int(rec["net"]),
                kind=Kind(rec["kind"]),
                x1=int(rec["x1"]),
                x2=int(rec["x2"]),
                row=int(rec["row"]),
            )
            for rec in doc["instterms"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise ProblemSyntaxError(f"bad problem document: {e!r}") from e

    instterms.sort(key=lambda it: it.id)
    p = Problem(name=name, wsp=wsp, instterms=tuple(instterms), nets=_group_nets(instterms))
    violations = validate_problem(p)
    if violations:
        raise ProblemSemanticError("; ".join(str(v) for v in violations))
    return p


def serialize_problem(p: Problem) -> str:
    """Canonical serialization: instTerms sorted by id, sorted keys, 2-space indent."""
    doc = {
        "name": p.name,
        "wsp": {"rows": p.wsp.rows, "width": p.wsp.width},
        "instterms": [
            {
                "id": it.id,
                "net": it.net_id,
                "kind": it.kind.value,
                "x1": it.x1,
                "x2": it.x2,
                "row": it.row,
            }
            for it in sorted(p.instterms, key=lambda it: it.id)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def validate_problem(p: Problem) -> list[Violation]:
    """Check every type invariant; returns one Violation per breach."""
    out: list[Violation] = []
    seen: set[int] = set()
    ids = {it.id for it in p.instterms}
    for it in p.instterms:
        ent = f"instterm {it.id}"
        if it.id in seen:
            out.append(Violation("duplicate-id", ent, "id appears more than once"))
        seen.add(it.id)
        if it.x2 < it.x1:
            out.append(Violation("reversed-range", ent, f"x2={it.x2} < x1={it.x1}"))
        if it.x1 < 0 or it.x2 > p.wsp.width:
            out.append(
                Violation("out-of-range", ent, f"[{it.x1},{it.x2}] outside [0,{p.wsp.width}]")
            )
        if it.row < 0 or it.row >= p.wsp.rows:
            out.append(Violation("bad-row", ent, f"row {it.row} not in [0,{p.wsp.rows})"))
        if it.track is not None and not 1 <= it.track <= p.wsp.tracks_per_row:
            out.append(Violation("bad-track", ent, f"track {it.track} out of range"))

    covered: set[int] = set()
    for net in p.nets:
        ent = f"net {net.net_id}"
        if not net.members:
            out.append(Violation("empty-net", ent, "net has no members"))
        for m in net.members:
            if m not in ids:
                out.append(Violation("dangling-member", ent, f"member {m} does not exist"))
            if m in covered:
                out.append(Violation("member-overlap", ent, f"member {m} in two nets"))
            covered.add(m)
    missing = ids - covered
    for m in sorted(missing):
        out.append(Violation("uncovered-instterm", f"instterm {m}", "belongs to no net"))
    return out


def _capacity(cfg: GenConfig) -> int:
    # Each bar needs at least one unit plus breathing room; a row of 7 tracks
    # can hold roughly width/2 bars per track before saturating.
    return cfg.rows * 7 * max(1, cfg.width // 2)


def generate_problem(cfg: GenConfig) -> Problem:
    """Synthesize a random valid problem, deterministic for a fixed seed."""
    lo, hi = cfg.n_instterms
    klo, khi = cfg.nets_count
    if lo > hi or klo > khi or lo < 2:
        raise InfeasibleConfigError(f"empty or degenerate ranges in {cfg}")
    rng = np.random.default_rng(cfg.seed)
    n = int(rng.integers(lo, hi + 1))
    if n > _capacity(cfg):
        raise InfeasibleConfigError(
            f"{n} instTerms cannot fit {cfg.rows} rows of width {cfg.width} "
            f"(capacity {_capacity(cfg)})"
        )
    k = int(rng.integers(klo, khi + 1))
    k = max(1, min(k, n // 2))  # every net needs at least 2 members

    # First 2k instTerms seed the nets pairwise, the rest join uniformly.
    net_of = [i // 2 for i in range(2 * k)]
    net_of += [int(rng.integers(k)) for _ in range(n - 2 * k)]
    rng.shuffle(net_of)

    kinds = [Kind.G, Kind.SD, Kind.GSD]
    max_len = max(1, cfg.width // 6)
    instterms = []
    for i in range(n):
        length = int(rng.integers(1, max_len + 1))
        x1 = int(rng.integers(0, cfg.width - length + 1))
        instterms.append(
            InstTerm(
                id=i,
                net_id=net_of[i],
                kind=kinds[int(rng.choice(3, p=list(cfg.kind_mix)))],
                x1=x1,
                x2=x1 + length,
                row=int(rng.integers(cfg.rows)),
            )
        )
    p = Problem(
        name=f"gen-{cfg.seed}",
        wsp=WspConfig(rows=cfg.rows, width=cfg.width),
        instterms=tuple(instterms),
        nets=_group_nets(instterms),
    )
    assert not validate_problem(p)
    return p


def split_dataset(problems, ratios, seed):
    """Partition into train/val/test; floor-rounded sizes, remainder to train."""
    rt, rv, rte = ratios
    if abs(rt + rv + rte - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    if not problems:
        raise ValueError("empty problem list")
    n = len(problems)
    n_val = math.floor(n * rv)
    n_test = math.floor(n * rte)
    n_train = n - n_val - n_test
    perm = np.random.default_rng(seed).permutation(n)
    shuffled = [problems[i] for i in perm]
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )
