"""Output artifacts: CSVs, run reports, SVG route renderings, figures."""

from __future__ import annotations

import colorsys
import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .assign import TrackAssignment
from .decompose import RoutingInstance
from .pattern import RouteSolution, RouteStatus
from .problem import Problem


@dataclass
class RunReport:
    problem: str
    sequencer: str
    cost: int
    wirelength: int
    opens: int
    wall_time: float
    seed: int


def atomic_write(path: str, data: str | bytes) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def solution_csv(sol: RouteSolution) -> str:
    lines = ["pair_index,status,wirelength"]
    for i, res in enumerate(sol.results):
        lines.append(f"{i},{res.status.value},{res.wirelength}")
    lines.append("WL,opens,cost")
    lines.append(f"{sol.total_wirelength},{sol.open_count},{sol.cost}")
    return "\n".join(lines) + "\n"


def report_json(report: RunReport) -> str:
    return json.dumps(asdict(report), indent=2, sort_keys=True) + "\n"


def solution_json(inst: RoutingInstance, order, sol: RouteSolution) -> str:
    """Self-contained dump of a routed solution, consumable by export-svg."""
    doc = {
        "problem": inst.problem.name,
        "order": list(order),
        "slots": {str(i): list(s) for i, s in inst.ta.slots.items()},
        "unassigned": inst.ta.unassigned,
        "pairs": [
            {
                "a": pr.a,
                "b": pr.b,
                "net": pr.net_id,
                "status": res.status.value,
                "wirelength": res.wirelength,
                "path": res.path,
            }
            for pr, res in zip(inst.pairs, sol.results)
        ],
        "summary": {"wl": sol.total_wirelength, "opens": sol.open_count, "cost": sol.cost},
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _net_color(net_id: int) -> str:
    h = (net_id * 0.6180339887498949) % 1.0
    r, g, b = colorsys.hsv_to_rgb(h, 0.85, 0.85)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


def render_svg(p: Problem, solution_doc: dict, scale: int = 12) -> str:
    """Bars in black, routes colored per net, opens marked with a red cross.

    Valid SVG 1.1; y grows downward, so global track 0 is drawn at the bottom.
    """
    height_tracks = p.wsp.height
    w = (p.wsp.width + 2) * scale
    h = (height_tracks + 2) * scale

    def sx(x):
        return (x + 1) * scale

    def sy(y):
        return (height_tracks - y) * scale

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
    ]
    slots = {int(k): tuple(v) for k, v in solution_doc.get("slots", {}).items()}
    for it in p.instterms:
        if it.id not in slots:
            continue
        row, track = slots[it.id]
        y = row * p.wsp.tracks_per_row + track - 1
        parts.append(
            f'<line x1="{sx(it.x1)}" y1="{sy(y)}" x2="{sx(it.x2)}" y2="{sy(y)}" '
            f'stroke="black" stroke-width="4" stroke-linecap="round"/>'
        )
    route_count = 0
    for pair in solution_doc.get("pairs", []):
        if pair["status"] == "routed" and pair["path"]:
            route_count += 1
            pts = " ".join(f"{sx(x)},{sy(y)}" for x, y in pair["path"])
            parts.append(
                f'<polyline points="{pts}" fill="none" '
                f'stroke="{_net_color(pair["net"])}" stroke-width="2"/>'
            )
        elif pair["status"] == "open":
            # mark the opening at the midpoint between the two bars
            a = next(it for it in p.instterms if it.id == pair["a"])
            b = next(it for it in p.instterms if it.id == pair["b"])
            ya = slots.get(a.id)
            yb = slots.get(b.id)
            if ya and yb:
                gy = lambda rt: rt[0] * p.wsp.tracks_per_row + rt[1] - 1
                cx = sx((a.x1 + a.x2 + b.x1 + b.x2) / 4)
                cy = sy((gy(ya) + gy(yb)) / 2)
                r = scale * 0.4
                parts.append(
                    f'<path d="M {cx - r} {cy - r} L {cx + r} {cy + r} '
                    f'M {cx - r} {cy + r} L {cx + r} {cy - r}" '
                    f'stroke="red" stroke-width="2" fill="none"/>'
                )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_curve_csv(path: str, curve) -> None:
    lines = ["epoch,train_mean_cost,val_mean_cost,baseline_refreshed"]
    for row in curve:
        lines.append(
            f"{row.epoch},{row.train_mean_cost:.6f},{row.val_mean_cost:.6f},"
            f"{int(row.baseline_refreshed)}"
        )
    atomic_write(path, "\n".join(lines) + "\n")


def plot_curve(path: str, curve) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot([r.epoch for r in curve], [r.train_mean_cost for r in curve], label="train (sampled)")
    ax.plot([r.epoch for r in curve], [r.val_mean_cost for r in curve], label="val (greedy)")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_comparison_csv(path: str, rows: list[dict]) -> None:
    if not rows:
        atomic_write(path, "")
        return
    fieldnames = list(rows[0].keys())
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    atomic_write(path, buf.getvalue())


def plot_comparison(prefix: str, rows: list[dict]) -> list[str]:
    """Render the three comparison figures; rows must be sorted by GA cost."""
    written = []
    idx = range(len(rows))
    att = [r["attention_cost"] for r in rows]
    ga = [r["ga_cost"] for r in rows]
    rnd = [r["random_mean_cost"] for r in rows]

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(idx, ga, "r.-", label="GA")
    ax.plot(idx, att, "b.", label="attention")
    ax.plot(idx, rnd, "k+", alpha=0.5, label="random mean")
    ax.set_xlabel("problem (ascending GA cost)")
    ax.set_ylabel("cost")
    ax.legend()
    fig.tight_layout()
    p1 = f"{prefix}_cost_comparison.png"
    fig.savefig(p1, dpi=120)
    plt.close(fig)
    written.append(p1)

    fig, ax = plt.subplots(figsize=(6, 4))
    for r in rows:
        ax.plot([r["attention_time"], r["ga_time"]], [r["attention_cost"], r["ga_cost"]],
                color="0.8", lw=0.5, zorder=1)
    ax.scatter([r["attention_time"] for r in rows], att, c="b", s=12, label="attention", zorder=2)
    ax.scatter([r["ga_time"] for r in rows], ga, c="r", s=12, label="GA", zorder=2)
    ax.set_xscale("log")
    ax.set_xlabel("run time (s)")
    ax.set_ylabel("cost")
    ax.legend()
    fig.tight_layout()
    p2 = f"{prefix}_cost_vs_runtime.png"
    fig.savefig(p2, dpi=120)
    plt.close(fig)
    written.append(p2)

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(ga, att, s=14)
    lim = [0, max(max(ga), max(att)) * 1.05 + 1]
    ax.plot(lim, lim, "k--", lw=0.8)
    ax.set_xlabel("GA cost")
    ax.set_ylabel("attention cost")
    fig.tight_layout()
    p3 = f"{prefix}_attention_vs_ga.png"
    fig.savefig(p3, dpi=120)
    plt.close(fig)
    written.append(p3)
    return written
