"""Command-line front end: generate, route, train, compare, export-svg."""

from __future__ import annotations

import json
import os
import sys
import time

import click
import numpy as np

from . import attention, report
from .assign import assign_tracks, build_overlap_graph, candidate_slots, Occupancy
from .decompose import PadStrategy, decompose_problem
from .ga import GaParams, ga_sequence
from .pattern import route_sequence
from .pipeline import build_instance, oracle_sequence, random_sequence
from .problem import (
    GenConfig,
    InfeasibleConfigError,
    ProblemSemanticError,
    ProblemSyntaxError,
    generate_problem,
    parse_problem,
    serialize_problem,
    split_dataset,
)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3


@click.group()
def cli():
    """Track-assignment detailed routing with GA and attention sequencing."""


def _load_gen_config(path: str | None, seed: int) -> GenConfig:
    if path is None:
        return GenConfig(n_instterms=(12, 30), nets_count=(4, 8), rows=3, width=30, seed=seed)
    with open(path) as fh:
        doc = json.load(fh)
    return GenConfig(
        n_instterms=tuple(doc["n_instterms"]),
        nets_count=tuple(doc["nets_count"]),
        rows=int(doc["rows"]),
        width=int(doc["width"]),
        kind_mix=tuple(doc.get("kind_mix", (0.4, 0.4, 0.2))),
        seed=seed,
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON generator config (n_instterms, nets_count, rows, width, kind_mix).")
@click.option("--count", type=int, default=10, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
def gen(config_path, count, out_dir, seed):
    """Generate a dataset of synthetic problem files plus a manifest."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {"base_seed": seed, "config": config_path, "files": {}}
    for i in range(count):
        cfg = _load_gen_config(config_path, seed + i)
        p = generate_problem(cfg)
        name = f"p{i:04d}.json"
        report.atomic_write(os.path.join(out_dir, name), serialize_problem(p))
        manifest["files"][name] = {"seed": seed + i}
    report.atomic_write(
        os.path.join(out_dir, "manifest.json"),
        json.dumps(manifest, indent=2, sort_keys=True) + "\n",
    )
    click.echo(f"wrote {count} problems to {out_dir}")


def _read_problem(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def _dump_graphs(p, path):
    g = build_overlap_graph(p)
    occ = Occupancy()
    lines = ["# overlap graph", "nodes: " + " ".join(str(i) for i in sorted(g.nodes))]
    for i in sorted(g.adj):
        for j in sorted(g.adj[i]):
            if i < j:
                lines.append(f"edge {i} {j}")
    lines.append("# assignment graph (instTerm -> candidate slots)")
    for it in p.instterms:
        slots = candidate_slots(it, occ, p.wsp)
        lines.append(f"instterm {it.id}: " + " ".join(f"{r}/{t}" for r, t in slots))
    report.atomic_write(path, "\n".join(lines) + "\n")


@cli.command()
@click.argument("problem_path", type=click.Path(exists=True))
@click.option("--sequencer", type=click.Choice(["attention", "ga", "random", "oracle"]),
              default="ga", show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True), default=None,
              help="Policy checkpoint (required for the attention sequencer).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-prefix", default=None, help="Prefix for report/solution files.")
@click.option("--svg", "svg_path", type=click.Path(), default=None)
@click.option("--ga-generations", type=int, default=10, show_default=True)
@click.option("--ga-population", type=int, default=10, show_default=True)
@click.option("--ga-elites", type=int, default=4, show_default=True)
@click.option("--ga-mutations", type=int, default=1, show_default=True)
@click.option("--dump-graphs", "dump_graphs_path", type=click.Path(), default=None,
              help="Debug dump of the overlap and assignment graphs.")
def route(problem_path, sequencer, checkpoint, seed, out_prefix, svg_path,
          ga_generations, ga_population, ga_elites, ga_mutations, dump_graphs_path):
    """Assign, decompose, sequence, and route one problem."""
    p = _read_problem(problem_path)
    if dump_graphs_path:
        _dump_graphs(p, dump_graphs_path)

    if sequencer == "attention":
        if checkpoint is None:
            raise click.UsageError("--checkpoint is required for the attention sequencer")
        policy, n_max = attention.load_policy(checkpoint)
        inst = build_instance(p, n_max=None)
        if inst.n_real > n_max:
            raise ProblemSemanticError(
                f"checkpoint n_max={n_max} too small for problem with {inst.n_real} pairs"
            )
        inst = build_instance(p, n_max=n_max)
    else:
        inst = build_instance(p)

    t0 = time.perf_counter()
    if sequencer == "attention":
        ro = attention.greedy_rollout(policy, inst)
        order, sol = ro.order, route_sequence(inst, ro.order)
    elif sequencer == "ga":
        params = GaParams(generations=ga_generations, population=ga_population,
                          elites=ga_elites, mutations=ga_mutations, seed=seed)
        order, _, _ = ga_sequence(inst, params)
        sol = route_sequence(inst, order)
    elif sequencer == "random":
        order, sol = random_sequence(inst, np.random.default_rng(seed))
    else:
        order, sol = oracle_sequence(inst)
    wall = time.perf_counter() - t0

    rep = report.RunReport(
        problem=p.name, sequencer=sequencer, cost=sol.cost,
        wirelength=sol.total_wirelength, opens=sol.open_count,
        wall_time=wall, seed=seed,
    )
    prefix = out_prefix or os.path.splitext(problem_path)[0]
    report.atomic_write(prefix + "_report.json", report.report_json(rep))
    report.atomic_write(prefix + "_solution.csv", report.solution_csv(sol))
    sol_doc = report.solution_json(inst, order, sol)
    report.atomic_write(prefix + "_solution.json", sol_doc)
    if svg_path:
        report.atomic_write(svg_path, report.render_svg(p, json.loads(sol_doc)))
    click.echo(f"{p.name} {sequencer}: cost={sol.cost} wl={sol.total_wirelength} "
               f"opens={sol.open_count} time={wall:.3f}s")


def _load_dataset(dataset_dir: str):
    files = sorted(
        f for f in os.listdir(dataset_dir)
        if f.endswith(".json") and f != "manifest.json"
    )
    if not files:
        raise ProblemSemanticError(f"no problem files in {dataset_dir}")
    return [_read_problem(os.path.join(dataset_dir, f)) for f in files]


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--batches", type=int, default=20, show_default=True)
@click.option("--batch-size", type=int, default=5, show_default=True)
@click.option("--lr", type=float, default=1e-4, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--pad", type=click.Choice(["empty", "random"]), default="empty",
              show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--heads", type=int, default=8, show_default=True)
@click.option("--layers", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), required=True)
@click.option("--curve", "curve_path", type=click.Path(), default=None)
def train(dataset_dir, epochs, batches, batch_size, lr, alpha, pad, dim, heads,
          layers, seed, checkpoint_path, curve_path):
    """Train the attention sequencer on a dataset directory (60/20/20 split)."""
    problems = _load_dataset(dataset_dir)
    train_ps, val_ps, _test_ps = split_dataset(problems, (0.6, 0.2, 0.2), seed)
    strategy = PadStrategy(pad)

    prepared = [(p, assign_tracks(p)) for p in problems]
    n_max = max(
        decompose_problem(p, ta).n_real for p, ta in prepared
    )
    by_name = {p.name: (p, ta) for p, ta in prepared}

    def insts(ps):
        return [
            decompose_problem(by_name[p.name][0], by_name[p.name][1], n_max, strategy, seed)
            for p in ps
        ]

    hyper = attention.TrainHyper(
        epochs=epochs, batches_per_epoch=batches, batch_size=batch_size,
        lr=lr, alpha=alpha, seed=seed, d=dim, heads=heads, layers=layers,
    )

    def progress(row):
        click.echo(
            f"epoch {row.epoch}: train={row.train_mean_cost:.2f} "
            f"val={row.val_mean_cost:.2f} refreshed={int(row.baseline_refreshed)}"
        )

    policy, curve = attention.reinforce_train(insts(train_ps), insts(val_ps), hyper,
                                              progress=progress)
    attention.save_policy(checkpoint_path, policy, n_max)
    if curve_path:
        report.write_curve_csv(curve_path, curve)
        report.plot_curve(os.path.splitext(curve_path)[0] + ".png", curve)
    click.echo(f"saved checkpoint to {checkpoint_path} (n_max={n_max})")


@cli.command()
@click.argument("dataset_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--random-orders", type=int, default=20, show_default=True)
@click.option("--out-prefix", default="compare", show_default=True)
@click.option("--ga-generations", type=int, default=10, show_default=True)
@click.option("--ga-population", type=int, default=10, show_default=True)
def compare(dataset_dir, checkpoint, seed, random_orders, out_prefix,
            ga_generations, ga_population):
    """Attention vs GA vs random over a dataset; CSV plus figures."""
    problems = _load_dataset(dataset_dir)
    policy, n_max = attention.load_policy(checkpoint)
    rows = []
    for p in problems:
        inst = build_instance(p, n_max=n_max)
        t0 = time.perf_counter()
        ro = attention.greedy_rollout(policy, inst)
        att_time = time.perf_counter() - t0
        t0 = time.perf_counter()
        _, ga_cost, _ = ga_sequence(
            inst, GaParams(generations=ga_generations, population=ga_population, seed=seed)
        )
        ga_time = time.perf_counter() - t0
        rng = np.random.default_rng(seed)
        rnd_costs = [random_sequence(inst, rng)[1].cost for _ in range(random_orders)]
        rows.append({
            "problem": p.name,
            "attention_cost": ro.cost,
            "ga_cost": ga_cost,
            "random_mean_cost": float(np.mean(rnd_costs)),
            "attention_time": att_time,
            "ga_time": ga_time,
        })
    rows.sort(key=lambda r: (r["ga_cost"], r["problem"]))
    report.write_comparison_csv(f"{out_prefix}.csv", rows)
    report.plot_comparison(out_prefix, rows)
    att = [r["attention_cost"] for r in rows]
    ga = [r["ga_cost"] for r in rows]
    corr = float(np.corrcoef(att, ga)[0, 1]) if len(rows) > 1 else float("nan")
    speedups = sorted(r["ga_time"] / max(r["attention_time"], 1e-9) for r in rows)
    median_speedup = speedups[len(speedups) // 2]
    summary = {"pearson_attention_vs_ga": corr, "median_speedup": median_speedup,
               "problems": len(rows)}
    report.atomic_write(f"{out_prefix}_summary.json",
                        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    click.echo(f"correlation={corr:.3f} median_speedup={median_speedup:.1f}x")


@cli.command("export-svg")
@click.argument("problem_path", type=click.Path(exists=True))
@click.argument("solution_path", type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), required=True)
def export_svg(problem_path, solution_path, out_path):
    """Render a routed solution (from `route`'s solution JSON) as SVG."""
    p = _read_problem(problem_path)
    with open(solution_path) as fh:
        doc = json.load(fh)
    report.atomic_write(out_path, report.render_svg(p, doc))
    click.echo(f"wrote {out_path}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return EXIT_USAGE
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return EXIT_USAGE
    except (ProblemSyntaxError, ProblemSemanticError, InfeasibleConfigError,
            ValueError) as e:
        click.echo(f"data error: {e}", err=True)
        return EXIT_DATA
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except Exception as e:  # noqa: BLE001
        click.echo(f"runtime failure: {e}", err=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
