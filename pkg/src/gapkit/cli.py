"""Command line entry points."""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from .multigraph import GraphError, Multigraph, bfs_metrics


def _dump(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, default=_default)
    if out is None:
        click.echo(text)
    else:
        Path(out).write_text(text + "\n")


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, tuple)):
        return list(o)
    return str(o)


def _gamma_plus_or_none(g: Multigraph):
    from .spectral import gamma_plus_line

    try:
        return gamma_plus_line(g)
    except GraphError:
        return None


@click.command("build-expander")
@click.option("--base", "base_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--depth", required=True, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def build_expander(base_path, depth, out_dir):
    """Run the zigzag iteration from a base graph and write W_j, G_j."""
    from .combinators import IterationRecipe, zigzag_iteration

    base = Multigraph.load(base_path)
    res = zigzag_iteration(IterationRecipe(base, depth))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for rec, W, G in zip(res.records, res.W, res.G):
        j = rec["j"]
        W.save(out / f"W{j}.json")
        G.save(out / f"G{j}.json")
        records.append(rec | {"W_gamma_plus": _gamma_plus_or_none(W), "G_gamma_plus": _gamma_plus_or_none(G)})
    _dump({"base": str(base_path), "base_n": base.n, "base_degree": base.degree,
           "base_gamma_plus": _gamma_plus_or_none(base), "m": IterationRecipe(base, depth).m,
           "iterates": records}, out / "provenance.json")
    click.echo(f"wrote {2 * len(records)} graphs to {out}")


@click.command("gamma")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--metric", "metric_path", type=click.Path(exists=True, dir_okay=False),
              help="Distance matrix JSON; omitted means the real line via the spectrum.")
@click.option("--mode", type=click.Choice(["exhaustive", "local", "auto"]), default="auto")
@click.option("--plus", is_flag=True, help="Two-map variant gamma_+.")
@click.option("--restarts", type=int, default=100)
@click.option("--seed", type=int, default=0)
def gamma(graph_path, metric_path, mode, plus, restarts, seed):
    """Poincare constant of a graph into a finite metric, as a JSON report."""
    from .metric import FiniteMetric
    from .spectral import gamma_line, gamma_plus_line, gamma_search

    g = Multigraph.load(graph_path)
    if metric_path is None:
        value = gamma_plus_line(g) if plus else gamma_line(g)
        _dump({"gamma_estimate": value, "mode": "spectral", "exact": True, "plus": plus})
        return
    rep = gamma_search(g, FiniteMetric.load(metric_path), mode=mode, plus=plus, restarts=restarts, seed=seed)
    _dump(rep.to_json() | {"plus": plus})


@click.command("l1-embed-sparse")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--delta", required=True, type=float)
@click.option("--trees", type=int, default=None, help="Largest tree measure support allowed.")
@click.option("--samples", type=int, default=200, help="Points sampled from the simplicial complex.")
@click.option("--seed", type=int, default=0)
@click.option("--out", "prefix", default="embedding", help="Writes PREFIX.csv and PREFIX.json.")
def l1_embed_sparse(graph_path, delta, trees, samples, seed, prefix):
    """Embed sample points of a sparse graph's 1-complex into L1."""
    from .embeddings import sparse_graph_l1

    g = Multigraph.load(graph_path)
    rep = sparse_graph_l1(g, delta, samples=samples, seed=seed, max_trees=trees)
    np.savetxt(f"{prefix}.csv", rep.distances, delimiter=",")
    report = rep.to_json() | {
        "graph": str(graph_path), "seed": seed,
        "point_list": [{"vertex": p.vertex} if p.vertex is not None else {"edge": p.edge, "offset": p.offset}
                       for p in rep.points],
    }
    _dump(report, f"{prefix}.json")
    click.echo(f"distortion {rep.distortion:.4f} over {len(rep.points)} points, {rep.trees} trees")


@click.command("gen-random")
@click.option("--model", type=click.Choice(["pairing", "simple"]), default="simple")
@click.option("--n", required=True, type=int)
@click.option("--d", required=True, type=int)
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None, help="Graph JSON path; stdout when omitted.")
def gen_random(model, n, d, seed, out):
    """Sample a random d-regular multigraph (pairing) or simple graph (rejection)."""
    from .randgraph import pairing_sample, uniform_simple_sample

    if model == "pairing":
        g, tries = pairing_sample(n, d, seed), 1
    else:
        g, tries = uniform_simple_sample(n, d, seed)
    data = g.to_json()
    if out is None:
        click.echo(json.dumps(data))
    else:
        Path(out).write_text(json.dumps(data))
        click.echo(f"{model} sample n={n} d={d} after {tries} tries", err=True)


@click.command("battery")
@click.option("--graph", "graph_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--eps", type=float, default=1 / 3)
@click.option("--delta", type=float, default=None, help="Sparsity slack; default 7 log d / (eps log n).")
@click.option("--K", "K", type=float, default=10.0)
@click.option("--hull-samples", type=int, default=0)
@click.option("--seed", type=int, default=0)
def battery(graph_path, eps, delta, K, hull_samples, seed):
    """Property battery for a simple regular graph."""
    from .randgraph import l_class_battery, sparsity_check

    g = Multigraph.load(graph_path)
    bat = l_class_battery(g, K, eps=eps, seed=seed, hull_samples=hull_samples)
    out = bat.to_json()
    if delta is not None:
        out["sparsity"] = sparsity_check(g, eps, delta).to_json()
    _dump(out)


@click.command("kleinberg")
@click.option("--n", required=True, type=int)
@click.option("--d", type=int, default=3)
@click.option("--trials", type=int, default=20)
@click.option("--perm", type=click.Choice(["random", "adversarial", "identity"]), default="random")
@click.option("--c", "c", required=True, type=float)
@click.option("--dependent", is_flag=True, help="Use H = G instead of an independent sample.")
@click.option("--seed", type=int, default=0)
@click.option("--out", default=None, help="CSV path; stdout when omitted.")
def kleinberg(n, d, trials, perm, c, dependent, seed, out):
    """Average versus edge squared distances under a permutation, per trial."""
    from .randgraph import adversarial_permutation, kleinberg_trial, uniform_simple_sample

    ss = np.random.SeedSequence([seed, n, d])
    rows = []
    for trial, child in enumerate(ss.spawn(trials)):
        rng = np.random.default_rng(child)
        gG, _ = uniform_simple_sample(n, d, rng)
        while True:
            gH = gG if dependent else uniform_simple_sample(n, d, rng)[0]
            DH, _, connected = bfs_metrics(gH)
            if connected:
                break
            if dependent:
                gG, _ = uniform_simple_sample(n, d, rng)
        if perm == "identity":
            p = np.arange(n)
        elif perm == "random":
            p = rng.permutation(n)
        else:
            p = adversarial_permutation(gG, DH, rng)
        res = kleinberg_trial(gG, gH, p, c, DH)
        rows.append({"trial": trial, "n": n, "d": d, "perm": perm, "dependent": dependent,
                     "lhs": res.lhs, "rhs": res.rhs, "ratio": res.ratio, "passed": res.passed,
                     "close_pairs": res.close_pairs, "N_H": res.N_H, "counting_ok": res.counting_ok})
    fh = sys.stdout if out is None else open(out, "w", newline="")
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    finally:
        if out is not None:
            fh.close()


@click.group("approx")
def approx():
    """Universal approximators for the average squared distance."""


@approx.command("build")
@click.option("--template-dir", type=click.Path(file_okay=False), default=None,
              help="Directory of G*.json templates; the zigzag family when omitted.")
@click.option("--n", required=True, type=int)
@click.option("--out", default=None, help="JSON path for the pair multiset.")
def approx_build(template_dir, n, out):
    from .approximator import TemplateFamily, build_universal

    family = TemplateFamily.zigzag() if template_dir is None else TemplateFamily.load(template_dir)
    u = build_universal(family, n)
    _dump({"n": u.n, "template": u.template, "template_size": u.template_size, "M": u.M,
           "edges": u.num_edges, "edge_bound": 1.5 * u.M * n,
           "pairs": [[int(i), int(j), int(k)] for (i, j), k in zip(u.pairs, u.counts)],
           "offsets": u.offsets.tolist()}, out)


@approx.command("run")
@click.option("--m", required=True, type=int)
@click.option("--d", type=int, default=3)
@click.option("--n", required=True, type=int)
@click.option("--trials", type=int, default=100)
@click.option("--seed", type=int, default=0)
@click.option("--template-dir", type=click.Path(file_okay=False), default=None)
@click.option("--out", default="report.csv")
def approx_run(m, d, n, trials, seed, template_dir, out):
    from .approximator import TemplateFamily, ratio_experiment, spread

    family = TemplateFamily.zigzag() if template_dir is None else TemplateFamily.load(template_dir)
    rows = ratio_experiment(m, d, n, trials, seed, family, out=out)
    for mode in sorted({r["tuple_mode"] for r in rows}):
        ratios = np.array([r["ratio"] for r in rows if r["tuple_mode"] == mode])
        scale = float(np.exp(np.log(ratios).mean()))
        click.echo(f"{mode}: D_emp {spread(ratios):.4f}, rescaling s {scale:.4f}")


@click.group()
def main():
    """Nonlinear spectral gaps: expanders, embeddings, random graphs, approximators."""


for _cmd in (build_expander, gamma, l1_embed_sparse, gen_random, battery, kleinberg, approx):
    main.add_command(_cmd)
