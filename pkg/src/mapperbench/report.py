"""Reporting: summary table, histogram files, and rendered figures.

Reads a results CSV, prints the best/average/worst table (filters as
columns), and writes per-filter histogram CSVs plus PNG figures: the
metric distribution per filter and a spring-layout rendering of each
exported best-cell graph.
"""

from __future__ import annotations

import glob
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx

from mapperbench import bench as bench_mod
from mapperbench import mapper as mapper_mod
from mapperbench.errors import SummaryUnavailableError

NO_DEFINED_CELLS = "no defined cells"


def _manifold_count(records, config_echo) -> int:
    if config_echo and "dataset" in config_echo:
        ds = config_echo["dataset"]
        if "small_sphere_count" in ds:
            return int(ds["small_sphere_count"]) + 1
    top = max((r.metric for r in records if r.defined), default=2.0)
    return max(2, math.ceil(top))


def summaries_from_records(records, config_echo=None):
    """Per-filter summaries for every filter with >= 1 defined cell."""
    manifold_count = _manifold_count(records, config_echo)
    out = []
    for kind in sorted({r.filter_kind for r in records}):
        try:
            out.append(bench_mod.summarize(records, kind, manifold_count))
        except SummaryUnavailableError:
            continue
    return out, manifold_count


def render_table(summaries) -> str:
    """Text table shaped like the target: filters across, stats down."""
    if not summaries:
        return NO_DEFINED_CELLS
    kinds = [s.kind for s in summaries]
    rows = [
        ("best", [f"{s.best:.3f}" for s in summaries]),
        ("average", [f"{s.average:.3f}" for s in summaries]),
        ("worst", [f"{s.worst:.3f}" for s in summaries]),
        ("undefined", [str(s.undefined_cells) for s in summaries]),
    ]
    widths = [
        max(len(kinds[c]), *(len(r[1][c]) for r in rows)) for c in range(len(kinds))
    ]
    label_w = max(len("metric"), *(len(r[0]) for r in rows))
    lines = [
        "metric".ljust(label_w)
        + "  "
        + "  ".join(k.rjust(w) for k, w in zip(kinds, widths))
    ]
    for name, cells in rows:
        lines.append(
            name.ljust(label_w)
            + "  "
            + "  ".join(c.rjust(w) for c, w in zip(cells, widths))
        )
    return "\n".join(lines)


def write_histogram_csvs(report_dir, summaries) -> list:
    paths = []
    for s in summaries:
        path = os.path.join(report_dir, f"histogram_{s.kind}.csv")
        edges = s.histogram["edges"]
        counts = s.histogram["counts"]
        with open(path, "w") as fh:
            fh.write("bin_start,bin_end,count\n")
            for lo, hi, c in zip(edges, edges[1:], counts):
                fh.write(f"{lo:.17g},{hi:.17g},{c}\n")
        paths.append(path)
    return paths


def render_distribution_figure(path, summaries, manifold_count) -> None:
    """Small-multiple metric histograms, one panel per filter."""
    n = len(summaries)
    cols = min(3, n)
    rows = math.ceil(n / cols)
    fig, axes = plt.subplots(rows, cols, figsize=(4 * cols, 3 * rows), squeeze=False)
    top = max(max(s.distribution) for s in summaries)
    xmax = min(float(manifold_count), math.ceil(top * 2) / 2 + 0.25)
    for ax, s in zip(axes.flat, summaries):
        ax.hist(
            s.distribution,
            bins=s.histogram["edges"],
            color="#40708c",
            edgecolor="white",
        )
        ax.set_xlim(0.95, xmax)
        ax.set_title(s.kind)
        ax.set_xlabel("metric m")
        ax.set_ylabel("cells")
    for ax in axes.flat[n:]:
        ax.axis("off")
    fig.suptitle("Separation metric across the cover grid (1 is optimal)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_graph_figure(path, graph, manifold_count=None) -> None:
    """Spring-layout PNG of a Mapper graph, colored by mean label."""
    G = nx.Graph()
    G.add_nodes_from(v.id for v in graph.vertices)
    G.add_edges_from(graph.edges)
    if manifold_count is None:
        manifold_count = graph.provenance.get("manifold_count") or 2
    scale = max(manifold_count - 1, 1)
    colors = [v.mean_label / scale for v in graph.vertices]
    sizes = [30.0 + 20.0 * math.sqrt(len(v.members)) for v in graph.vertices]
    pos = nx.spring_layout(G, seed=0)
    fig, ax = plt.subplots(figsize=(6, 6))
    nx.draw_networkx_edges(G, pos, ax=ax, edge_color="#999999", width=0.8)
    nx.draw_networkx_nodes(
        G,
        pos,
        ax=ax,
        node_color=colors,
        cmap="viridis",
        vmin=0.0,
        vmax=1.0,
        node_size=sizes,
    )
    prov = graph.provenance
    title = prov.get("filter", "mapper graph")
    ax.set_title(
        f"{title} (o={prov.get('overlap')}, i={prov.get('intervals')}, "
        f"|V|={len(graph.vertices)}, |E|={len(graph.edges)})"
    )
    ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def run_report(results_dir: str, report_dir: str) -> str:
    """Produce every report artifact; returns the table text."""
    records, config_echo, _seed = bench_mod.read_results_csv(
        os.path.join(results_dir, "results.csv")
    )
    summaries, manifold_count = summaries_from_records(records, config_echo)
    os.makedirs(report_dir, exist_ok=True)
    table = render_table(summaries)
    with open(os.path.join(report_dir, "table.txt"), "w") as fh:
        fh.write(table + "\n")
    if not summaries:
        return table
    write_histogram_csvs(report_dir, summaries)
    render_distribution_figure(
        os.path.join(report_dir, "distribution.png"), summaries, manifold_count
    )
    for graph_json in sorted(glob.glob(os.path.join(results_dir, "graphs", "*_best.json"))):
        with open(graph_json, "rb") as fh:
            graph = mapper_mod.import_graph(fh.read())
        name = os.path.splitext(os.path.basename(graph_json))[0]
        render_graph_figure(
            os.path.join(report_dir, f"{name}.png"), graph, manifold_count
        )
    return table
