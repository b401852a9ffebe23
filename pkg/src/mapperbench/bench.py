"""Grid benchmark: manifold-separation metric over cover parameters.

For each filter and each (overlap, intervals) cell the Mapper graph is
scored by the mean number of distinct manifold labels per vertex; 1 is
optimal (every vertex pure). Cells whose graph comes out empty are
recorded as undefined rather than aborting or being imputed.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from mapperbench import filters as filters_mod
from mapperbench import mapper as mapper_mod
from mapperbench.dataset import Split
from mapperbench.errors import (
    InvalidArgumentError,
    MetricUndefinedError,
    ParseError,
    SummaryUnavailableError,
)

RESULTS_HEADER = ["filter", "overlap", "intervals", "metric", "vertices", "noise", "defined"]

DEFAULT_OVERLAPS = tuple(round(0.025 * k, 6) for k in range(1, 17))
DEFAULT_INTERVALS = tuple(range(5, 50, 5))

HISTOGRAM_BIN_WIDTH = 0.05


@dataclass
class GridSpec:
    filters: list  # of FilterSpec
    overlaps: tuple = DEFAULT_OVERLAPS
    intervals: tuple = DEFAULT_INTERVALS

    def __post_init__(self):
        self.overlaps = tuple(float(o) for o in self.overlaps)
        self.intervals = tuple(int(i) for i in self.intervals)
        if not self.filters:
            raise InvalidArgumentError("grid needs at least one filter")
        if not self.overlaps or not self.intervals:
            raise InvalidArgumentError("grid needs nonempty overlaps and intervals")
        for o in self.overlaps:
            if not (0.0 <= o < 1.0):
                raise InvalidArgumentError(f"overlap {o} outside [0, 1)")
        for i in self.intervals:
            if i < 1:
                raise InvalidArgumentError(f"interval count {i} must be >= 1")


@dataclass
class MapperParams:
    eps: float = 4.0
    min_samples: int = 5
    graph_on: str = "test"

    def __post_init__(self):
        if self.eps <= 0:
            raise InvalidArgumentError("eps must be > 0")
        if self.min_samples < 1:
            raise InvalidArgumentError("min_samples must be >= 1")
        if self.graph_on not in ("test", "train_then_map"):
            raise InvalidArgumentError(
                f"graph_on must be 'test' or 'train_then_map', got {self.graph_on!r}"
            )


@dataclass
class BenchRecord:
    filter_kind: str
    overlap: float
    intervals: int
    metric: float | None
    vertices: int
    noise: int
    defined: bool
    export_path: str = ""


@dataclass
class FilterSummary:
    kind: str
    best: float
    average: float
    worst: float
    distribution: list
    undefined_cells: int
    histogram: dict


def metric_m(graph: mapper_mod.MapperGraph, manifold_count: int) -> float:
    """Mean distinct-manifold count per vertex; raises on empty graphs."""
    if len(graph.vertices) == 0:
        raise MetricUndefinedError("graph has no vertices; metric undefined")
    for v in graph.vertices:
        for lab in v.label_histogram:
            if not (0 <= lab < manifold_count):
                raise InvalidArgumentError(
                    f"vertex {v.id} carries label {lab} outside [0, {manifold_count})"
                )
    total = sum(len(v.label_histogram) for v in graph.vertices)
    return total / len(graph.vertices)


def fit_models(grid: GridSpec, split: Split, seed: int = 0, existing: dict | None = None) -> dict:
    """Fit each grid filter once on the train matrix.

    Filters whose spec carries no explicit seed get the global one, so a
    config with just a top-level seed stays fully deterministic.
    """
    models = dict(existing or {})
    for spec in grid.filters:
        if spec.kind in models:
            continue
        spec = _seeded_spec(spec, seed)
        aux = split.test.points if spec.kind == "tsne" else None
        models[spec.kind] = filters_mod.fit(spec, split.train.points, aux)
    return models


def _seeded_spec(spec, seed):
    params = dict(spec.params)
    if spec.kind == "tsne":
        params.setdefault("seed", seed)
    elif spec.kind == "tae":
        config = dict(params.get("config", {}))
        config.setdefault("seed", seed)
        params["config"] = config
    else:
        return spec
    return filters_mod.FilterSpec(spec.kind, spec.latent_dim, params)


def run_grid(
    split: Split,
    grid: GridSpec,
    mapper_params: MapperParams,
    seed: int = 0,
    models: dict | None = None,
    threads: int = 1,
) -> list:
    """One BenchRecord per (filter, overlap, intervals) cell.

    Each filter is fitted at most once; a failing cell yields an
    undefined record instead of aborting the sweep. Records come back
    sorted by (kind, overlap, intervals) regardless of schedule.
    """
    models = fit_models(grid, split, seed, models)
    manifold_count = split.test.manifold_count
    records = []
    for spec in grid.filters:
        model = models[spec.kind]
        test_emb = filters_mod.transform(model, split.test.points)
        train_emb = None
        if mapper_params.graph_on == "train_then_map":
            train_emb = filters_mod.transform(model, split.train.points)

        def run_cell(cell, kind=spec.kind, test_emb=test_emb, train_emb=train_emb):
            o, i = cell
            prov = {"filter": kind, "manifold_count": manifold_count}
            try:
                if train_emb is None:
                    graph = mapper_mod.build_mapper(
                        test_emb, split.test.labels, i, o,
                        mapper_params.eps, mapper_params.min_samples, prov,
                    )
                else:
                    graph = mapper_mod.build_mapper_mapped(
                        train_emb, test_emb, split.test.labels, i, o,
                        mapper_params.eps, mapper_params.min_samples, prov,
                    )
            except Exception:
                return BenchRecord(kind, o, i, None, 0, 0, False)
            try:
                m = metric_m(graph, manifold_count)
            except MetricUndefinedError:
                return BenchRecord(
                    kind, o, i, None, 0, graph.noise_count, False
                )
            return BenchRecord(
                kind, o, i, m, len(graph.vertices), graph.noise_count, True
            )

        cells = [(o, i) for o in grid.overlaps for i in grid.intervals]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                records.extend(pool.map(run_cell, cells))
        else:
            records.extend(run_cell(c) for c in cells)
    records.sort(key=lambda r: (r.filter_kind, r.overlap, r.intervals))
    return records


def summarize(records: list, kind: str, manifold_count: int) -> FilterSummary:
    """Best/average/worst plus the full distribution and a fixed-bin
    histogram (width 0.05 over [1, manifold_count])."""
    mine = [r for r in records if r.filter_kind == kind]
    defined = [r.metric for r in mine if r.defined]
    if not defined:
        raise SummaryUnavailableError(f"no defined grid cells for filter {kind!r}")
    values = sorted(defined)
    n_bins = max(1, round((manifold_count - 1) / HISTOGRAM_BIN_WIDTH))
    edges = np.linspace(1.0, float(manifold_count), n_bins + 1)
    counts, _ = np.histogram(defined, bins=edges)
    return FilterSummary(
        kind=kind,
        best=values[0],
        average=float(np.mean(defined)),
        worst=values[-1],
        distribution=list(defined),
        undefined_cells=len(mine) - len(defined),
        histogram={"edges": edges.tolist(), "counts": counts.tolist()},
    )


# ---------------------------------------------------------------------------
# Results files


def _fmt(x) -> str:
    return f"{x:.17g}"


def results_csv_bytes(records: list, config_echo: dict | None = None, seed: int | None = None) -> bytes:
    """Render records as CSV with a commented config echo header."""
    buf = io.StringIO()
    buf.write("# mapperbench results v1\n")
    if config_echo is not None:
        buf.write("# config: " + json.dumps(config_echo, sort_keys=True) + "\n")
    if seed is not None:
        buf.write(f"# seed: {seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULTS_HEADER)
    for r in records:
        writer.writerow(
            [
                r.filter_kind,
                _fmt(r.overlap),
                r.intervals,
                _fmt(r.metric) if r.defined else "",
                r.vertices,
                r.noise,
                1 if r.defined else 0,
            ]
        )
    return buf.getvalue().encode()


def write_results_csv(path, records, config_echo=None, seed=None) -> None:
    with open(path, "wb") as fh:
        fh.write(results_csv_bytes(records, config_echo, seed))


def read_results_csv(path):
    """Parse a results CSV back into records plus the config echo."""
    config_echo = None
    seed = None
    records = []
    with open(path, newline="") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("config:"):
                    try:
                        config_echo = json.loads(body[len("config:"):])
                    except json.JSONDecodeError as exc:
                        raise ParseError(f"bad config echo: {exc}", row=lineno)
                elif body.startswith("seed:"):
                    seed = int(body[len("seed:"):])
                continue
            if not line:
                continue
            fields = next(csv.reader([line]))
            if not header_seen:
                if fields != RESULTS_HEADER:
                    raise ParseError(
                        f"expected header {RESULTS_HEADER}, got {fields}", row=lineno
                    )
                header_seen = True
                continue
            if len(fields) != len(RESULTS_HEADER):
                raise ParseError(
                    f"expected {len(RESULTS_HEADER)} fields, got {len(fields)}", row=lineno
                )
            try:
                defined = fields[6] == "1"
                records.append(
                    BenchRecord(
                        filter_kind=fields[0],
                        overlap=float(fields[1]),
                        intervals=int(fields[2]),
                        metric=float(fields[3]) if defined else None,
                        vertices=int(fields[4]),
                        noise=int(fields[5]),
                        defined=defined,
                    )
                )
            except ValueError as exc:
                raise ParseError(f"bad field value: {exc}", row=lineno)
        if not header_seen:
            raise ParseError("no header row found", row=0)
    return records, config_echo, seed


def summary_json_bytes(summaries: list, config_echo: dict | None = None, seed: int | None = None) -> bytes:
    doc = {
        "schema_version": 1,
        "config": config_echo,
        "seed": seed,
        "filters": {
            s.kind: {
                "best": s.best,
                "average": s.average,
                "worst": s.worst,
                "undefined_cells": s.undefined_cells,
                "distribution": s.distribution,
                "histogram": s.histogram,
            }
            for s in summaries
        },
    }
    return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode()
