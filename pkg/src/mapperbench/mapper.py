"""Mapper graph construction over a covered filter embedding.

Pipeline: cover the embedding's bounding box with overlapping interval
products, cluster each bin's points with DBSCAN, emit one vertex per
cluster, and connect vertices that share points (the nerve). Vertex ids
follow (bin index, cluster id) lexicographic order, so serial and
parallel bin processing produce identical graphs.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from mapperbench.errors import InvalidArgumentError
from mapperbench.numerics import pairwise_distances

GRAPH_SCHEMA_VERSION = 1


@dataclass
class Cover:
    """Per-dimension closed intervals over the embedding's bounding box."""

    intervals: list  # per dim: ndarray (k, 2) of [start, end]
    intervals_per_dim: int
    overlap: float
    bounds: list  # per dim: (min, max)


def build_cover(embedding: np.ndarray, i: int, o: float) -> Cover:
    """Equal-length interval cover with fractional overlap o.

    Interval length is l = R / (1 + (i-1)(1-o)) with stride l(1-o), so
    consecutive intervals share exactly o*l and the union is [min, max].
    A zero-range dimension collapses to a single point-interval.
    """
    embedding = np.asarray(embedding, dtype=float)
    if embedding.ndim != 2 or len(embedding) == 0:
        raise InvalidArgumentError("embedding must be a nonempty 2-d matrix")
    if i < 1:
        raise InvalidArgumentError("interval count must be >= 1")
    if not (0.0 <= o < 1.0):
        raise InvalidArgumentError("overlap must lie in [0, 1)")
    intervals = []
    bounds = []
    for dim in range(embedding.shape[1]):
        lo = float(embedding[:, dim].min())
        hi = float(embedding[:, dim].max())
        bounds.append((lo, hi))
        R = hi - lo
        if R == 0.0 or i == 1:
            arr = np.array([[lo, hi]])
        else:
            length = R / (1.0 + (i - 1) * (1.0 - o))
            stride = length * (1.0 - o)
            starts = lo + stride * np.arange(i)
            arr = np.column_stack([starts, starts + length])
            arr[-1, 1] = hi  # pin the last end to max exactly
        intervals.append(arr)
    return Cover(intervals, i, o, bounds)


def _membership(cover: Cover, embedding: np.ndarray) -> list:
    """Per dimension, boolean matrix intervals x points.

    Closed intervals, widened by a relative float tolerance so points
    sitting exactly on the bounds never fall through.
    """
    out = []
    for dim, arr in enumerate(cover.intervals):
        lo, hi = cover.bounds[dim]
        tol = 1e-12 * max(1.0, abs(lo), abs(hi))
        x = embedding[:, dim]
        out.append(
            (x[None, :] >= arr[:, 0, None] - tol) & (x[None, :] <= arr[:, 1, None] + tol)
        )
    return out


def dbscan(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Euclidean DBSCAN; returns a cluster id per point, -1 for noise.

    Neighborhoods are closed balls including the point itself. Clusters
    are created in ascending order of their first core point, and border
    points stick with the first cluster that reaches them.
    """
    if eps <= 0:
        raise InvalidArgumentError("eps must be > 0")
    if min_samples < 1:
        raise InvalidArgumentError("min_samples must be >= 1")
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n == 0:
        return np.full(0, -1, dtype=int)
    D = pairwise_distances(points)
    neigh = D <= eps
    core = neigh.sum(axis=1) >= min_samples
    labels = np.full(n, -1, dtype=int)
    cluster = 0
    for start in range(n):
        if not core[start] or labels[start] != -1:
            continue
        members = np.zeros(n, dtype=bool)
        frontier = np.zeros(n, dtype=bool)
        members[start] = frontier[start] = True
        while frontier.any():
            reach = neigh[frontier].any(axis=0)
            new = reach & core & ~members
            members |= new
            frontier = new
        labels[members] = cluster
        border = neigh[members].any(axis=0) & ~core & (labels == -1)
        labels[border] = cluster
        cluster += 1
    return labels


@dataclass
class MapperVertex:
    id: int
    bin_index: tuple
    members: list  # ascending point ids
    label_histogram: dict  # label -> count
    mean_label: float


@dataclass
class MapperGraph:
    vertices: list
    edges: list  # (u, v) with u < v, sorted
    provenance: dict
    noise_count: int


def _vertex_from_members(vid, bin_index, member_ids, labels):
    counts = {}
    for pid in member_ids:
        lab = int(labels[pid])
        counts[lab] = counts.get(lab, 0) + 1
    hist = dict(sorted(counts.items()))
    mean = sum(l * c for l, c in hist.items()) / len(member_ids)
    return MapperVertex(vid, tuple(bin_index), [int(p) for p in member_ids], hist, mean)


def _edges_from_vertices(vertices) -> list:
    by_point = {}
    for v in vertices:
        for pid in v.members:
            by_point.setdefault(pid, []).append(v.id)
    edges = set()
    for vids in by_point.values():
        for a, b in itertools.combinations(vids, 2):
            edges.add((a, b) if a < b else (b, a))
    return sorted(edges)


def build_mapper(
    embedding: np.ndarray,
    original_labels: np.ndarray,
    cover_i: int,
    cover_o: float,
    eps: float,
    min_samples: int,
    provenance: dict | None = None,
) -> MapperGraph:
    """Cover, cluster per bin, and connect clusters sharing points."""
    embedding = np.asarray(embedding, dtype=float)
    original_labels = np.asarray(original_labels)
    if len(embedding) != len(original_labels):
        raise InvalidArgumentError("embedding and labels must have equal length")
    cover = build_cover(embedding, cover_i, cover_o)
    member_masks = _membership(cover, embedding)
    vertices = []
    assigned = np.zeros(len(embedding), dtype=bool)
    vid = 0
    for bin_index in itertools.product(*(range(len(m)) for m in member_masks)):
        mask = member_masks[0][bin_index[0]]
        for dim in range(1, len(bin_index)):
            mask = mask & member_masks[dim][bin_index[dim]]
        ids = np.flatnonzero(mask)
        if len(ids) == 0:
            continue
        sub_labels = dbscan(embedding[ids], eps, min_samples)
        for cid in range(sub_labels.max() + 1):
            members = ids[sub_labels == cid]
            vertices.append(_vertex_from_members(vid, bin_index, members, original_labels))
            assigned[members] = True
            vid += 1
    prov = {
        "intervals": cover_i,
        "overlap": cover_o,
        "eps": eps,
        "min_samples": min_samples,
    }
    if provenance:
        prov.update(provenance)
    noise = int(len(embedding) - assigned.sum())
    return MapperGraph(vertices, _edges_from_vertices(vertices), prov, noise)


def build_mapper_mapped(
    fit_embedding: np.ndarray,
    map_embedding: np.ndarray,
    map_labels: np.ndarray,
    cover_i: int,
    cover_o: float,
    eps: float,
    min_samples: int,
    provenance: dict | None = None,
) -> MapperGraph:
    """Build the cover and clusters on one embedding, then re-populate
    vertices with a second point set.

    A mapped point joins every vertex whose bin contains it and whose
    cluster has a fit-point within eps. Vertices left empty are dropped;
    edges come from shared mapped points.
    """
    fit_embedding = np.asarray(fit_embedding, dtype=float)
    map_embedding = np.asarray(map_embedding, dtype=float)
    cover = build_cover(fit_embedding, cover_i, cover_o)
    fit_masks = _membership(cover, fit_embedding)
    map_masks = _membership(cover, map_embedding)
    vertices = []
    assigned = np.zeros(len(map_embedding), dtype=bool)
    vid = 0
    for bin_index in itertools.product(*(range(len(m)) for m in fit_masks)):
        fmask = fit_masks[0][bin_index[0]]
        mmask = map_masks[0][bin_index[0]]
        for dim in range(1, len(bin_index)):
            fmask = fmask & fit_masks[dim][bin_index[dim]]
            mmask = mmask & map_masks[dim][bin_index[dim]]
        fit_ids = np.flatnonzero(fmask)
        map_ids = np.flatnonzero(mmask)
        if len(fit_ids) == 0 or len(map_ids) == 0:
            continue
        sub_labels = dbscan(fit_embedding[fit_ids], eps, min_samples)
        for cid in range(sub_labels.max() + 1):
            anchors = fit_embedding[fit_ids[sub_labels == cid]]
            cand = map_embedding[map_ids]
            sq = (
                (cand**2).sum(1)[:, None]
                + (anchors**2).sum(1)[None, :]
                - 2.0 * cand @ anchors.T
            )
            close = np.sqrt(np.maximum(sq, 0.0)).min(axis=1) <= eps
            members = map_ids[close]
            if len(members) == 0:
                continue
            vertices.append(_vertex_from_members(vid, bin_index, members, map_labels))
            assigned[members] = True
            vid += 1
    prov = {
        "intervals": cover_i,
        "overlap": cover_o,
        "eps": eps,
        "min_samples": min_samples,
        "mapped": True,
    }
    if provenance:
        prov.update(provenance)
    noise = int(len(map_embedding) - assigned.sum())
    return MapperGraph(vertices, _edges_from_vertices(vertices), prov, noise)


# ---------------------------------------------------------------------------
# Export

# Anchor colors of the ramp used for mean-label fills (viridis samples at
# t = 0, .25, .5, .75, 1), linearly interpolated in RGB.
_RAMP = [
    (0.0, (0x44, 0x01, 0x54)),
    (0.25, (0x3B, 0x52, 0x8B)),
    (0.5, (0x21, 0x91, 0x8C)),
    (0.75, (0x5E, 0xC9, 0x62)),
    (1.0, (0xFD, 0xE7, 0x25)),
]


def ramp_color(t: float) -> str:
    """Hex color for t in [0, 1] along the documented ramp."""
    t = min(max(float(t), 0.0), 1.0)
    for (t0, c0), (t1, c1) in zip(_RAMP, _RAMP[1:]):
        if t <= t1:
            w = 0.0 if t1 == t0 else (t - t0) / (t1 - t0)
            rgb = tuple(round(a + w * (b - a)) for a, b in zip(c0, c1))
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#fde725"


def _label_scale(graph: MapperGraph) -> float:
    mc = graph.provenance.get("manifold_count")
    if mc and mc > 1:
        return float(mc - 1)
    top = max((v.mean_label for v in graph.vertices), default=0.0)
    return top if top > 0 else 1.0


def export_graph(graph: MapperGraph, format: str) -> bytes:
    """Serialize to DOT (colored, sized nodes) or schema-versioned JSON."""
    if format == "json":
        doc = {
            "schema_version": GRAPH_SCHEMA_VERSION,
            "provenance": graph.provenance,
            "noise_count": graph.noise_count,
            "vertices": [
                {
                    "id": v.id,
                    "bin": list(v.bin_index),
                    "members": v.members,
                    "label_histogram": {str(k): c for k, c in v.label_histogram.items()},
                    "mean_label": v.mean_label,
                }
                for v in graph.vertices
            ],
            "edges": [list(e) for e in graph.edges],
        }
        return (json.dumps(doc, indent=1) + "\n").encode()
    if format == "dot":
        scale = _label_scale(graph)
        lines = [
            "graph mapper {",
            "  node [style=filled, shape=circle, fixedsize=true, fontsize=10];",
        ]
        for v in graph.vertices:
            color = ramp_color(v.mean_label / scale)
            width = 0.3 + 0.15 * np.sqrt(len(v.members))
            lines.append(
                f'  v{v.id} [label="{len(v.members)}", width={width:.3f}, '
                f'fillcolor="{color}", tooltip="bin={v.bin_index} '
                f'mean_label={v.mean_label:.3f}"];'
            )
        for a, b in graph.edges:
            lines.append(f"  v{a} -- v{b};")
        lines.append("}")
        return ("\n".join(lines) + "\n").encode()
    raise InvalidArgumentError(f"unknown export format {format!r}; expected dot or json")


def import_graph(data: bytes) -> MapperGraph:
    """Inverse of the JSON export."""
    doc = json.loads(data)
    if doc.get("schema_version") != GRAPH_SCHEMA_VERSION:
        raise InvalidArgumentError(
            f"unsupported graph schema_version {doc.get('schema_version')!r}"
        )
    vertices = [
        MapperVertex(
            v["id"],
            tuple(v["bin"]),
            list(v["members"]),
            {int(k): c for k, c in v["label_histogram"].items()},
            v["mean_label"],
        )
        for v in doc["vertices"]
    ]
    edges = [tuple(e) for e in doc["edges"]]
    return MapperGraph(vertices, edges, doc["provenance"], doc["noise_count"])
