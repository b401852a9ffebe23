"""Run configuration: one JSON document drives the whole pipeline.

The global seed feeds every seeded component that does not pin its own:
the dataset generator uses it directly, the split uses seed + 1, and
trainable filters (tae, tsne) default to it inside the grid runner.
Every artifact embeds the resolved config echo so runs are reproducible
from their outputs alone.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from mapperbench import bench as bench_mod
from mapperbench.dataset import SphereSpec
from mapperbench.errors import InvalidArgumentError, ParseError
from mapperbench.filters import FILTER_KINDS, FilterSpec

_TOP_KEYS = {
    "dataset",
    "test_fraction",
    "filters",
    "grid",
    "mapper",
    "output_dir",
    "seed",
    "threads",
}


def _default_filters() -> list:
    return [{"kind": k} for k in FILTER_KINDS]


@dataclass
class RunConfig:
    dataset: dict = field(default_factory=dict)
    test_fraction: float = 1.0 / 3.0
    filters: list = field(default_factory=_default_filters)
    grid: dict = field(default_factory=dict)
    mapper: dict = field(default_factory=dict)
    output_dir: str = "runs/out"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if not (0.0 < self.test_fraction < 1.0):
            raise InvalidArgumentError("test_fraction must lie strictly in (0, 1)")
        if self.threads < 1:
            raise InvalidArgumentError("threads must be >= 1")
        # construct the component objects now so bad values fail at load
        self.sphere_spec()
        self.grid_spec()
        self.mapper_params()

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {k: d[k] for k in _TOP_KEYS & set(d)}
        return cls(**kwargs)

    def sphere_spec(self) -> SphereSpec:
        d = dict(self.dataset)
        d.setdefault("seed", self.seed)
        try:
            return SphereSpec.from_dict(d)
        except TypeError as exc:
            raise InvalidArgumentError(f"bad dataset config: {exc}")

    @property
    def split_seed(self) -> int:
        return self.seed + 1

    def filter_specs(self) -> list:
        return [FilterSpec.from_dict(f) for f in self.filters]

    def grid_spec(self) -> bench_mod.GridSpec:
        kwargs = {}
        if "overlaps" in self.grid:
            kwargs["overlaps"] = tuple(self.grid["overlaps"])
        if "intervals" in self.grid:
            kwargs["intervals"] = tuple(self.grid["intervals"])
        unknown = set(self.grid) - {"overlaps", "intervals"}
        if unknown:
            raise InvalidArgumentError(f"unknown grid keys: {sorted(unknown)}")
        return bench_mod.GridSpec(filters=self.filter_specs(), **kwargs)

    def mapper_params(self) -> bench_mod.MapperParams:
        try:
            return bench_mod.MapperParams(**self.mapper)
        except TypeError as exc:
            raise InvalidArgumentError(f"bad mapper config: {exc}")

    def to_dict(self) -> dict:
        """Fully resolved echo: defaults made explicit."""
        grid = self.grid_spec()
        params = self.mapper_params()
        return {
            "dataset": self.sphere_spec().to_dict(),
            "test_fraction": self.test_fraction,
            "filters": [s.to_dict() for s in self.filter_specs()],
            "grid": {"overlaps": list(grid.overlaps), "intervals": list(grid.intervals)},
            "mapper": {
                "eps": params.eps,
                "min_samples": params.min_samples,
                "graph_on": params.graph_on,
            },
            "output_dir": self.output_dir,
            "seed": self.seed,
            "threads": self.threads,
        }


def parse_override(text: str) -> tuple:
    """Split 'dotted.key=value' and JSON-decode the value if possible."""
    if "=" not in text:
        raise InvalidArgumentError(f"override {text!r} must look like key=value")
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise InvalidArgumentError(f"override {text!r} has an empty key")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key, value


def apply_overrides(doc: dict, overrides) -> dict:
    """Apply dotted-path assignments to a config dict (in place)."""
    for text in overrides or ():
        key, value = parse_override(text)
        parts = key.split(".")
        node = doc
        for part in parts[:-1]:
            nxt = node.get(part)
            if not isinstance(nxt, dict):
                nxt = {}
                node[part] = nxt
            node = nxt
        node[parts[-1]] = value
    return doc


def load_config(path, overrides=None) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"config {path} is not valid JSON: {exc}")
    if not isinstance(doc, dict):
        raise ParseError(f"config {path} must hold a JSON object")
    apply_overrides(doc, overrides)
    return RunConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# Output layout


class RunPaths:
    """Canonical artifact locations under a run's output directory."""

    def __init__(self, output_dir: str):
        self.root = output_dir
        self.dataset_dir = os.path.join(output_dir, "dataset")
        self.train_csv = os.path.join(self.dataset_dir, "train.csv")
        self.test_csv = os.path.join(self.dataset_dir, "test.csv")
        self.manifest = os.path.join(self.dataset_dir, "manifest.json")
        self.models_dir = os.path.join(output_dir, "models")
        self.results_dir = os.path.join(output_dir, "results")
        self.results_csv = os.path.join(self.results_dir, "results.csv")
        self.summary_json = os.path.join(self.results_dir, "summary.json")
        self.graphs_dir = os.path.join(self.results_dir, "graphs")
        self.report_dir = os.path.join(output_dir, "report")

    def model(self, kind: str) -> str:
        return os.path.join(self.models_dir, f"{kind}.json")

    def best_graph(self, kind: str, format: str) -> str:
        return os.path.join(self.graphs_dir, f"{kind}_best.{format}")
