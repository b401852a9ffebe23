"""Config loading, validation, overrides, and the output layout."""

import json
import os

import pytest

from mapperbench.bench import DEFAULT_INTERVALS, DEFAULT_OVERLAPS
from mapperbench.config import (
    RunConfig,
    RunPaths,
    apply_overrides,
    load_config,
    parse_override,
)
from mapperbench.errors import InvalidArgumentError, ParseError
from mapperbench.filters import FILTER_KINDS


def test_defaults_cover_all_filters_and_full_grid():
    cfg = RunConfig()
    grid = cfg.grid_spec()
    assert tuple(s.kind for s in grid.filters) == FILTER_KINDS
    assert grid.overlaps == DEFAULT_OVERLAPS
    assert grid.intervals == DEFAULT_INTERVALS
    assert cfg.split_seed == cfg.seed + 1


def test_dataset_inherits_global_seed_unless_pinned():
    assert RunConfig(seed=7).sphere_spec().seed == 7
    cfg = RunConfig(seed=7, dataset={"seed": 3})
    assert cfg.sphere_spec().seed == 3


def test_unknown_top_level_key_rejected():
    with pytest.raises(InvalidArgumentError, match="unknown config keys"):
        RunConfig.from_dict({"sed": 1})


def test_unknown_grid_key_rejected():
    with pytest.raises(InvalidArgumentError, match="unknown grid keys"):
        RunConfig(grid={"overlap": [0.1]})


def test_bad_component_values_fail_at_construction():
    with pytest.raises(InvalidArgumentError):
        RunConfig(test_fraction=0.0)
    with pytest.raises(InvalidArgumentError):
        RunConfig(test_fraction=1.0)
    with pytest.raises(InvalidArgumentError):
        RunConfig(threads=0)
    with pytest.raises(InvalidArgumentError):
        RunConfig(dataset={"ambient_dim": 1})
    with pytest.raises(InvalidArgumentError):
        RunConfig(mapper={"eps": -1.0})
    with pytest.raises(InvalidArgumentError, match="bad mapper config"):
        RunConfig(mapper={"epsilon": 2.0})


def test_to_dict_is_fully_resolved_and_stable():
    cfg = RunConfig(seed=4, dataset={"ambient_dim": 5})
    echo = cfg.to_dict()
    assert echo["dataset"]["ambient_dim"] == 5
    assert echo["dataset"]["seed"] == 4  # default made explicit
    assert echo["grid"]["overlaps"] == list(DEFAULT_OVERLAPS)
    assert echo["mapper"]["eps"] == 4.0
    # round-tripping the echo changes nothing
    assert RunConfig.from_dict(json.loads(json.dumps(echo))).to_dict() == echo


def test_parse_override_value_forms():
    assert parse_override("seed=3") == ("seed", 3)
    assert parse_override("mapper.eps=0.5") == ("mapper.eps", 0.5)
    assert parse_override("grid.overlaps=[0.1,0.2]") == ("grid.overlaps", [0.1, 0.2])
    assert parse_override('output_dir="runs/x"') == ("output_dir", "runs/x")
    # non-JSON values fall back to the raw string
    assert parse_override("mapper.graph_on=test") == ("mapper.graph_on", "test")


def test_parse_override_rejects_malformed():
    with pytest.raises(InvalidArgumentError):
        parse_override("seed")
    with pytest.raises(InvalidArgumentError):
        parse_override("=3")


def test_apply_overrides_creates_nested_paths():
    doc = {"seed": 1}
    apply_overrides(doc, ["mapper.eps=2.5", "seed=9"])
    assert doc == {"seed": 9, "mapper": {"eps": 2.5}}


def test_load_config_applies_overrides(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 1, "dataset": {"ambient_dim": 6}}))
    cfg = load_config(path, ["seed=2", "dataset.points_per_sphere=12"])
    assert cfg.seed == 2
    assert cfg.sphere_spec().ambient_dim == 6
    assert cfg.sphere_spec().points_per_sphere == 12


def test_load_config_parse_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ParseError, match="JSON object"):
        load_config(arr)


def test_run_paths_layout():
    p = RunPaths("out")
    assert p.train_csv == os.path.join("out", "dataset", "train.csv")
    assert p.model("pca") == os.path.join("out", "models", "pca.json")
    assert p.results_csv == os.path.join("out", "results", "results.csv")
    assert p.best_graph("tae", "dot") == os.path.join(
        "out", "results", "graphs", "tae_best.dot"
    )
    assert p.report_dir == os.path.join("out", "report")
