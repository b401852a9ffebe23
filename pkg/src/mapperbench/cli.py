"""Command-line pipeline: generate, fit, bench, report, export-graph.

Exit codes:
  0  success
  2  invalid argument or config (also used by argparse itself)
  3  io failure (missing or unwritable files)
  4  numerical failure (generation, training divergence, no defined cells)
  5  parse failure (malformed CSV/JSON inputs)
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from mapperbench import bench as bench_mod
from mapperbench import dataset as dataset_mod
from mapperbench import filters as filters_mod
from mapperbench import mapper as mapper_mod
from mapperbench import report as report_mod
from mapperbench.config import RunPaths, load_config
from mapperbench.errors import (
    ConvergenceError,
    GenerationError,
    InvalidArgumentError,
    MetricUndefinedError,
    OutOfSampleError,
    ParseError,
    StratificationError,
    SummaryUnavailableError,
    TrainingDivergedError,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_PARSE = 5


def _load(args):
    return load_config(args.config, args.set or [])


def _load_split(config, paths: RunPaths) -> dataset_mod.Split:
    for p in (paths.train_csv, paths.test_csv, paths.manifest):
        if not os.path.exists(p):
            raise FileNotFoundError(
                f"missing dataset file {p}; run 'mapperbench generate' first"
            )
    manifest = dataset_mod.load_manifest(paths.manifest)
    k = manifest["manifold_count"]
    return dataset_mod.Split(
        train=dataset_mod.load_cloud_csv(paths.train_csv, k),
        test=dataset_mod.load_cloud_csv(paths.test_csv, k),
        scaler_mean=np.array(manifest["scaler"]["mean"]),
        scaler_std=np.array(manifest["scaler"]["std"]),
    )


def cmd_generate(args) -> int:
    config = _load(args)
    paths = RunPaths(config.output_dir)
    spec = config.sphere_spec()
    cloud = dataset_mod.generate_spheres(spec)
    split = dataset_mod.split_and_scale(cloud, config.test_fraction, config.split_seed)
    os.makedirs(paths.dataset_dir, exist_ok=True)
    dataset_mod.save_cloud_csv(split.train, paths.train_csv)
    dataset_mod.save_cloud_csv(split.test, paths.test_csv)
    dataset_mod.save_manifest(
        paths.manifest, spec, config.test_fraction, config.split_seed, split,
        config_echo=config.to_dict(),
    )
    print(
        f"wrote {paths.train_csv} ({len(split.train)} points), "
        f"{paths.test_csv} ({len(split.test)} points), {paths.manifest}"
    )
    return EXIT_OK


def _fit_one(config, split, spec) -> filters_mod.FilterModel:
    spec = bench_mod._seeded_spec(spec, config.seed)
    aux = split.test.points if spec.kind == "tsne" else None
    return filters_mod.fit(spec, split.train.points, aux)


def cmd_fit(args) -> int:
    config = _load(args)
    paths = RunPaths(config.output_dir)
    specs = {s.kind: s for s in config.filter_specs()}
    if args.kind != "all":
        if args.kind not in specs:
            raise InvalidArgumentError(
                f"filter {args.kind!r} is not in the config (has: {sorted(specs)})"
            )
        specs = {args.kind: specs[args.kind]}
    split = _load_split(config, paths)
    os.makedirs(paths.models_dir, exist_ok=True)
    for kind, spec in specs.items():
        model = _fit_one(config, split, spec)
        path = paths.model(kind)
        filters_mod.save_model(path, model)
        note = ""
        if kind == "tae":
            last = model.state["loss_log"][-1]
            note = f" (final loss {last['total']:.4f} after {len(model.state['loss_log'])} epochs)"
        print(f"wrote {path}{note}")
    return EXIT_OK


def _best_cell(records, kind):
    defined = [r for r in records if r.filter_kind == kind and r.defined]
    if not defined:
        return None
    return min(defined, key=lambda r: (r.metric, r.overlap, r.intervals))


def cmd_bench(args) -> int:
    config = _load(args)
    paths = RunPaths(config.output_dir)
    split = _load_split(config, paths)
    grid = config.grid_spec()
    params = config.mapper_params()

    models = {}
    missing = []
    for spec in grid.filters:
        path = paths.model(spec.kind)
        if os.path.exists(path):
            models[spec.kind] = filters_mod.load_model(path)
        else:
            missing.append(spec.kind)
    if missing:
        if not args.fit_missing:
            raise FileNotFoundError(
                f"missing model files for {missing}; run 'mapperbench fit' "
                "or pass --fit-missing"
            )
        os.makedirs(paths.models_dir, exist_ok=True)
        for spec in grid.filters:
            if spec.kind in missing:
                model = _fit_one(config, split, spec)
                filters_mod.save_model(paths.model(spec.kind), model)
                models[spec.kind] = model

    records = bench_mod.run_grid(
        split, grid, params, seed=config.seed, models=models, threads=config.threads
    )

    os.makedirs(paths.graphs_dir, exist_ok=True)
    manifold_count = split.test.manifold_count
    echo = config.to_dict()
    summaries = []
    for spec in grid.filters:
        best = _best_cell(records, spec.kind)
        if best is None:
            print(f"{spec.kind}: no defined cells", file=sys.stderr)
            continue
        emb = filters_mod.transform(models[spec.kind], split.test.points)
        prov = {"filter": spec.kind, "manifold_count": manifold_count}
        if params.graph_on == "train_then_map":
            graph = mapper_mod.build_mapper_mapped(
                filters_mod.transform(models[spec.kind], split.train.points),
                emb, split.test.labels, best.intervals, best.overlap,
                params.eps, params.min_samples, prov,
            )
        else:
            graph = mapper_mod.build_mapper(
                emb, split.test.labels, best.intervals, best.overlap,
                params.eps, params.min_samples, prov,
            )
        for fmt in ("json", "dot"):
            out = paths.best_graph(spec.kind, fmt)
            with open(out, "wb") as fh:
                fh.write(mapper_mod.export_graph(graph, fmt))
        best.export_path = paths.best_graph(spec.kind, "json")
        summaries.append(bench_mod.summarize(records, spec.kind, manifold_count))

    os.makedirs(paths.results_dir, exist_ok=True)
    bench_mod.write_results_csv(paths.results_csv, records, config_echo=echo, seed=config.seed)
    with open(paths.summary_json, "wb") as fh:
        fh.write(bench_mod.summary_json_bytes(summaries, config_echo=echo, seed=config.seed))
    print(f"wrote {paths.results_csv} ({len(records)} cells)")
    print(f"wrote {paths.summary_json}")
    if not summaries:
        print("benchmark produced no defined cells", file=sys.stderr)
        return EXIT_NUMERIC
    print(report_mod.render_table(summaries))
    return EXIT_OK


def cmd_report(args) -> int:
    if args.results:
        results_dir = args.results
        report_dir = args.report_dir or os.path.join(
            os.path.dirname(results_dir.rstrip("/")) or ".", "report"
        )
    else:
        if not args.config:
            raise InvalidArgumentError("report needs --results or --config")
        config = _load(args)
        paths = RunPaths(config.output_dir)
        results_dir = paths.results_dir
        report_dir = args.report_dir or paths.report_dir
    table = report_mod.run_report(results_dir, report_dir)
    print(table)
    print(f"report files in {report_dir}")
    return EXIT_OK


def cmd_export_graph(args) -> int:
    with open(args.graph, "rb") as fh:
        graph = mapper_mod.import_graph(fh.read())
    data = mapper_mod.export_graph(graph, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(data.decode())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapperbench",
        description="Benchmark Mapper filter functions on the nested-spheres dataset.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", required=True, help="path to a run config JSON")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="override a config field by dotted path (JSON-decoded value)",
        )

    p = sub.add_parser("generate", help="generate, split, scale, and save the dataset")
    add_config(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit filter models on the training data")
    add_config(p)
    p.add_argument(
        "--kind",
        default="all",
        choices=("all",) + filters_mod.FILTER_KINDS,
        help="which filter to fit (default: every filter in the config)",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bench", help="run the cover-parameter grid and score every cell")
    add_config(p)
    p.add_argument(
        "--fit-missing",
        action="store_true",
        help="fit and save any filter model whose file is absent",
    )
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="summarize a results CSV and render figures")
    p.add_argument("--config", help="run config (used to locate the results dir)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--results", help="results directory (overrides --config)")
    p.add_argument("--report-dir", help="where to write report artifacts")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("export-graph", help="convert an exported graph JSON")
    p.add_argument("--graph", required=True, help="graph JSON file")
    p.add_argument("--format", required=True, choices=("dot", "json"))
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_export_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        loc = f" (row {exc.row})" if getattr(exc, "row", None) is not None else ""
        print(f"parse failure{loc}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except InvalidArgumentError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (
        GenerationError,
        StratificationError,
        ConvergenceError,
        TrainingDivergedError,
        OutOfSampleError,
        MetricUndefinedError,
        SummaryUnavailableError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
