"""Command line entry point: ``metacascade <command> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

from . import pipeline
from .ingest import IngestError
from .metagraph import load_metagraph
from .synth import SynthConfig, generate_synthetic, write_synthetic


class _JsonLines(logging.Formatter):
    def format(self, record):
        return json.dumps({"ts": round(record.created, 3), "level": record.levelname,
                           "logger": record.name, "msg": record.getMessage()})


def _setup_logging(verbose: int) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonLines())
    root = logging.getLogger("metacascade")
    root.handlers[:] = [handler]
    root.setLevel(logging.DEBUG if verbose > 1 else logging.INFO if verbose else logging.WARNING)


def _parse_sets(items) -> dict[str, str]:
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise pipeline.PipelineError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value
    return out


def _config(args) -> pipeline.PipelineConfig:
    overrides = _parse_sets(args.set)
    if args.workspace:
        overrides["workspace"] = args.workspace
    return pipeline.make_config(args.preset, args.config, overrides)


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("-c", "--config", help="INI file with a [metacascade] section")
    p.add_argument("-p", "--preset", choices=sorted(pipeline.PRESETS))
    p.add_argument("-w", "--workspace")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")


def cmd_synth(args) -> int:
    kw = {}
    fields = {f.name: f for f in dataclasses.fields(SynthConfig)}
    for key, raw in _parse_sets(args.set).items():
        key = key.replace("-", "_")
        if key not in fields:
            raise pipeline.PipelineError(f"unknown synth key {key!r}")
        kw[key] = type(getattr(SynthConfig(), key))(raw)
    cfg = SynthConfig(**kw)
    paths = write_synthetic(generate_synthetic(cfg), args.out, cfg)
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return 0


def cmd_run(args) -> int:
    cfg = _config(args)
    ws = pipeline.Workspace(cfg)
    stages = pipeline.STAGES if args.stage == "all" else (args.stage,)
    for stage in stages:
        m = ws.run(stage, force=args.force)
        status = "cached" if m["cache_hit"] else f"{m['seconds']:.2f}s"
        print(f"{stage:<16} {status}")
    if "evaluate" in stages:
        print(ws.path("report.txt").read_text(), end="")
    return 0


def cmd_experiment(args) -> int:
    cfg = _config(args)
    tic = time.perf_counter()
    result = pipeline.run_experiment(cfg)
    print(pipeline.format_reports(result.reports))
    print(f"# {time.perf_counter() - tic:.1f}s, {len(result.cascades.cascades)} cascades, "
          f"{result.filtered.n_edges} meta-graph edges")
    if args.json:
        Path(args.json).write_text("\n".join(r.to_json() for r in result.reports) + "\n")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    alphas = [float(a) for a in args.alphas.split(",") if a.strip()] if args.alphas else list(cfg.alphas)
    ds_path = Path(cfg.workspace) / "dataset.pkl"
    if not ds_path.exists():
        raise pipeline.PipelineError("no meta-graph in the workspace: run metagraph first")
    ds = pipeline.load_artifact(ds_path)
    print(pipeline.format_sweep(pipeline.sweep_alpha(cfg, ds, alphas, args.model)))
    return 0


def cmd_export(args) -> int:
    path = Path(args.input) if args.input else Path(args.workspace or "workspace") / "metagraph_filtered.npz"
    if not path.exists():
        raise pipeline.PipelineError(f"{path} not found: run filter first")
    text = pipeline.export_graph(load_metagraph(path), args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="metacascade", description="Cascade meta-graph fake news pipeline")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a planted synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run one stage (or all) in the workspace")
    p.add_argument("stage", choices=("all",) + pipeline.STAGES)
    p.add_argument("--force", action="store_true", help="ignore cached results")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="in-memory run of both classification modes")
    p.add_argument("--json", help="write EvalReports as JSON lines")
    _add_config_args(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep-alpha", help="filter/train/evaluate per disparity alpha")
    p.add_argument("--alphas", help="comma-separated list (default: config alphas)")
    p.add_argument("--model", default="gcn", choices=("gcn", "sage", "gat"))
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("export", help="export a meta-graph")
    p.add_argument("--format", required=True, help="graphml, dot or edgelist")
    p.add_argument("--input", help="meta-graph .npz (default: filtered graph in the workspace)")
    p.add_argument("-w", "--workspace")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        return args.func(args)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except (pipeline.PipelineError, IngestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
