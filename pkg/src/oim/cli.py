"""Command-line interface.

Subcommands:
  run         execute an experiment from a config file (plus flag overrides)
  baseline    compute the optimal seed set and its spread under the truth
  plot-data   merge several run CSVs into aligned columns, optionally plot
  graph-info  print node/edge counts of an edge-list file as JSON
  make-graph  generate a synthetic power-law digraph edge list
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .graph import (GraphFormatError, load_edge_list,
                    preferential_attachment_graph, write_edge_list)
from .harness import (ExperimentConfig, apply_overrides, compute_optimal_baseline,
                      load_config, run_experiment)

logger = logging.getLogger("oim")


def _add_override_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("config overrides")
    group.add_argument("--graph", dest="graph_path", help="edge-list path")
    group.add_argument("--symmetrize", dest="symmetrize", action="store_const",
                       const=True, default=None,
                       help="double undirected input into both edge directions")
    group.add_argument("--dimension", type=int, default=None)
    group.add_argument("--seed-budget", dest="seed_budget", type=int, default=None)
    group.add_argument("--rounds", type=int, default=None)
    group.add_argument("--repetitions", type=int, default=None)
    group.add_argument("--eta", type=float, default=None)
    group.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    group.add_argument("--baseline-samples", dest="baseline_samples", type=int,
                       default=None)
    group.add_argument("--strategy", default=None)
    group.add_argument("--gamma", type=float, default=None)
    group.add_argument("--oracle-method", dest="oracle_method", default=None)
    group.add_argument("--oracle-mc-samples", dest="oracle_mc_samples", type=int,
                       default=None)
    group.add_argument("--oracle-epsilon", dest="oracle_epsilon", type=float,
                       default=None)
    group.add_argument("--oracle-ell", dest="oracle_ell", type=float, default=None)
    group.add_argument("--rr-set-cap", dest="rr_set_cap", type=int, default=None)
    group.add_argument("--rr-set-floor", dest="rr_set_floor", type=int, default=None)
    group.add_argument("--rr-work-cap", dest="rr_work_cap", type=int, default=None)


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {key: getattr(args, key) for key in (
        "graph_path", "symmetrize", "dimension", "seed_budget", "rounds",
        "repetitions", "eta", "master_seed", "baseline_samples", "strategy",
        "gamma", "oracle_method", "oracle_mc_samples", "oracle_epsilon",
        "oracle_ell", "rr_set_cap", "rr_set_floor", "rr_work_cap")}
    return apply_overrides(cfg, overrides)


def _cmd_run(args: argparse.Namespace) -> int:
    from .reporting import emit_results

    cfg = _config_from_args(args)
    summary = run_experiment(cfg, workers=args.workers)
    prefix = args.prefix or cfg.strategy
    paths = emit_results(summary, args.out_dir, prefix, figures=not args.no_figures)
    print(f"strategy={summary.strategy_name} rounds={summary.rounds} "
          f"repetitions={summary.repetitions} f_opt={summary.f_opt:.4f} "
          f"final_cum_regret={summary.cum_regret[-1]:.4f}")
    print(f"csv: {paths['csv']}")
    print(f"metadata: {paths['metadata']}")
    for fig in paths["figures"]:
        print(f"figure: {fig}")
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    if cfg.graph_path is None:
        raise ValueError("baseline requires a graph (config [experiment] graph or --graph)")
    graph = load_edge_list(cfg.graph_path, symmetrize=cfg.symmetrize)
    from .graph import assign_weighted_cascade

    probs = assign_weighted_cascade(graph)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed).spawn(1)[0])
    seeds, f_opt = compute_optimal_baseline(graph, probs, cfg.oracle_config(),
                                            cfg.baseline_samples, rng)
    print(json.dumps({"seeds": sorted(seeds), "f_opt": f_opt,
                      "node_count": graph.node_count,
                      "edge_count": graph.edge_count}, sort_keys=True))
    return 0


def _cmd_plot_data(args: argparse.Namespace) -> int:
    from .reporting import merge_run_csvs, render_comparison_figure

    out = merge_run_csvs(args.csv, args.out)
    print(f"merged: {out}")
    if args.figure:
        fig = render_comparison_figure(args.csv, args.figure, column=args.column)
        print(f"figure: {fig}")
    return 0


def _cmd_graph_info(args: argparse.Namespace) -> int:
    graph = load_edge_list(args.path, symmetrize=args.symmetrize)
    print(json.dumps({"node_count": graph.node_count,
                      "edge_count": graph.edge_count,
                      "symmetrized": bool(args.symmetrize)}, sort_keys=True))
    return 0


def _cmd_make_graph(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    graph = preferential_attachment_graph(args.nodes, args.attach, rng)
    write_edge_list(graph, args.out,
                    header=f"power-law digraph nodes={args.nodes} attach={args.attach} "
                           f"seed={args.seed}")
    print(json.dumps({"node_count": graph.node_count,
                      "edge_count": graph.edge_count,
                      "path": str(args.out)}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oim",
        description="Online influence maximization experiments under "
                    "edge-level semi-bandit feedback.")
    parser.add_argument("--version", action="version", version=f"oim {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment and persist results")
    p_run.add_argument("--config", help="sectioned key=value config file")
    p_run.add_argument("--out-dir", default="results")
    p_run.add_argument("--prefix", default=None,
                       help="output file prefix (default: strategy name)")
    p_run.add_argument("--no-figures", action="store_true")
    p_run.add_argument("--workers", type=int, default=1,
                       help="threads across repetitions")
    _add_override_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_base = sub.add_parser("baseline",
                            help="oracle seed set and spread under true probabilities")
    p_base.add_argument("--config", help="sectioned key=value config file")
    _add_override_flags(p_base)
    p_base.set_defaults(func=_cmd_baseline)

    p_plot = sub.add_parser("plot-data", help="merge run CSVs round-by-round")
    p_plot.add_argument("csv", nargs="+", help="per-run CSV files")
    p_plot.add_argument("--out", required=True, help="merged CSV path")
    p_plot.add_argument("--figure", default=None, help="optional comparison PNG")
    p_plot.add_argument("--column", default="cum_regret",
                        help="column to overlay in the figure")
    p_plot.set_defaults(func=_cmd_plot_data)

    p_info = sub.add_parser("graph-info", help="node/edge counts as JSON")
    p_info.add_argument("path")
    p_info.add_argument("--symmetrize", action="store_true")
    p_info.set_defaults(func=_cmd_graph_info)

    p_make = sub.add_parser("make-graph", help="write a synthetic power-law digraph")
    p_make.add_argument("--nodes", type=int, required=True)
    p_make.add_argument("--attach", type=int, required=True)
    p_make.add_argument("--seed", type=int, default=0)
    p_make.add_argument("--out", required=True)
    p_make.set_defaults(func=_cmd_make_graph)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GraphFormatError as exc:
        print(f"error: bad edge list: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
