"""
Command-line Front-end
map, simulate, baseline, compare and trace-view over model and hardware files
"""

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

import config
from data.hardware import HardwareConfig, load_hardware
from data.model_loader import ModelGraph, load_model, model_hash
from mapping.plan import MappingPlan, build_plan, export_plan, import_plan, plan_to_dict
from simulator.inference import compare_outputs, simulate_inference
from simulator.pipeline import count_cycles, schedule_model
from simulator.reference import random_input, random_weights, reference_inference
from utils import reports
from utils.baseline import run_baseline
from utils.errors import EXIT_IO_ERROR, EXIT_OK, EXIT_ORACLE_MISMATCH, ConfigError, HurryError, PlanFormatError
from utils.stats import cost_report, plan_usage, spatial_utilization, utilization_report

LOGGER = logging.getLogger(__name__)

DEFAULT_BASELINE_MODES = ["static-512", "static-256", "static-128", "multi-128-256-512"]


@dataclass
class RunConfig:
    command: str
    model: Optional[Path] = None
    config_path: Optional[Path] = None
    mode: str = "hurry"
    seed: int = config.DEFAULT_SEED
    out: Path = Path(config.DEFAULT_OUTPUT_DIR)
    emit_plot_data: bool = False
    include_reset: bool = config.INCLUDE_RESET
    alg1_canonical: bool = config.ALG1_CANONICAL
    throughput_index_literal: bool = config.THROUGHPUT_INDEX_LITERAL
    plan: Optional[Path] = None
    trace: Optional[Path] = None
    baseline_modes: List[str] = field(default_factory=lambda: list(DEFAULT_BASELINE_MODES))
    reference: Optional[str] = None
    cycle_trace: bool = False
    verbose: bool = False
    quiet: bool = False


def parse_mode(mode: str) -> Tuple[str, List[int]]:
    """'hurry', 'static-512' or 'multi-128-256-512' -> (kind, sizes)"""
    if mode == "hurry":
        return "hurry", []
    head, _, rest = mode.partition("-")
    try:
        sizes = [int(s) for s in rest.split("-")] if rest else []
    except ValueError:
        raise ConfigError(f"bad mode '{mode}'") from None
    if head == "static" and len(sizes) == 1:
        return "static", sizes
    if head == "multi" and sizes:
        return "multi_size", sizes
    raise ConfigError(f"bad mode '{mode}': expected hurry, static-<size> or multi-<size>-<size>...")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hurry", description=config.APP_TITLE)
    parser.add_argument("command", choices=config.COMMANDS)
    parser.add_argument("--model", type=Path, help="model description (JSON)")
    parser.add_argument("--config", type=Path, help=f"hardware config (default {config.DEFAULT_HARDWARE_CONFIG})")
    parser.add_argument("--mode", default="hurry", help="hurry, static-<size> or multi-<sizes>")
    parser.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    parser.add_argument("--out", type=Path, default=Path(config.DEFAULT_OUTPUT_DIR))
    parser.add_argument("--emit-plot-data", action="store_true", help="write array-size and ADC study CSVs")
    parser.add_argument("--include-reset", action=argparse.BooleanOptionalAction, default=config.INCLUDE_RESET)
    parser.add_argument("--alg1-canonical", action="store_true")
    parser.add_argument("--throughput-index-literal", action="store_true")
    parser.add_argument("--plan", type=Path, help="reuse a plan file instead of mapping")
    parser.add_argument("--trace", type=Path, help="trace CSV for trace-view")
    parser.add_argument("--baseline-modes", default=",".join(DEFAULT_BASELINE_MODES))
    parser.add_argument("--reference", help="mode the compare ratios are taken against (default: first baseline mode)")
    parser.add_argument("--cycle-trace", action="store_true", help="also write one row per active FB per cycle")
    parser.add_argument("--verbose", "-v", action="store_true")
    parser.add_argument("--quiet", "-q", action="store_true")
    return parser


def parse_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = build_parser().parse_args(argv)
    return RunConfig(
        command=args.command, model=args.model, config_path=args.config, mode=args.mode, seed=args.seed,
        out=args.out, emit_plot_data=args.emit_plot_data, include_reset=args.include_reset,
        alg1_canonical=args.alg1_canonical, throughput_index_literal=args.throughput_index_literal,
        plan=args.plan, trace=args.trace,
        baseline_modes=[m.strip() for m in args.baseline_modes.split(",") if m.strip()],
        reference=args.reference,
        cycle_trace=args.cycle_trace, verbose=args.verbose, quiet=args.quiet,
    )


def _inputs(run: RunConfig) -> Tuple[ModelGraph, HardwareConfig]:
    if run.model is None:
        raise ConfigError(f"{run.command} needs --model")
    return load_model(run.model), load_hardware(run.config_path)


def _plan(run: RunConfig, graph: ModelGraph, hw: HardwareConfig) -> MappingPlan:
    if run.plan is None:
        return build_plan(graph, hw, canonical=run.alg1_canonical, literal=run.throughput_index_literal)
    plan = import_plan(Path(run.plan).read_text(encoding="utf-8"))
    if plan.model_hash != model_hash(graph):
        raise PlanFormatError(f"plan {run.plan} was built for another model")
    if tuple(plan.array) != hw.array:
        raise PlanFormatError(f"plan {run.plan} targets {plan.array} arrays, config has {hw.array}")
    return plan


def floorplan_table(plan: MappingPlan):
    """One row per FB: where it sits and what it holds"""
    doc = plan_to_dict(plan)
    rows = []
    for ima in doc["imas"]:
        for fb in ima["fbs"]:
            rows.append({
                "ima": ima["ima"], "group": ima["group"], "fb_id": fb["fb_id"], "op_kind": fb["op_kind"],
                "layer_id": fb["layer_id"], "origin_row": fb["origin"][0], "origin_col": fb["origin"][1],
                "rows": fb["extent"][0], "cols": fb["extent"][1], "dataflow": fb["dataflow"],
                "replicas": fb["replicas"], "mapped_cells": fb["mapped_cells"],
            })
    return pd.DataFrame(rows)


def _emit_plot_data(run: RunConfig, graph: ModelGraph, hw: HardwareConfig):
    reports.write_csv(reports.array_size_study(graph), run.out / "array_size.csv")
    reports.write_csv(reports.adc_study(hw), run.out / "adc_tradeoff.csv")


def cmd_map(run: RunConfig) -> int:
    graph, hw = _inputs(run)
    plan = build_plan(graph, hw, canonical=run.alg1_canonical, literal=run.throughput_index_literal)
    reports.write_text(export_plan(plan), run.out / "plan.json")
    table = floorplan_table(plan)
    reports.write_csv(table, run.out / "floorplan.csv")
    spatial = spatial_utilization(plan_usage(plan, graph))
    reports.write_csv(spatial, run.out / "spatial.csv")
    if run.emit_plot_data:
        _emit_plot_data(run, graph, hw)
    if not run.quiet:
        print(table.to_string(index=False))
        print(spatial[["layer_id", "kind", "arrays", "utilization"]].to_string(index=False))
    return EXIT_OK


def cmd_simulate(run: RunConfig) -> int:
    graph, hw = _inputs(run)
    if parse_mode(run.mode)[0] != "hurry":
        return cmd_baseline(run)
    plan = _plan(run, graph, hw)
    rng = np.random.default_rng(run.seed)
    weights = random_weights(graph, rng)
    x = random_input(graph, rng)
    _, expected = reference_inference(graph, weights, x)
    result = simulate_inference(graph, plan, weights, x, hw, include_reset=run.include_reset,
                                progress=not run.quiet and sys.stderr.isatty())
    bad = compare_outputs(graph, result.values, expected, folded=result.folded)
    verdict = "FAIL" if bad else "PASS"

    trace = result.trace
    report = utilization_report(plan_usage(plan, graph), trace)
    cost = cost_report(trace, hw, label="hurry")
    counted = count_cycles(trace)
    reports.write_text(export_plan(plan), run.out / "plan.json")
    reports.write_csv(trace.tasks, run.out / "trace.csv")
    reports.write_csv(report.spatial, run.out / "spatial.csv")
    reports.write_csv(reports.cycle_report(trace), run.out / "cycles.csv")
    if run.cycle_trace:
        reports.write_csv(trace.per_cycle_frame(), run.out / "per_cycle.csv")
    reports.write_json({
        "version": config.REPORT_SCHEMA_VERSION,
        "model": graph.name,
        "model_hash": model_hash(graph),
        "mode": "hurry",
        "seed": run.seed,
        "oracle": verdict,
        "mismatched_layers": bad,
        "folded_layers": sorted(result.folded),
        "utilization": report.summary(),
        "overlap_fraction": round(counted["overlap_fraction"], config.UTILIZATION_DECIMALS),
        "stalls": trace.stalls,
        "energy_pj": cost.energy,
        "area_mm2": cost.area,
        "shares": cost.shares(),
        "diagnostics": result.diagnostics,
    }, run.out / "summary.json")
    if run.emit_plot_data:
        _emit_plot_data(run, graph, hw)
    if not run.quiet:
        print(f"cycles: {trace.total_cycles}  spatial: {report.spatial_mean:.4f}  "
              f"temporal: {report.temporal_mean:.4f}")
    print(f"oracle: {verdict}")
    if bad:
        LOGGER.error("Layers %s differ from the reference", bad)
        return EXIT_ORACLE_MISMATCH
    return EXIT_OK


def _run_mode(mode: str, graph: ModelGraph, hw: HardwareConfig, run: RunConfig):
    kind, sizes = parse_mode(mode)
    if kind == "hurry":
        plan = _plan(run, graph, hw)
        trace = schedule_model(plan, graph, hw, run.include_reset)
        usage = plan_usage(plan, graph)
    else:
        result = run_baseline(graph, hw, kind, sizes)
        trace, usage = result.trace, result.usage
    report = utilization_report(usage, trace)
    return trace, report, cost_report(trace, hw, label=mode)


def cmd_baseline(run: RunConfig) -> int:
    graph, hw = _inputs(run)
    mode = run.mode if run.mode != "hurry" else DEFAULT_BASELINE_MODES[0]
    trace, report, cost = _run_mode(mode, graph, hw, run)
    reports.write_csv(trace.tasks, run.out / f"trace_{mode}.csv")
    reports.write_csv(report.spatial, run.out / f"spatial_{mode}.csv")
    reports.write_json({
        "version": config.REPORT_SCHEMA_VERSION, "model": graph.name, "model_hash": model_hash(graph),
        "mode": mode, "cycles": trace.total_cycles, "utilization": report.summary(),
        "energy_pj": cost.energy, "area_mm2": cost.area,
    }, run.out / f"summary_{mode}.json")
    if run.emit_plot_data:
        _emit_plot_data(run, graph, hw)
    if not run.quiet:
        print(f"{mode}: cycles {trace.total_cycles}  spatial {report.spatial_mean:.4f}  "
              f"temporal {report.temporal_mean:.4f}")
    return EXIT_OK


def cmd_compare(run: RunConfig) -> int:
    graph, hw = _inputs(run)
    modes = ["hurry"] + [m for m in run.baseline_modes if m != "hurry"]
    if len(modes) < 2:
        raise ConfigError("compare needs at least one baseline mode")
    if run.reference is not None and run.reference not in modes:
        raise ConfigError(f"reference mode '{run.reference}' is not among {modes}")
    digest = model_hash(graph)
    records = []
    for mode in tqdm(modes, desc="modes", disable=run.quiet or not sys.stderr.isatty()):
        trace, report, cost = _run_mode(mode, graph, hw, run)
        records.append(reports.run_record(mode, digest, trace, report, cost))
    table = reports.comparison_table(records, reference=run.reference or modes[1])
    reports.write_csv(table, run.out / "comparison.csv")
    if run.emit_plot_data:
        _emit_plot_data(run, graph, hw)
    if not run.quiet:
        print(table.to_string(index=False))
    return EXIT_OK


def cmd_trace_view(run: RunConfig) -> int:
    if run.trace is None:
        raise ConfigError("trace-view needs --trace")
    frame = reports.read_trace(run.trace)
    trace = reports.trace_from_frame(frame)
    counted = count_cycles(trace)
    print(counted["fbs"].to_string(index=False))
    print(f"total cycles: {counted['total_cycles']}  overlap fraction: {counted['overlap_fraction']:.4f}")
    return EXIT_OK


COMMAND_HANDLERS = {
    "map": cmd_map,
    "simulate": cmd_simulate,
    "baseline": cmd_baseline,
    "compare": cmd_compare,
    "trace-view": cmd_trace_view,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    run = parse_args(argv)
    level = logging.DEBUG if run.verbose else logging.ERROR if run.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMAND_HANDLERS[run.command](run)
    except HurryError as exc:
        LOGGER.error("%s", exc)
        return exc.exit_status
    except OSError as exc:
        LOGGER.error("I/O error: %s", exc)
        return EXIT_IO_ERROR


if __name__ == "__main__":
    sys.exit(main())
