"""
Report Files
Atomic CSV/JSON writers, run summaries, mode comparison and trade-off studies
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Sequence

import pandas as pd
import ujson

import config
from data.hardware import HardwareConfig
from data.model_loader import ModelGraph
from simulator.pipeline import MOVEMENT_IMA, TRACE_COLUMNS, PipelineTrace, count_cycles
from utils.baseline import layer_arrays
from utils.errors import ConfigError, PlanFormatError
from utils.stats import CostReport, UtilizationReport, adc_tradeoff, spatial_utilization

LOGGER = logging.getLogger(__name__)

COMPARISON_COLUMNS = [
    "mode", "cycles", "speedup", "energy_efficiency", "area_efficiency",
    "spatial_mean", "spatial_std", "spatial_aggregate", "temporal_mean",
    "energy_pj", "area_mm2", "movement_cycles",
]


def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(frame: pd.DataFrame, path) -> Path:
    _atomic_write(path, frame.to_csv(index=False, lineterminator="\n"))
    LOGGER.debug("Wrote %s (%d rows)", path, len(frame))
    return Path(path)


def write_json(doc: dict, path) -> Path:
    _atomic_write(path, ujson.dumps(doc, indent=2, sort_keys=True) + "\n")
    LOGGER.debug("Wrote %s", path)
    return Path(path)


def write_text(text: str, path) -> Path:
    _atomic_write(path, text)
    return Path(path)


def read_trace(path) -> pd.DataFrame:
    """Load a trace CSV written by write_csv(trace.tasks)"""
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise PlanFormatError(f"trace file {path} is malformed: {exc}") from exc
    missing = [c for c in TRACE_COLUMNS if c not in frame.columns]
    if missing:
        raise PlanFormatError(f"trace file {path} lacks columns {missing}")
    return frame


def trace_from_frame(frame: pd.DataFrame, array_cells: int = 0) -> PipelineTrace:
    return PipelineTrace(tasks=frame, total_cycles=int(frame["end"].max()) if len(frame) else 0,
                         array_cells=array_cells, arrays=int(frame.loc[frame["ima"] >= 0, "ima"].nunique()))


def run_record(label: str, model_hash: str, trace: PipelineTrace, report: UtilizationReport,
               cost: CostReport) -> Dict:
    """One row of the comparison table, before ratios"""
    movement = trace.tasks[trace.tasks["ima"] == MOVEMENT_IMA]
    return {
        "mode": label,
        "model_hash": model_hash,
        "cycles": trace.total_cycles,
        **report.summary(),
        "energy_pj": cost.energy_total,
        "area_mm2": cost.area_total,
        "movement_cycles": int((movement["end"] - movement["start"]).sum()),
        "cost": cost,
    }


def comparison_table(records: List[Dict], reference: str) -> pd.DataFrame:
    """
    Ratios of every run over the reference run

    Args:
        records (list): run_record rows for one model
        reference (str): Mode label the ratios are taken against

    Returns:
        pd.DataFrame: One row per mode
    """

    hashes = {r["model_hash"] for r in records}
    if len(hashes) > 1:
        raise ConfigError(f"runs compare different models: {sorted(hashes)}")
    by_mode = {r["mode"]: r for r in records}
    if reference not in by_mode:
        raise ConfigError(f"reference mode '{reference}' was not run")
    base = by_mode[reference]["cost"]
    rows = []
    for record in records:
        ratios = record["cost"].relative_to(base)
        rows.append({**{k: v for k, v in record.items() if k not in ("cost", "model_hash")}, **ratios})
    return pd.DataFrame(rows)[COMPARISON_COLUMNS]


def cycle_report(trace: PipelineTrace) -> pd.DataFrame:
    """Per-block cycle totals with the run's overlap fraction"""
    counted = count_cycles(trace)
    frame = counted["fbs"].copy()
    frame["overlap_fraction"] = counted["overlap_fraction"]
    return frame


def array_size_study(graph: ModelGraph, sizes: Sequence[int] = config.BASELINE_ARRAY_SIZES) -> pd.DataFrame:
    """Spatial utilization of one weight copy on square arrays of each size"""
    rows = []
    for size in sizes:
        usage = pd.DataFrame([
            {"layer_id": layer.id, "mapped_cells": fit.mapped_cells, "allocated_cells": fit.allocated_cells}
            for layer in graph.layers if layer.is_gemm
            for fit in [layer_arrays(layer, size)]
        ])
        spatial = spatial_utilization(usage)
        rows.append({
            "array_size": size,
            "spatial_aggregate": round(spatial["mapped_cells"].sum() / spatial["allocated_cells"].sum(),
                                       config.UTILIZATION_DECIMALS),
            "spatial_mean": round(float(spatial["utilization"].mean()), config.UTILIZATION_DECIMALS),
        })
    return pd.DataFrame(rows)


def adc_study(hw: HardwareConfig, sizes: Sequence[int] = config.BASELINE_ARRAY_SIZES,
              reference: int = 512) -> pd.DataFrame:
    """ADC power and area of small-array tilings relative to one reference array"""
    return pd.DataFrame([adc_tradeoff(hw, size, reference) for size in sizes])
