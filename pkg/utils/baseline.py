"""
GEMM-only Baseline
Static-size crossbars running Conv/FC only, with pooling, activations,
residual adds and softmax on digital units between eDRAM transfers
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence

import pandas as pd

import config
from data.hardware import HardwareConfig
from data.model_loader import INPUT_ID, LayerSpec, ModelGraph
from simulator.pipeline import (
    MOVEMENT_IMA, TRACE_COLUMNS, FbTask, PipelineTrace, movement_cycles, tensor_bytes,
)
from utils.errors import ConfigError
from utils.stats import USAGE_COLUMNS

LOGGER = logging.getLogger(__name__)

MODES = ("static", "multi_size")
DIGITAL_IMA = -2


@dataclass
class BaselineResult:
    label: str
    usage: pd.DataFrame
    trace: PipelineTrace


@dataclass(frozen=True)
class LayerArrays:
    size: int
    arrays: int
    rows: int
    cols: int

    @property
    def mapped_cells(self) -> int:
        return self.rows * self.cols

    @property
    def allocated_cells(self) -> int:
        return self.arrays * self.size * self.size

    @property
    def utilization(self) -> float:
        return self.mapped_cells / self.allocated_cells


def layer_arrays(layer: LayerSpec, size: int, cell_bits: int = config.BASELINE_CELL_BITS) -> LayerArrays:
    """One copy of a GEMM layer's weights tiled over size x size arrays"""
    cols = layer.out_channels * math.ceil(layer.bits_w / cell_bits)
    arrays = math.ceil(layer.fan_in / size) * math.ceil(cols / size)
    return LayerArrays(size=size, arrays=arrays, rows=layer.fan_in, cols=cols)


def best_fit(layer: LayerSpec, sizes: Sequence[int]) -> LayerArrays:
    """Size with the highest utilization; ties go to the larger array"""
    return max((layer_arrays(layer, s) for s in sizes), key=lambda a: (a.utilization, a.size))


def mode_label(mode: str, sizes: Sequence[int]) -> str:
    if mode == "static":
        return f"static-{sizes[0]}"
    return "multi-" + "-".join(str(s) for s in sorted(sizes))


def _input_bytes(graph: ModelGraph, layer: LayerSpec) -> int:
    total = 0
    for src in list(layer.inputs) + ([layer.residual_source] if layer.residual_source is not None else []):
        shape = graph.input_shape if src == INPUT_ID else graph.layer(src).out_shape
        total += tensor_bytes(shape, layer.bits_in)
    return total


def run_baseline(graph: ModelGraph, hw: HardwareConfig, mode: str = "static",
                 sizes: Sequence[int] = (512,)) -> BaselineResult:
    """
    Map and time a model on GEMM-only arrays

    Every layer runs to completion before the next: its inputs come from
    eDRAM, GEMM layers read all their arrays in parallel one input bit per
    read, other layers run element by element on a digital unit, and the
    output goes back to eDRAM.

    Args:
        graph (ModelGraph): Model
        hw (HardwareConfig): ADC throughput and per-size ADC entries
        mode (str): "static" (one size) or "multi_size" (best fit per layer)
        sizes (list): Array sizes available

    Returns:
        BaselineResult: usage per GEMM layer and the run trace
    """

    if mode not in MODES:
        raise ConfigError(f"unknown baseline mode '{mode}', expected one of {MODES}")
    sizes = list(sizes)
    if not sizes or (mode == "static" and len(sizes) != 1):
        raise ConfigError(f"baseline mode {mode} got array sizes {sizes}")
    for size in sizes:
        hw.adc_for(size)

    tasks: List[FbTask] = []
    usage = []
    arrays_by_size: Dict[int, int] = {}
    adc_by_size: Dict[int, int] = {}
    t = 0
    for layer in graph.layers:
        moved = _input_bytes(graph, layer)
        tasks.append(FbTask(layer.id, layer.id, MOVEMENT_IMA, "load_input", t, t + movement_cycles(moved),
                            events={"movement_bytes": moved}))
        t += movement_cycles(moved)

        if layer.is_gemm:
            fit = best_fit(layer, sizes) if mode == "multi_size" else layer_arrays(layer, sizes[0])
            arrays_by_size[fit.size] = arrays_by_size.get(fit.size, 0) + fit.arrays
            usage.append({
                "layer_id": layer.id, "kind": layer.kind, "arrays": fit.arrays,
                "array_rows": fit.size, "array_cols": fit.size,
                "mapped_cells": fit.mapped_cells, "allocated_cells": fit.allocated_cells,
            })
            per_read = math.ceil(min(fit.cols, fit.size) / hw.adc_samples_per_cycle)
            cycles = layer.positions * layer.bits_in * per_read
            conversions = layer.positions * layer.bits_in * fit.cols * math.ceil(layer.fan_in / fit.size)
            adc_by_size[fit.size] = adc_by_size.get(fit.size, 0) + conversions
            tasks.append(FbTask(layer.id, layer.id, layer.id, "compute", t, t + cycles, fit.mapped_cells,
                                events={
                                    "adc_conversions": conversions,
                                    "sna_ops": conversions,
                                    "dac_drives": layer.positions * layer.bits_in * layer.fan_in,
                                    "cell_reads": layer.positions * layer.bits_in * fit.mapped_cells,
                                    "ir_accesses": layer.positions * layer.fan_in,
                                    "or_accesses": layer.positions * layer.out_channels,
                                }))
        else:
            elements = math.prod(layer.in_shape)
            cycles = elements * config.DIGITAL_CYCLES_PER_ELEMENT[layer.kind]
            tasks.append(FbTask(layer.id, layer.id, DIGITAL_IMA, "compute", t, t + cycles,
                                events={"digital_ops": elements}))
        t += cycles

        moved = tensor_bytes(layer.out_shape, layer.bits_in)
        tasks.append(FbTask(layer.id, layer.id, MOVEMENT_IMA, "write_output", t, t + movement_cycles(moved),
                            events={"movement_bytes": moved}))
        t += movement_cycles(moved)

    frame = pd.DataFrame([task.as_row() for task in tasks], columns=list(TRACE_COLUMNS))
    array_cells = sum(size * size * n for size, n in arrays_by_size.items())
    label = mode_label(mode, sizes)
    trace = PipelineTrace(
        tasks=frame, total_cycles=t, array_cells=array_cells, arrays=sum(arrays_by_size.values()),
        stalls={"handoff": 0, "backpressure": 0,
                "movement": int((frame["ima"] == MOVEMENT_IMA).mul(frame["end"] - frame["start"]).sum())},
        meta={"model": graph.name, "mode": label, "arrays_by_size": arrays_by_size,
              "array_rows": {size: size for size in arrays_by_size}, "adc_by_size": adc_by_size},
    )
    LOGGER.info("Baseline %s on %s: %d cycles on %d arrays", label, graph.name, t, trace.arrays)
    return BaselineResult(label=label, usage=pd.DataFrame(usage, columns=USAGE_COLUMNS), trace=trace)
