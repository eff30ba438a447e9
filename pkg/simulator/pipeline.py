"""
Pipeline Scheduling
Granule-level list scheduling of the blocks on each IMA, layer groups run in
sequence, producing the interval trace every metric is computed from
"""

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

import config
from data.hardware import HardwareConfig
from data.model_loader import LayerSpec, ModelGraph
from mapping.datamap import replica_grid
from mapping.plan import ImaPlan, MappingPlan
from simulator.logic import tournament_cycles
from utils.errors import DeadlockError, InvariantViolation

LOGGER = logging.getLogger(__name__)

PHASES = ("load_input", "compute", "write_output")
EVENT_COLUMNS = (
    "adc_conversions", "dac_drives", "cell_reads", "cell_writes", "logic_ops",
    "sna_ops", "or_accesses", "ir_accesses", "movement_bytes", "digital_ops",
)
TRACE_COLUMNS = (
    "ima", "fb_id", "layer_id", "phase", "start", "end", "activated_cells",
    "granule", "dep_fb", "dep_item",
) + EVENT_COLUMNS

# ima id used for transfers between eDRAM and the arrays
MOVEMENT_IMA = -1


@dataclass
class FbTask:
    fb_id: int
    layer_id: int
    ima: int
    phase: str
    start: int
    end: int
    activated_cells: int = 0
    granule: Optional[int] = None
    dependency: Optional[Tuple[int, int]] = None
    events: Dict[str, int] = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {
            "ima": self.ima, "fb_id": self.fb_id, "layer_id": self.layer_id, "phase": self.phase,
            "start": self.start, "end": self.end, "activated_cells": self.activated_cells,
            "granule": -1 if self.granule is None else self.granule,
            "dep_fb": -1 if self.dependency is None else self.dependency[0],
            "dep_item": -1 if self.dependency is None else self.dependency[1],
        }
        row.update({name: int(self.events.get(name, 0)) for name in EVENT_COLUMNS})
        return row


@dataclass
class PipelineTrace:
    """Phase intervals of one inference plus run-level totals"""

    tasks: pd.DataFrame
    total_cycles: int
    array_cells: int
    arrays: int
    stalls: Dict[str, int] = field(default_factory=dict)
    meta: Dict = field(default_factory=dict)

    def activity(self) -> np.ndarray:
        """Activated cells in every cycle, idle cycles included"""
        diff = np.zeros(self.total_cycles + 1, dtype=np.int64)
        active = self.tasks[self.tasks["activated_cells"] > 0]
        np.add.at(diff, active["start"].to_numpy(), active["activated_cells"].to_numpy())
        np.add.at(diff, active["end"].to_numpy(), -active["activated_cells"].to_numpy())
        return np.cumsum(diff)[: self.total_cycles]

    def events(self) -> Dict[str, int]:
        return {name: int(self.tasks[name].sum()) for name in EVENT_COLUMNS}

    def per_cycle_frame(self) -> pd.DataFrame:
        """One row per active block per cycle"""
        tasks = self.tasks
        active = tasks[(tasks["end"] > tasks["start"]) & (tasks["ima"] != MOVEMENT_IMA)]
        lengths = (active["end"] - active["start"]).to_numpy()
        starts = np.repeat(active["start"].to_numpy(), lengths)
        offsets = np.arange(lengths.sum()) - np.repeat(np.cumsum(lengths) - lengths, lengths)
        frame = pd.DataFrame({
            "cycle": starts + offsets,
            "fb_id": np.repeat(active["fb_id"].to_numpy(), lengths),
            "phase": np.repeat(active["phase"].to_numpy(), lengths),
            "activated_cells": np.repeat(active["activated_cells"].to_numpy(), lengths),
        })
        frame = frame.groupby(["cycle", "fb_id"], as_index=False).agg(
            phase=("phase", "first"), activated_cells=("activated_cells", "sum"))
        return frame.sort_values(["cycle", "fb_id"]).reset_index(drop=True)


@dataclass
class ImaSchedule:
    tasks: List[FbTask]
    pass_starts: List[int]
    end: int
    handoff_stall: int = 0
    backpressure_stall: int = 0


class _WritePort:
    """Single write port of an array; reservations never overlap"""

    def __init__(self):
        self.starts: List[int] = []
        self.spans: List[Tuple[int, int]] = []

    def reserve(self, earliest: int, length: int) -> int:
        t = earliest
        i = max(0, bisect_right(self.starts, t) - 1)
        while i < len(self.spans):
            s, e = self.spans[i]
            if e <= t:
                i += 1
                continue
            if s >= t + length:
                break
            t = e
            i += 1
        pos = bisect_right(self.starts, t)
        self.starts.insert(pos, t)
        self.spans.insert(pos, (t, t + length))
        return t


@dataclass
class _Stage:
    """Timing constants of an input-stationary block"""

    fb: object
    layer: LayerSpec
    ops: int
    rounds: int
    lanes: int
    write: int
    compute: int
    lut: int
    granules: int
    positions_per_granule: int


def _stage(ima: ImaPlan, fb, graph: ModelGraph, include_reset: bool) -> _Stage:
    layer = graph.layer(fb.layer_id)
    rep_x, rep_y = replica_grid(fb, ima.shape(fb.fb_id))
    ops = 1 if fb.op_kind == "Softmax" else fb.channel_count
    rounds = math.ceil(ops / rep_x)
    _, h, w = layer.in_shape
    if fb.op_kind == "Max":
        ph, pw, _ = layer.window
        granules, per_granule = layer.positions, ph * pw
    elif fb.op_kind == "Softmax":
        granules, per_granule = 1, h * w
    else:
        granules, per_granule = h * w, 1
    lut = fb.leaves * config.SOFTMAX_LUT_CYCLES_PER_CLASS if fb.op_kind == "Softmax" else 0
    return _Stage(
        fb=fb, layer=layer, ops=ops, rounds=rounds, lanes=max(1, rep_y // rounds),
        write=fb.by * rounds + int(include_reset),
        compute=tournament_cycles(fb.leaves, fb.bits, relu=fb.fused_relu),
        lut=lut, granules=granules, positions_per_granule=per_granule,
    )


def _last_needed(stage: _Stage, g: int) -> int:
    """Index of the last producer output (raster order) granule g waits for"""
    layer = stage.layer
    _, h, w = layer.in_shape
    if stage.fb.op_kind == "Max":
        ph, pw, stride = layer.window
        _, _, ow = layer.out_shape
        i, j = divmod(g, ow)
        return (i * stride + ph - 1) * w + (j * stride + pw - 1)
    if stage.fb.op_kind == "Softmax":
        return h * w - 1
    return g


class _Consumer:
    """Lanes of one input-stationary block"""

    def __init__(self, stage: _Stage, ima: int, port: _WritePort, start: int):
        self.stage = stage
        self.ima = ima
        self.port = port
        self.lane_free = [start] * stage.lanes
        self.last_take = start
        self.takes: List[int] = []
        self.done: List[int] = []
        self.tasks: List[FbTask] = []

    def place(self, g: int, ready: int, dependency: Tuple[int, int]):
        st, fb = self.stage, self.stage.fb
        lane = int(np.argmin(self.lane_free))
        take = self.port.reserve(max(ready, self.lane_free[lane], self.last_take), st.write)
        compute_end = take + st.write + st.compute
        self.lane_free[lane] = compute_end
        self.last_take = take
        self.takes.append(take)
        cells = st.ops * fb.bx * fb.by
        layer_id = fb.layer_id
        self.tasks.append(FbTask(
            fb.fb_id, layer_id, self.ima, "load_input", take, take + st.write, cells, g, dependency,
            {"cell_writes": st.ops * fb.leaves * fb.bits, "or_accesses": st.ops * fb.leaves},
        ))
        self.tasks.append(FbTask(
            fb.fb_id, layer_id, self.ima, "compute", take + st.write, compute_end, cells, g, None,
            {"logic_ops": st.ops * st.compute},
        ))
        end = compute_end
        if st.lut:
            end = compute_end + st.lut
            self.tasks.append(FbTask(
                fb.fb_id, layer_id, self.ima, "write_output", compute_end, end, 0, g, None,
                {"digital_ops": fb.leaves},
            ))
        self.done.append(end)


def schedule_ima(ima: ImaPlan, graph: ModelGraph, hw: HardwareConfig, start: int = 0,
                 parallel: Optional[int] = None, latency: Optional[int] = None,
                 pass_starts: Optional[List[int]] = None, extra_ready: int = 0,
                 include_reset: bool = config.INCLUDE_RESET) -> ImaSchedule:
    """
    List-schedule the blocks of one IMA

    The GEMM block runs passes of `parallel` output positions in raster order.
    Each downstream block takes a granule (one pooling window, one position,
    or the whole vector for Softmax) once its producer has written it.

    Args:
        ima (ImaPlan): Floorplan of the array
        graph (ModelGraph): Model, for tensor dims
        hw (HardwareConfig): ADC throughput and OR capacity
        start (int): First cycle of the group
        parallel, latency: Group-wide pass size and latency overrides
        pass_starts (list): Pass start cycles to follow instead of scheduling
        extra_ready (int): Earliest cycle a Softmax may start

    Returns:
        ImaSchedule: Tasks and stall totals
    """

    gemm = ima.fbs[0]
    if gemm.dataflow != "weight":
        raise InvariantViolation(f"IMA {ima.ima} does not start with a GEMM block")
    res = [fb for fb in ima.fbs if fb.op_kind == "Res"]
    consumers = [_stage(ima, fb, graph, include_reset) for fb in ima.fbs[1:] if fb.op_kind != "Res"]
    for fb in ima.fbs:
        if fb.accumulates_with is not None and fb.accumulates_with not in {f.fb_id for f in ima.fbs}:
            raise DeadlockError(f"fb {fb.fb_id} accumulates with a block outside IMA {ima.ima}")

    positions = gemm.ops_per_layer
    replicas = parallel or ima.replicas(gemm.fb_id)
    latency = latency or gemm.bits * math.ceil(replicas * gemm.by / hw.adc_samples_per_cycle)
    passes = math.ceil(positions / replicas)
    res_rows = sum(fb.bx for fb in res)
    res_cells = sum(fb.bx * ima.shape(fb.fb_id).ny for fb in res)

    port = _WritePort()
    queues = [_Consumer(st, ima.ima, port, start) for st in consumers]
    first = queues[0] if queues else None
    handoff = 0
    capacity = 1
    need_pass: List[int] = []
    if first:
        st = first.stage
        intake = ima.shape(st.fb.fb_id).ny // st.fb.by
        handoff = (math.ceil(min(replicas, positions) / intake) - 1) * (st.fb.by + int(include_reset))
        granule_bytes = max(1, st.positions_per_granule * st.ops * st.fb.bits // 8)
        capacity = max(1, hw.or_bytes // granule_bytes)
        need_pass = [_last_needed(st, g) // replicas for g in range(st.granules)]

    tasks: List[FbTask] = []
    starts: List[int] = []
    ready: List[int] = []
    stall_bp = stall_handoff = 0
    t = start
    taken = 0
    for k in range(passes):
        while first and taken < len(need_pass) and need_pass[taken] < k:
            first.place(taken, max(ready[need_pass[taken]], extra_ready if first.stage.fb.op_kind == "Softmax" else 0),
                        (gemm.fb_id, need_pass[taken]))
            taken += 1
        if pass_starts is not None:
            s = pass_starts[k]
        else:
            s = t
            if first and taken - capacity >= 0:
                s = max(s, first.takes[taken - capacity])
            stall_bp += s - t
        active = min(replicas, positions - k * replicas)
        tasks.append(FbTask(
            gemm.fb_id, gemm.layer_id, ima.ima, "compute", s, s + latency,
            active * gemm.bx * gemm.by + res_cells, k, None,
            {
                "adc_conversions": gemm.bits * active * gemm.by,
                "sna_ops": gemm.bits * active * gemm.by,
                "dac_drives": gemm.bits * active * (gemm.bx + res_rows),
                "cell_reads": gemm.bits * active * (gemm.bx * gemm.by + res_cells // max(1, replicas)),
                "ir_accesses": active * gemm.bx,
                "or_accesses": active * (gemm.channel_count or 1),
            },
        ))
        starts.append(s)
        stall_handoff += handoff
        ready.append(s + latency + handoff)
        t = s + latency + handoff
    while first and taken < len(need_pass):
        first.place(taken, max(ready[need_pass[taken]], extra_ready if first.stage.fb.op_kind == "Softmax" else 0),
                    (gemm.fb_id, need_pass[taken]))
        taken += 1

    for prev, queue in zip(queues, queues[1:]):
        for g in range(queue.stage.granules):
            item = _last_needed(queue.stage, g)
            if item >= len(prev.done):
                raise DeadlockError(f"fb {queue.stage.fb.fb_id} waits for granule {item} never produced")
            extra = extra_ready if queue.stage.fb.op_kind == "Softmax" else 0
            queue.place(g, max(prev.done[item], extra), (prev.stage.fb.fb_id, item))

    for queue in queues:
        tasks.extend(queue.tasks)
    end = max(task.end for task in tasks)
    return ImaSchedule(tasks=tasks, pass_starts=starts, end=end,
                       handoff_stall=stall_handoff if pass_starts is None else 0,
                       backpressure_stall=stall_bp)


def tensor_bytes(shape, bits: int) -> int:
    return math.ceil(int(np.prod(shape)) * bits / 8)


def movement_cycles(moved: int) -> int:
    return math.ceil(moved / config.EDRAM_BYTES_PER_CYCLE)


def _movement(fb, start: int, moved: int, phase: str) -> FbTask:
    return FbTask(fb.fb_id, fb.layer_id, MOVEMENT_IMA, phase, start, start + movement_cycles(moved),
                  0, None, None, {"movement_bytes": moved})


def _group_input_bytes(imas: List[ImaPlan], graph: ModelGraph) -> int:
    layer = graph.layer(imas[0].fbs[0].layer_id)
    shapes = [graph.input_shape if src == 0 else graph.layer(src).out_shape for src in layer.inputs]
    for fb in {f.layer_id: f for ima in imas for f in ima.fbs if f.op_kind == "Res"}.values():
        shapes.append(graph.layer(graph.layer(fb.layer_id).residual_source).out_shape)
    return sum(tensor_bytes(shape, layer.bits_in) for shape in shapes)


def schedule_group(imas: List[ImaPlan], graph: ModelGraph, hw: HardwareConfig, start: int,
                   include_reset: bool = config.INCLUDE_RESET) -> Tuple[List[FbTask], int, Dict[str, int]]:
    """Schedule the IMAs of one layer group; partitions share one pass timeline"""

    gemms = [ima.fbs[0] for ima in imas]
    replicas = min(ima.replicas(fb.fb_id) for ima, fb in zip(imas, gemms))
    latency = max(fb.bits * math.ceil(replicas * fb.by / hw.adc_samples_per_cycle) for fb in gemms)
    hosts = sorted((ima for ima in imas if ima.part[0] == ima.part[1] - 1), key=lambda i: i.part[2])
    others = [ima for ima in imas if ima.part[0] != ima.part[1] - 1]

    tasks: List[FbTask] = []
    stalls = {"handoff": 0, "backpressure": 0}
    host_starts: Dict[int, List[int]] = {}
    finished = start
    for n, host in enumerate(hosts):
        extra = finished if n == len(hosts) - 1 and len(hosts) > 1 else 0
        sched = schedule_ima(host, graph, hw, start, replicas, latency, extra_ready=extra,
                             include_reset=include_reset)
        tasks.extend(sched.tasks)
        host_starts[host.ima] = sched.pass_starts
        stalls["handoff"] += sched.handoff_stall
        stalls["backpressure"] += sched.backpressure_stall
        if n < len(hosts) - 1:
            finished = max(finished, sched.end)
    for ima in others:
        # a partial-sum array runs each pass no later than any host it feeds
        lo, hi = ima.fbs[0].channels
        feeds = [host_starts[h.ima] for h in hosts if h.fbs[0].channels[0] < hi and lo < h.fbs[0].channels[1]]
        sched = schedule_ima(ima, graph, hw, start, replicas, latency,
                             pass_starts=[min(s) for s in zip(*feeds)], include_reset=include_reset)
        tasks.extend(sched.tasks)
    return tasks, max(task.end for task in tasks), stalls


def schedule_model(plan: MappingPlan, graph: ModelGraph, hw: HardwareConfig,
                   include_reset: bool = config.INCLUDE_RESET) -> PipelineTrace:
    """
    Schedule every layer group of a plan, one after another

    Each group loads its inputs (and residuals) from eDRAM before its first
    pass; the final group writes the model output back.
    """

    tasks: List[FbTask] = []
    stalls = {"handoff": 0, "backpressure": 0, "movement": 0}
    t = 0
    groups = plan.groups()
    for index in sorted(groups):
        imas = groups[index]
        move = _movement(imas[0].fbs[0], t, _group_input_bytes(imas, graph), "load_input")
        tasks.append(move)
        stalls["movement"] += move.end - move.start
        group_tasks, t, group_stalls = schedule_group(imas, graph, hw, move.end, include_reset)
        tasks.extend(group_tasks)
        stalls["handoff"] += group_stalls["handoff"]
        stalls["backpressure"] += group_stalls["backpressure"]

    output = graph.output_layer
    out = _movement(plan.imas[-1].fbs[-1], t, tensor_bytes(output.out_shape, output.bits_in), "write_output")
    tasks.append(out)
    stalls["movement"] += out.end - out.start

    frame = pd.DataFrame([task.as_row() for task in tasks], columns=list(TRACE_COLUMNS))
    frame = frame.sort_values(["start", "ima", "fb_id", "phase", "granule"], kind="mergesort").reset_index(drop=True)
    rows, cols = plan.array
    trace = PipelineTrace(
        tasks=frame, total_cycles=int(frame["end"].max()), array_cells=len(plan.imas) * rows * cols,
        arrays=len(plan.imas), stalls=stalls,
        meta={"model": plan.model_name, "model_hash": plan.model_hash, "mode": "hurry",
              "arrays_by_size": {cols: len(plan.imas)}, "array_rows": {cols: rows}},
    )
    LOGGER.info("Scheduled %s: %d cycles (handoff stall %d, backpressure stall %d)",
                plan.model_name, trace.total_cycles, stalls["handoff"], stalls["backpressure"])
    return trace


def _union(intervals) -> int:
    total, cur_s, cur_e = 0, None, None
    for s, e in sorted(intervals):
        if cur_e is None or s > cur_e:
            if cur_e is not None:
                total += cur_e - cur_s
            cur_s, cur_e = s, e
        else:
            cur_e = max(cur_e, e)
    if cur_e is not None:
        total += cur_e - cur_s
    return total


def _merged(intervals) -> List[Tuple[int, int]]:
    merged: List[List[int]] = []
    for s, e in sorted(intervals):
        if e <= s:
            continue
        if merged and s <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [tuple(m) for m in merged]


def count_cycles(trace: PipelineTrace) -> Dict:
    """
    Per-block and per-layer active cycles plus the overlap fraction

    Returns:
        dict: "fbs" and "layers" DataFrames, "total_cycles", "overlap_fraction"
    """

    tasks = trace.tasks[(trace.tasks["fb_id"] > 0) & (trace.tasks["ima"] != MOVEMENT_IMA)]
    fb_rows, layer_rows = [], []
    diff = np.zeros(trace.total_cycles + 1, dtype=np.int64)
    for fb_id, rows in tasks.groupby("fb_id", sort=True):
        spans = _merged(zip(rows["start"], rows["end"]))
        for s, e in spans:
            diff[s] += 1
            diff[e] -= 1
        phase_cycles = rows.assign(length=rows["end"] - rows["start"]).groupby("phase")["length"].sum()
        fb_rows.append({
            "fb_id": int(fb_id), "layer_id": int(rows["layer_id"].iloc[0]), "ima": int(rows["ima"].iloc[0]),
            "active_cycles": sum(e - s for s, e in spans),
            "first_cycle": int(rows["start"].min()), "last_cycle": int(rows["end"].max()),
            **{f"{phase}_cycles": int(phase_cycles.get(phase, 0)) for phase in PHASES},
        })
    for layer_id, rows in tasks.groupby("layer_id", sort=True):
        layer_rows.append({"layer_id": int(layer_id), "active_cycles": _union(zip(rows["start"], rows["end"]))})

    active = np.cumsum(diff)[: trace.total_cycles]
    busy = int(np.count_nonzero(active >= 1))
    overlap = float(np.count_nonzero(active >= 2) / busy) if busy else 0.0
    return {
        "fbs": pd.DataFrame(fb_rows),
        "layers": pd.DataFrame(layer_rows),
        "total_cycles": trace.total_cycles,
        "overlap_fraction": overlap,
    }


def check_causality(trace: PipelineTrace) -> List[str]:
    """Consumer phases that start before the producer item they depend on is written"""
    problems = []
    tasks = trace.tasks
    compute = tasks[tasks["phase"] == "compute"].set_index(["fb_id", "granule"])["end"]
    for row in tasks[tasks["dep_fb"] > 0].itertuples():
        produced = compute.get((row.dep_fb, row.dep_item))
        if produced is None or row.start < produced:
            problems.append(f"fb {row.fb_id} granule {row.granule} starts at {row.start} before "
                            f"fb {row.dep_fb} item {row.dep_item} is ready")
    return problems
