"""
Functional Inference
Runs a mapped model through the crossbar state machine and checks it against
the integer reference
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Set

import numpy as np
from tqdm import tqdm

import config
from data.hardware import HardwareConfig
from data.model_loader import INPUT_ID, LayerSpec, ModelGraph
from mapping.datamap import map_inputs, map_weights, plan_tournament, replica_grid
from mapping.floorplan import Placement
from mapping.plan import ImaPlan, MappingPlan
from simulator.crossbar import CrossbarState, gemm_bitserial, write_fb
from simulator.logic import run_tournament, softmax_eval
from simulator.pipeline import PipelineTrace, schedule_model
from simulator.reference import im2col, requantize
from utils.errors import OracleMismatchError

LOGGER = logging.getLogger(__name__)


@dataclass
class SimulationResult:
    output: np.ndarray
    values: Dict[int, np.ndarray]
    trace: Optional[PipelineTrace] = None
    diagnostics: Dict[str, int] = field(default_factory=dict)
    # layers computed only inside a fused block, so never materialized
    folded: FrozenSet[int] = frozenset()


def _offset(bits: int) -> int:
    return 1 << (bits - 1)


def _op_region(ima: ImaPlan, fb, slot: int) -> Placement:
    """Region of op instance `slot` inside a block, replicas row-major"""
    _, rep_y = replica_grid(fb, ima.shape(fb.fb_id))
    r0, c0 = ima.placement(fb.fb_id).origin
    i, j = divmod(slot, rep_y)
    return Placement(fb.fb_id, (r0 + i * fb.bx, c0 + j * fb.by), (fb.bx, fb.by))


class _Engine:
    """Crossbar states of every IMA plus the tensors produced so far"""

    def __init__(self, graph: ModelGraph, plan: MappingPlan, hw: HardwareConfig, include_reset: bool):
        self.graph = graph
        self.plan = plan
        self.include_reset = include_reset
        rows, cols = plan.array
        adc_bits = hw.adc_for(min(rows, cols)).bits if min(rows, cols) in hw.adc else hw.adc_bits
        self.states = {ima.ima: CrossbarState(rows, cols, adc_bits=adc_bits) for ima in plan.imas}
        self.values: Dict[int, np.ndarray] = {}
        self.folded: Set[int] = set()
        self.tournaments = 0

    def _tournament(self, ima: ImaPlan, fb, slot: int, elems, mode: str) -> int:
        """Write one op instance's leaves and run its tournament; returns the signed winner"""
        layout = plan_tournament(fb.leaves, fb.bits)
        offset = _offset(fb.bits)
        encoded = [int(e) + offset for e in elems]
        shape = ima.shape(fb.fb_id)
        assignment = map_inputs(fb, shape, encoded, layout=layout, slot=slot)
        region = _op_region(ima, fb, slot)
        (lr, lc), (r0, c0) = ima.placement(fb.fb_id).origin, region.origin
        local = assignment.bits[r0 - lr:r0 - lr + 1, c0 - lc:c0 - lc + layout.leaf_columns]
        state = self.states[ima.ima]
        write_fb(state, Placement(fb.fb_id, region.origin, (1, layout.leaf_columns)), local, self.include_reset)
        result = run_tournament(state, region, layout, mode=mode, signed=True)
        self.tournaments += 1
        return result.winner - offset

    def run_gemm(self, imas: List[ImaPlan], layer: LayerSpec, weights: np.ndarray):
        src = self.values[layer.inputs[0]]
        patches = im2col(src, layer)
        raw = np.zeros((patches.shape[0], layer.out_channels), dtype=np.int64)
        residual = None
        for ima in imas:
            fb = ima.fbs[0]
            state = self.states[ima.ima]
            shape, place = ima.shape(fb.fb_id), ima.placement(fb.fb_id)
            (rlo, rhi), (clo, chi) = fb.rows, fb.channels
            kernel = weights[rlo:rhi, clo:chi]
            write_fb(state, place, map_weights(fb, shape, kernel, layer.bits_w).bits, self.include_reset)

            res = next((f for f in ima.fbs if f.op_kind == "Res"), None)
            res_values = None
            if res is not None:
                res_layer = self.graph.layer(res.layer_id)
                res_place = ima.placement(res.fb_id)
                assignment = map_inputs(res, ima.shape(res.fb_id), [], bits_w=layer.bits_w)
                write_fb(state, res_place, assignment.bits, self.include_reset)
                res_values = self.values[res_layer.residual_source].reshape(layer.out_channels, -1)
                if residual is None:
                    residual = np.zeros_like(raw)
                residual[:, clo:chi] = res_values[clo:chi].T

            replicas = ima.replicas(fb.fb_id)
            for p in range(patches.shape[0]):
                region = _op_region(ima, fb, p % replicas)
                kwargs = {}
                if res is not None:
                    res_place = ima.placement(res.fb_id)
                    kwargs = {
                        "residual_region": Placement(res.fb_id, (res_place.origin[0], region.origin[1]),
                                                     (res.bx, fb.by)),
                        "residual": res_values[clo:chi, p],
                    }
                raw[p, clo:chi] += gemm_bitserial(state, region, patches[p, rlo:rhi], layer.bits_in,
                                                  bits_w=layer.bits_w, signed=True, **kwargs)
        total = raw.T.reshape(layer.out_channels, *layer.out_shape[1:])
        if residual is None:
            self.values[layer.id] = requantize(total, layer.shift, layer.bits_in)
            return
        conv_only = total - residual.T.reshape(total.shape)
        self.values[layer.id] = requantize(conv_only, layer.shift, layer.bits_in)
        for fb in (f for ima in imas for f in ima.fbs if f.op_kind == "Res"):
            self.values[fb.layer_id] = requantize(total, layer.shift, layer.bits_in)

    def run_follower(self, imas: List[ImaPlan], fb_layer: LayerSpec):
        hosts = [(ima, fb) for ima in imas for fb in ima.fbs if fb.layer_id == fb_layer.id]
        first = hosts[0][1]
        fused = self.graph.layer(first.fused_layer_id) if first.fused_layer_id is not None else None
        src_id = fb_layer.inputs[0]
        if fused is not None and fused.id == src_id:
            src_id = fused.inputs[0]
        src = self.values[src_id]

        if fb_layer.kind == "Softmax":
            ima, fb = hosts[0]
            out = softmax_eval(src.reshape(-1), bits=fb.bits, state=self.states[ima.ima],
                               region=_op_region(ima, fb, 0))
            self.tournaments += 1
            self.values[fb_layer.id] = out
            return

        mode = "relu" if fused is not None else "max"
        out = np.empty(fb_layer.out_shape, dtype=np.int64)
        _, oh, ow = fb_layer.out_shape
        for ima, fb in hosts:
            slots = int(np.prod(replica_grid(fb, ima.shape(fb.fb_id))))
            n = 0
            for ch in range(*fb.channels):
                for i in range(oh):
                    for j in range(ow):
                        if fb_layer.kind == "Max":
                            ph, pw, st = fb_layer.window
                            elems = src[ch, i * st:i * st + ph, j * st:j * st + pw].reshape(-1)
                        else:
                            elems = [src[ch, i, j], 0]
                        out[ch, i, j] = self._tournament(ima, fb, n % slots, elems, mode)
                        n += 1
        if fused is None:
            self.values[fb_layer.id] = out
        elif fused.id == fb_layer.inputs[0]:
            # ReLU ahead of the pool is folded into the pool's tournament
            self.folded.add(fused.id)
            self.values[fb_layer.id] = out
        else:
            self.folded.add(fb_layer.id)
            self.values[fused.id] = out


def simulate_inference(graph: ModelGraph, plan: MappingPlan, weights: Dict[int, np.ndarray],
                       x: np.ndarray, hw: HardwareConfig,
                       include_reset: bool = config.INCLUDE_RESET,
                       schedule: bool = True, progress: bool = False) -> SimulationResult:
    """
    Execute one inference on the mapped arrays

    Args:
        graph (ModelGraph): Model
        plan (MappingPlan): Plan built for graph
        weights (dict): Kernel matrix per GEMM layer id
        x (np.ndarray): Input tensor
        hw (HardwareConfig): Hardware the plan targets
        schedule (bool): Also build the cycle trace
        progress (bool): Show a progress bar over layer groups

    Returns:
        SimulationResult: Model output, every layer's tensor, trace
    """

    engine = _Engine(graph, plan, hw, include_reset)
    engine.values[INPUT_ID] = np.asarray(x, dtype=np.int64)
    groups = plan.groups()
    for index in tqdm(sorted(groups), desc="groups", disable=not progress):
        imas = groups[index]
        layer = graph.layer(imas[0].fbs[0].layer_id)
        engine.run_gemm(imas, layer, weights[layer.id])
        seen = set()
        for fb in (f for ima in imas for f in ima.fbs[1:] if f.op_kind != "Res"):
            if fb.layer_id not in seen:
                seen.add(fb.layer_id)
                engine.run_follower(imas, graph.layer(fb.layer_id))

    diagnostics = {
        "adc_saturation": sum(s.diagnostics["adc_saturation"] for s in engine.states.values()),
        "array_cycles": max(s.cycle for s in engine.states.values()),
        "tournaments": engine.tournaments,
    }
    trace = schedule_model(plan, graph, hw, include_reset) if schedule else None
    LOGGER.info("Simulated %s: %d tournaments, %d ADC saturations",
                graph.name, diagnostics["tournaments"], diagnostics["adc_saturation"])
    return SimulationResult(output=engine.values[graph.output_layer.id], values=engine.values,
                            trace=trace, diagnostics=diagnostics, folded=frozenset(engine.folded))


def compare_outputs(graph: ModelGraph, simulated: Dict[int, np.ndarray], reference: Dict[int, np.ndarray],
                    tolerance: float = config.SOFTMAX_TOLERANCE, folded: Iterable[int] = ()) -> List[int]:
    """Layer ids whose simulated tensor differs from the reference; folded layers are skipped"""
    folded = set(folded)
    bad = []
    for layer in graph.layers:
        if layer.id in folded:
            continue
        got, want = simulated.get(layer.id), reference[layer.id]
        if got is None:
            bad.append(layer.id)
        elif layer.kind == "Softmax":
            if not np.allclose(got, want, atol=tolerance):
                bad.append(layer.id)
        elif not np.array_equal(np.asarray(got).reshape(want.shape), want):
            bad.append(layer.id)
    return bad


def verify_outputs(graph: ModelGraph, simulated, reference, tolerance: float = config.SOFTMAX_TOLERANCE,
                   folded: Iterable[int] = ()):
    """Raise OracleMismatchError naming the first differing layer"""
    bad = compare_outputs(graph, simulated, reference, tolerance, folded)
    if bad:
        raise OracleMismatchError(f"simulated output differs from the reference at layers {bad}")
