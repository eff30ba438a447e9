"""
Layer Lowering
Turns a model graph into functional-block requirements grouped per IMA
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from data.hardware import HardwareConfig
from data.model_loader import INPUT_ID, LayerSpec, ModelGraph
from mapping.datamap import plan_tournament
from utils.errors import InfeasiblePlanError, UnsupportedLayerError

LOGGER = logging.getLogger(__name__)

WEIGHT_STATIONARY = "weight"
INPUT_STATIONARY = "input"


@dataclass(frozen=True)
class FbRequirement:
    """
    Size requirement of one functional block

    bx/by is the footprint of a single op instance; ops_per_layer counts the
    instances the block must execute. GEMM blocks of split layers cover the
    fan-in rows in `rows` and the output channels in `channels`.
    """

    fb_id: int
    op_kind: str
    bx: int
    by: int
    ops_per_layer: int
    accumulates_with: Optional[int] = None
    layer_id: int = 0
    fused_layer_id: Optional[int] = None
    group: int = 0
    ima: int = 0
    part: Tuple[int, int, int, int] = (0, 1, 0, 1)
    channels: Tuple[int, int] = (0, 0)
    rows: Tuple[int, int] = (0, 0)
    bits: int = 8
    leaves: int = 1

    def __post_init__(self):
        if self.bx < 1 or self.by < 1 or self.ops_per_layer < 1:
            raise UnsupportedLayerError(
                f"fb {self.fb_id}: sizes must be positive (bx={self.bx}, by={self.by}, "
                f"ops={self.ops_per_layer})"
            )
        if self.accumulates_with is not None and self.op_kind != "Res":
            raise UnsupportedLayerError(f"fb {self.fb_id}: only Res blocks accumulate")

    @property
    def dataflow(self) -> str:
        return WEIGHT_STATIONARY if self.op_kind in ("Conv", "FC") else INPUT_STATIONARY

    @property
    def fused_relu(self) -> bool:
        return self.fused_layer_id is not None

    @property
    def channel_count(self) -> int:
        return self.channels[1] - self.channels[0]

    @property
    def is_host(self) -> bool:
        """True for blocks on the IMA that finishes the layer group"""
        r, rows, _, _ = self.part
        return r == rows - 1


@dataclass
class LayerGroup:
    """A GEMM layer and the layers that run on its arrays"""

    index: int
    gemm: LayerSpec
    followers: List[LayerSpec] = field(default_factory=list)


def build_groups(graph: ModelGraph) -> List[LayerGroup]:
    """
    Assign every layer to the group of its GEMM producer

    Each Conv/FC opens a group; other layers join the group whose last layer
    produces their input.
    """

    groups: List[LayerGroup] = []
    tail_of: Dict[int, LayerGroup] = {}
    group_of: Dict[int, LayerGroup] = {}
    for layer in graph.layers:
        if layer.is_gemm:
            group = LayerGroup(index=len(groups), gemm=layer)
            groups.append(group)
        else:
            producer = layer.inputs[0]
            if producer == INPUT_ID:
                raise UnsupportedLayerError(
                    f"layer {layer.id}: a {layer.kind} layer cannot read the model input directly"
                )
            if producer not in tail_of:
                raise UnsupportedLayerError(
                    f"layer {layer.id}: producer {producer} already feeds another block chain"
                )
            group = tail_of.pop(producer)
            if any(f.kind == "Softmax" for f in group.followers):
                raise UnsupportedLayerError(f"layer {layer.id}: nothing may follow a Softmax")
            if layer.kind == "Res":
                if group.followers or graph.layer(producer).kind != "Conv":
                    raise UnsupportedLayerError(f"layer {layer.id}: Res must directly follow a Conv")
                if group.gemm.bits_w < 2:
                    raise UnsupportedLayerError(f"layer {layer.id}: Res needs bits_w >= 2 on its Conv")
                source_group = group_of.get(layer.residual_source)
                if source_group is not None and source_group.index >= group.index:
                    raise UnsupportedLayerError(
                        f"layer {layer.id}: residual {layer.residual_source} is not ready before the block runs"
                    )
            group.followers.append(layer)
        tail_of[layer.id] = group
        group_of[layer.id] = group
    return groups


def _follower_ops(group: LayerGroup, graph: ModelGraph) -> List[Tuple[LayerSpec, Optional[LayerSpec]]]:
    """Pair each follower with the ReLU fused into it, if any"""

    def only_feeds(layer, partner):
        return [c.id for c in graph.consumers(layer.id)] == [partner.id]

    ops: List[Tuple[LayerSpec, Optional[LayerSpec]]] = []
    followers = group.followers
    used = set()
    for i, layer in enumerate(followers):
        if layer.id in used:
            continue
        if layer.kind == "ReLU":
            nxt = followers[i + 1] if i + 1 < len(followers) else None
            if nxt is not None and nxt.kind == "Max" and only_feeds(layer, nxt):
                ops.append((nxt, layer))
                used.add(nxt.id)
                continue
        if layer.kind == "Max" and i + 1 < len(followers) and followers[i + 1].kind == "ReLU" \
                and only_feeds(layer, followers[i + 1]):
            ops.append((layer, followers[i + 1]))
            used.add(followers[i + 1].id)
            continue
        ops.append((layer, None))
    return ops


def _footprint(layer: LayerSpec, fused: Optional[LayerSpec], channels: int, bits_w: int):
    """(bx, by, leaves) of one op instance of a follower"""

    bits = layer.bits_in
    if layer.kind == "Res":
        return channels, channels * bits_w, 1
    if layer.kind == "Max":
        ph, pw, _ = layer.window
        layout = plan_tournament(ph * pw, bits)
        rows = layout.rows if fused is None else 2
        return rows, layout.leaf_columns, ph * pw
    if layer.kind == "ReLU":
        layout = plan_tournament(2, bits)
        return layout.rows, layout.leaf_columns, 2
    if layer.kind == "Softmax":
        n = int(math.prod(layer.in_shape))
        layout = plan_tournament(n, bits)
        return max(layout.rows, 1), layout.leaf_columns, n
    raise UnsupportedLayerError(f"layer {layer.id}: kind {layer.kind} has no functional block")


def _ops_for(layer: LayerSpec, channels: int) -> int:
    if layer.kind == "Res":
        return layer.positions
    if layer.kind == "Softmax":
        return 1
    return channels * layer.positions


def _split(total: int, parts: int) -> List[Tuple[int, int]]:
    size = math.ceil(total / parts)
    return [(lo, min(total, lo + size)) for lo in range(0, total, size)]


@dataclass(frozen=True)
class Partition:
    """
    Row bands and column ranges of a GEMM layer spread over several IMAs

    The last band hosts the followers, so its arrays hold fewer output
    channels than the other bands.
    """

    bands: Tuple[Tuple[int, int], ...]
    host_cols: Tuple[Tuple[int, int], ...]
    other_cols: Tuple[Tuple[int, int], ...]

    def cols(self, band: int) -> Tuple[Tuple[int, int], ...]:
        return self.host_cols if band == len(self.bands) - 1 else self.other_cols

    @property
    def arrays(self) -> int:
        return (len(self.bands) - 1) * len(self.other_cols) + len(self.host_cols)


def replica_cells(rows: int, cols: int, free_x: int, free_y: int, intake: int = 0) -> int:
    """
    Weight cells the size balancer gives one GEMM block

    Row replicas are maximized first, then column replicas; every replica
    adds `intake` follower columns.
    """

    for rx in range(free_x // rows, 0, -1):
        cy = free_y // (cols + intake * rx)
        if cy:
            return rx * cy * rows * cols
    return 0


def _candidates(fan_in: int, channels: int, bits_w: int, array: Tuple[int, int],
                reserved_x: int, host_channels: int) -> List[Partition]:
    arr_x, arr_y = array
    cap_x = arr_x - reserved_x
    host_cols = tuple(_split(channels, math.ceil(channels / host_channels)))
    other_cols = tuple(_split(channels, math.ceil(channels / (arr_y // bits_w))))
    even = Partition(tuple(_split(fan_in, math.ceil(fan_in / cap_x))), host_cols, host_cols)
    if fan_in <= cap_x:
        return [even]
    bands = math.ceil((fan_in - cap_x) / arr_x)
    top = min(bands * arr_x, fan_in - 1)
    return [
        even,
        # host band as tall as the followers allow
        Partition(tuple(_split(fan_in - cap_x, bands)) + ((fan_in - cap_x, fan_in),), host_cols, other_cols),
        # full bands above, host takes the rest
        Partition(tuple(_split(top, bands)) + ((top, fan_in),), host_cols, other_cols),
    ]


def choose_partition(gemm: LayerSpec, array: Tuple[int, int], reserved_x: int, reserved_y: int,
                     max_arrays: int) -> Partition:
    """
    Partition with the highest expected spatial utilization

    Args:
        gemm (LayerSpec): Conv or FC layer
        array (tuple): (arr_x, arr_y)
        reserved_x (int): Rows the followers need on a host array
        reserved_y (int): Columns the followers need per GEMM replica
        max_arrays (int): IMAs on the chip

    Returns:
        Partition: Ties go to fewer arrays, then to the even split
    """

    arr_x, arr_y = array
    host_channels = (arr_y - reserved_y) // gemm.bits_w
    options = _candidates(gemm.fan_in, gemm.out_channels, gemm.bits_w, array, reserved_x, host_channels)
    feasible = [p for p in options if p.arrays <= max_arrays]
    if not feasible:
        least = min(p.arrays for p in options)
        raise InfeasiblePlanError("imas", f"layer {gemm.id} needs {least} IMAs, chip has {max_arrays}")

    def score(option: Partition) -> float:
        cells = 0
        for b, (lo, hi) in enumerate(option.bands):
            host = b == len(option.bands) - 1
            for clo, chi in option.cols(b):
                cells += replica_cells(hi - lo, (chi - clo) * gemm.bits_w,
                                       arr_x - reserved_x if host else arr_x, arr_y,
                                       reserved_y if host else 0)
        return cells / (option.arrays * arr_x * arr_y)

    ranked = sorted(enumerate(feasible), key=lambda item: (-score(item[1]), item[1].arrays, item[0]))
    return ranked[0][1]


def lower_to_fbs(graph: ModelGraph, hw: HardwareConfig) -> List[FbRequirement]:
    """
    Lower a model graph to functional-block requirements

    Args:
        graph (ModelGraph): Validated model
        hw (HardwareConfig): Target hardware (array size, IMA count)

    Returns:
        list: FbRequirement per block, ordered by IMA then chain position
    """

    arr_x, arr_y = hw.array
    fbs: List[FbRequirement] = []
    ima = 0
    for group in build_groups(graph):
        gemm = group.gemm
        ops = _follower_ops(group, graph)
        kinds = {layer.kind for layer, _ in ops}

        # Columns left for GEMM weights once the non-accumulating followers are reserved
        reserved_y = sum(_footprint(l, f, 1, gemm.bits_w)[1] for l, f in ops if l.kind != "Res")
        cap_y = arr_y - reserved_y
        if cap_y < gemm.bits_w:
            raise InfeasiblePlanError(
                "columns", f"group of layer {gemm.id} needs {reserved_y + gemm.bits_w} columns, array has {arr_y}"
            )
        per_part = math.ceil(gemm.out_channels / math.ceil(gemm.out_channels / (cap_y // gemm.bits_w)))

        reserved_x = sum(_footprint(l, f, per_part, gemm.bits_w)[0] for l, f in ops)
        if arr_x - reserved_x < 1:
            raise InfeasiblePlanError(
                "rows", f"group of layer {gemm.id} needs {reserved_x + 1} rows, array has {arr_x}"
            )
        split = choose_partition(gemm, hw.array, reserved_x, reserved_y, hw.total_imas)
        if split.arrays > 1:
            LOGGER.debug("Layer %d split into %d row bands over %d IMAs", gemm.id, len(split.bands), split.arrays)

        for r, rows in enumerate(split.bands):
            col_ranges = split.cols(r)
            for c, chans in enumerate(col_ranges):
                part = (r, len(split.bands), c, len(col_ranges))
                width = chans[1] - chans[0]
                gemm_fb = FbRequirement(
                    fb_id=len(fbs) + 1, op_kind=gemm.kind,
                    bx=rows[1] - rows[0], by=width * gemm.bits_w,
                    ops_per_layer=gemm.positions, layer_id=gemm.id, group=group.index,
                    ima=ima, part=part, channels=chans, rows=rows, bits=gemm.bits_in,
                )
                fbs.append(gemm_fb)
                if r == len(split.bands) - 1:
                    for layer, fused in ops:
                        if layer.kind == "Softmax" and c != len(col_ranges) - 1:
                            continue
                        span = (0, gemm.out_channels) if layer.kind == "Softmax" else chans
                        count = span[1] - span[0]
                        bx, by, leaves = _footprint(layer, fused, count, gemm.bits_w)
                        fbs.append(FbRequirement(
                            fb_id=len(fbs) + 1, op_kind=layer.kind, bx=bx, by=by,
                            ops_per_layer=_ops_for(layer, count),
                            accumulates_with=gemm_fb.fb_id if layer.kind == "Res" else None,
                            layer_id=layer.id, fused_layer_id=fused.id if fused else None,
                            group=group.index, ima=ima, part=part, channels=span,
                            bits=layer.bits_in, leaves=leaves,
                        ))
                ima += 1
        LOGGER.debug("Group %d (layer %d): followers %s", group.index, gemm.id, sorted(kinds))

    LOGGER.info("Lowered %s to %d functional blocks on %d IMAs", graph.name, len(fbs), ima)
    return fbs


def fbs_by_ima(fbs: List[FbRequirement]) -> Dict[int, List[FbRequirement]]:
    """Blocks of each IMA in chain order"""
    per_ima: Dict[int, List[FbRequirement]] = {}
    for fb in fbs:
        per_ima.setdefault(fb.ima, []).append(fb)
    return per_ima


def cell_demand(fbs: List[FbRequirement]) -> int:
    """Cells needed when every op instance gets its own footprint"""
    return sum(fb.ops_per_layer * fb.bx * fb.by for fb in fbs)
