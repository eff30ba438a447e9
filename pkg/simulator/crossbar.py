"""
Crossbar State Machine
Block activation scheme (third-voltage biasing) and in-array GEMM on 1-bit cells
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

import config
from mapping.datamap import to_bits
from mapping.floorplan import Placement
from utils.errors import CapacityError, VoltageConflictError

LOGGER = logging.getLogger(__name__)

IDLE = -1
GND, V13, V23, VSET, VRESET = range(len(config.VOLTAGE_LEVELS))

WRITE_COLUMN = "write_column"
RESET_REGION = "reset_region"
READ_REGION = "read_region"
LOGIC_STEP = "logic_step"
WRITE_KINDS = (WRITE_COLUMN, RESET_REGION)
OP_KINDS = (WRITE_COLUMN, RESET_REGION, READ_REGION, LOGIC_STEP)


@dataclass(frozen=True)
class LogicStep:
    """One stateful gate evaluated in a single row of a region"""

    row: int
    operands: tuple
    output: int


@dataclass
class BasOp:
    """
    One operation of a cycle

    payload by kind: write_column -> (local column, bit per region row);
    read_region -> input bit per region row; logic_step -> LogicStep;
    reset_region -> None
    """

    kind: str
    region: Placement
    payload: Any = None


@dataclass
class CrossbarState:
    rows: int
    cols: int
    adc_bits: int = 9
    record: bool = False
    gate_cols: int = config.GATE_CELLS
    cells: np.ndarray = field(default=None, repr=False)
    wl_volts: np.ndarray = field(default=None, repr=False)
    bl_volts: np.ndarray = field(default=None, repr=False)
    cycle: int = 0
    diagnostics: Dict[str, int] = field(default_factory=lambda: {"adc_saturation": 0})
    events: List[tuple] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.cells is None:
            self.cells = np.zeros((self.rows, self.width), dtype=np.uint8)
        self.wl_volts = np.full(self.rows, IDLE, dtype=np.int8)
        self.bl_volts = np.full(self.width, IDLE, dtype=np.int8)

    @property
    def width(self) -> int:
        """Mapped columns plus the logic columns to their right"""
        return self.cols + self.gate_cols

    def level_names(self, lines: np.ndarray) -> List[Optional[str]]:
        return [None if v == IDLE else config.VOLTAGE_LEVELS[v] for v in lines]


def _check_bounds(state: CrossbarState, region: Placement):
    if not region.within((state.rows, state.width)):
        raise CapacityError(
            f"region of fb {region.fb_id} at {region.origin} size {region.extent} "
            f"exceeds the {state.rows}x{state.width} array"
        )


class _Demands:
    """Line levels requested by the ops of one cycle"""

    def __init__(self):
        self.wl: Dict[int, int] = {}
        self.bl: Dict[int, int] = {}
        self.wl_owned = set()

    def bitline(self, col: int, level: int, fb_id: int):
        if self.bl.get(col, level) != level:
            raise VoltageConflictError(
                f"bitline {col}: fb {fb_id} needs {config.VOLTAGE_LEVELS[level]}, "
                f"already at {config.VOLTAGE_LEVELS[self.bl[col]]}"
            )
        self.bl[col] = level

    def wordline(self, row: int, level: int, fb_id: int, owner: bool = False):
        if owner:
            self.wl[row] = level
            self.wl_owned.add(row)
            return
        if row in self.wl_owned:
            raise VoltageConflictError(f"wordline {row}: fb {fb_id} reads a row driven by a write")
        if self.wl.get(row, level) != level:
            raise VoltageConflictError(
                f"wordline {row}: fb {fb_id} needs {config.VOLTAGE_LEVELS[level]}, "
                f"already at {config.VOLTAGE_LEVELS[self.wl[row]]}"
            )
        self.wl[row] = level


def _bias(op: BasOp, demands: _Demands):
    region = op.region
    (r0, c0), (nr, nc) = region.origin, region.extent
    fb = region.fb_id
    if op.kind == WRITE_COLUMN:
        col, bits = op.payload
        if not 0 <= col < nc or len(bits) != nr:
            raise CapacityError(f"write of fb {fb} does not match its region")
        for c in range(c0, c0 + nc):
            demands.bitline(c, GND if c == c0 + col else V13, fb)
        for r, bit in enumerate(bits):
            demands.wordline(r0 + r, VSET if bit else V23, fb, owner=True)
    elif op.kind == RESET_REGION:
        for c in range(c0, c0 + nc):
            demands.bitline(c, GND, fb)
        for r in range(r0, r0 + nr):
            demands.wordline(r, VRESET, fb, owner=True)
    elif op.kind == READ_REGION:
        if len(op.payload) != nr:
            raise CapacityError(f"read of fb {fb} drives {len(op.payload)} rows, region has {nr}")
        for c in range(c0, c0 + nc):
            demands.bitline(c, V13, fb)
        for r, bit in enumerate(op.payload):
            demands.wordline(r0 + r, V23 if bit else V13, fb)
    elif op.kind == LOGIC_STEP:
        step = op.payload
        for c in step.operands:
            demands.bitline(c0 + c, V23, fb)
        demands.bitline(c0 + step.output, GND, fb)
    else:
        raise VoltageConflictError(f"unknown operation kind '{op.kind}'")


def apply_cycle(state: CrossbarState, ops: Sequence[BasOp]):
    """
    Execute one clock cycle of concurrent block operations

    Args:
        state (CrossbarState): Array state, updated in place
        ops (list): BasOp on pairwise disjoint regions, at most one write or reset

    Returns:
        tuple: (state, outputs aligned with ops, activated cell count)
    """

    ops = list(ops)
    if not ops:
        return state, [], 0
    if sum(op.kind in WRITE_KINDS for op in ops) > 1:
        raise VoltageConflictError("more than one write-active block in one cycle")
    for i, a in enumerate(ops):
        _check_bounds(state, a.region)
        for b in ops[i + 1:]:
            if a.region.overlaps(b.region):
                raise VoltageConflictError(f"fb {a.region.fb_id} and fb {b.region.fb_id} overlap")

    demands = _Demands()
    for op in sorted(ops, key=lambda o: o.kind not in WRITE_KINDS):
        _bias(op, demands)

    outputs: List[Any] = []
    activated = 0
    for op in ops:
        region = op.region
        rows = slice(region.origin[0], region.row_end)
        cols = slice(region.origin[1], region.col_end)
        activated += region.cells
        if op.kind == WRITE_COLUMN:
            col, bits = op.payload
            state.cells[rows, region.origin[1] + col] = np.asarray(bits, dtype=np.uint8)
            outputs.append(None)
        elif op.kind == RESET_REGION:
            state.cells[rows, cols] = 0
            outputs.append(None)
        elif op.kind == READ_REGION:
            inputs = np.asarray(op.payload, dtype=np.int64)
            outputs.append(inputs @ state.cells[rows, cols].astype(np.int64))
        else:
            step = op.payload
            row = region.origin[0] + step.row
            operands = [state.cells[row, region.origin[1] + c] for c in step.operands]
            result = 0 if any(operands) else 1
            state.cells[row, region.origin[1] + step.output] = result
            outputs.append(result)

    state.wl_volts[:] = IDLE
    state.bl_volts[:] = IDLE
    for r, level in demands.wl.items():
        state.wl_volts[r] = level
    for c, level in demands.bl.items():
        state.bl_volts[c] = level
    if state.record:
        state.events.extend((state.cycle, op.region.fb_id, op.kind, op.region.cells) for op in ops)
    state.cycle += 1
    return state, outputs, activated


def write_fb(state: CrossbarState, region: Placement, bit_matrix,
             include_reset: bool = config.INCLUDE_RESET):
    """
    Program a block column by column

    Returns:
        tuple: (state, cycles) with cycles = columns (+1 reset cycle)
    """

    bit_matrix = np.asarray(bit_matrix, dtype=np.uint8)
    _check_bounds(state, region)
    if bit_matrix.shape != tuple(region.extent):
        raise CapacityError(f"bit matrix {bit_matrix.shape} does not match region {region.extent}")
    cycles = 0
    if include_reset:
        apply_cycle(state, [BasOp(RESET_REGION, region)])
        cycles += 1
    for col in range(region.extent[1]):
        apply_cycle(state, [BasOp(WRITE_COLUMN, region, (col, bit_matrix[:, col]))])
        cycles += 1
    return state, cycles


def read_fb(state: CrossbarState, region: Placement) -> np.ndarray:
    """Stored bits of a region"""
    return state.cells[region.origin[0]:region.row_end, region.origin[1]:region.col_end].copy()


def gemm_bitserial(state: CrossbarState, region: Placement, inputs, bits_in: int,
                   bits_w: int = 1, signed: bool = True,
                   residual_region: Optional[Placement] = None, residual=None) -> np.ndarray:
    """
    Bit-serial matrix-vector product on a weight-stationary region

    Args:
        state (CrossbarState): Array holding the weights
        region (Placement): One kernel replica (rows = fan-in, cols = channels * bits_w)
        inputs (array-like): One integer per region row
        bits_in (int): Input bits streamed LSB first
        bits_w (int): Adjacent columns per weight, MSB leftmost
        signed (bool): Two's-complement inputs and weights
        residual_region (Placement): Rows sharing the region's bitlines
        residual (array-like): Values streamed on residual_region

    Returns:
        np.ndarray: One integer per output channel
    """

    inputs = np.asarray(inputs, dtype=np.int64)
    rows, cols = region.extent
    if inputs.shape != (rows,):
        raise CapacityError(f"fb {region.fb_id}: {inputs.shape[0]} inputs for {rows} rows")
    if cols % bits_w:
        raise CapacityError(f"fb {region.fb_id}: {cols} columns do not hold {bits_w}-bit weights")
    planes = to_bits(inputs, bits_in)
    res_planes = None
    if residual_region is not None:
        if residual_region.origin[1] != region.origin[1] or residual_region.extent[1] != cols:
            raise CapacityError(f"fb {residual_region.fb_id} does not share the bitlines of fb {region.fb_id}")
        res_planes = to_bits(np.asarray(residual, dtype=np.int64), bits_in)

    limit = (1 << state.adc_bits) - 1
    acc = np.zeros(cols, dtype=np.int64)
    for t in range(bits_in):
        plane = bits_in - 1 - t
        ops = [BasOp(READ_REGION, region, planes[:, plane])]
        if res_planes is not None:
            ops.append(BasOp(READ_REGION, residual_region, res_planes[:, plane]))
        _, outputs, _ = apply_cycle(state, ops)
        sums = sum(outputs)
        saturated = int(np.count_nonzero(sums > limit))
        if saturated:
            state.diagnostics["adc_saturation"] += saturated
            LOGGER.warning("fb %d: %d bitline sums exceed the %d-bit ADC range",
                           region.fb_id, saturated, state.adc_bits)
        weight = 1 << t
        acc += (-weight if signed and t == bits_in - 1 else weight) * sums

    col_weights = 1 << np.arange(bits_w - 1, -1, -1, dtype=np.int64)
    if signed:
        col_weights[0] = -col_weights[0]
    return acc.reshape(cols // bits_w, bits_w) @ col_weights
