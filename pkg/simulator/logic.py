"""
In-Array Logic
Compare/select tournaments built from stateful NOR steps, and the softmax
evaluated with a tournament max plus exp/log look-up tables
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

import config
from mapping.datamap import TournamentLayout, from_bits, plan_tournament, to_bits
from mapping.floorplan import Placement
from simulator.crossbar import (
    LOGIC_STEP, READ_REGION, WRITE_COLUMN, BasOp, CrossbarState, LogicStep, apply_cycle, write_fb,
)
from utils.errors import LayoutMismatchError

MODES = ("max", "relu", "softmax_max")


def cmp_cycles(bits: int) -> int:
    return math.ceil(bits / 2) * config.CMP_CYCLES_PER_2BITS


def sel_cycles(bits: int) -> int:
    return config.SEL_CYCLES


def match_cycles(bits: int) -> int:
    return cmp_cycles(bits) + sel_cycles(bits)


def tournament_cycles(p: int, bits: int, relu: bool = False) -> int:
    """Cycles of a p-leaf tournament, with one extra match against zero for ReLU"""
    return (p - 1 + int(relu)) * match_cycles(bits)


@dataclass
class TournamentResult:
    winner: int
    cycles: int
    matches: int
    gate_steps: int
    elements: Optional[List[int]] = None
    array_cycles: int = 0
    activated_cells: int = 0


GT, EQ, A, B, T, U = range(6)


class _LogicRow:
    """
    Controller of one tournament; every step is one apply_cycle on the array

    Gates are stateful NORs in one row of the logic columns, so operands and
    outputs share a wordline.
    """

    def __init__(self, state: CrossbarState, region: Placement, row: int):
        if state.gate_cols < config.GATE_CELLS:
            raise LayoutMismatchError(f"fb {region.fb_id}: array has {state.gate_cols} logic columns")
        self.state = state
        self.region = region
        self.gates = Placement(region.fb_id, (region.origin[0] + row, state.cols), (1, config.GATE_CELLS))
        self.steps = 0
        self.activated = 0

    def _run(self, op: BasOp):
        _, outputs, activated = apply_cycle(self.state, [op])
        self.activated += activated
        return outputs[0]

    def read(self, row: int, col: int, width: int) -> np.ndarray:
        bits = self._run(BasOp(READ_REGION, self.region.sub(row, col, 1, width), [1]))
        return bits.astype(np.uint8)

    def store(self, row: int, col: int, bits):
        place = self.region.sub(row, col, 1, len(bits))
        for i, bit in enumerate(bits):
            self._run(BasOp(WRITE_COLUMN, place, (i, [int(bit)])))

    def set(self, cell: int, bit: int):
        self._run(BasOp(WRITE_COLUMN, self.gates, (cell, [int(bit)])))

    def nor(self, out: int, *cells: int) -> int:
        self.steps += 1
        return self._run(BasOp(LOGIC_STEP, self.gates, LogicStep(0, cells, out)))

    def compare(self, a, b) -> int:
        """Leaves a >= b in GT, scanning MSB first"""
        self.set(GT, 0)
        self.set(EQ, 1)
        for ai, bi in zip(a, b):
            self.set(A, ai)
            self.set(B, bi)
            self.nor(T, A)
            self.nor(U, T, B)  # a and not b
            self.nor(T, B)
            self.nor(B, A, T)  # b and not a
            self.nor(A, U, B)  # bits equal
            self.nor(T, EQ)
            self.nor(B, U)
            self.nor(U, T, B)
            self.nor(B, GT, U)
            self.nor(GT, B)
            self.nor(B, A)
            self.nor(EQ, T, B)
        self.nor(A, GT, EQ)
        return self.nor(GT, A)

    def select(self, a, b) -> np.ndarray:
        """Bits of a where the GT flag is set, of b otherwise"""
        self.nor(EQ, GT)
        out = []
        for ai, bi in zip(a, b):
            self.set(A, ai)
            self.set(B, bi)
            self.nor(T, A)
            self.nor(U, EQ, T)  # flag and a
            self.nor(T, B)
            self.nor(A, GT, T)  # b without flag
            self.nor(B, U, A)
            out.append(self.nor(T, B))
        return np.array(out, dtype=np.uint8)

    def match(self, a, b) -> np.ndarray:
        self.compare(a, b)
        return self.select(a, b)


def run_tournament(state: CrossbarState, region: Placement, layout: TournamentLayout,
                   mode: str = "max", signed: bool = False) -> TournamentResult:
    """
    Compare/select tournament over the leaves stored in an op region

    Args:
        state (CrossbarState): Array holding the leaves
        region (Placement): Op instance region (leaf row, then internal row)
        layout (TournamentLayout): Layout the leaves were mapped with
        mode (str): "max", "relu" (extra match against zero) or "softmax_max"
        signed (bool): Leaves are offset-binary; zero is then 2**(b-1)

    Returns:
        TournamentResult: Winning pattern (unsigned), modeled cycle cost and
        the array cycles the gate program took
    """

    if mode not in MODES:
        raise ValueError(f"unknown tournament mode '{mode}'")
    rows, cols = region.extent
    if cols < layout.leaf_columns or rows < layout.rows:
        raise LayoutMismatchError(
            f"fb {region.fb_id}: region {rows}x{cols} cannot hold a {layout.p}x{layout.b} tournament"
        )
    b = layout.b
    start = state.cycle
    logic = _LogicRow(state, region, rows - 1)
    leaves = logic.read(0, 0, layout.leaf_columns).reshape(layout.p, b)

    contenders = list(leaves)
    level = 0
    while len(contenders) > 1:
        level += 1
        advancing = []
        for m in range(len(contenders) // 2):
            winner = logic.match(contenders[2 * m], contenders[2 * m + 1])
            logic.store(1, layout.slot_column(level, m), winner)
            advancing.append(winner)
        if len(contenders) % 2:
            advancing.append(contenders[-1])
        contenders = advancing
    if level != layout.levels:
        raise LayoutMismatchError(f"fb {region.fb_id}: tournament ran {level} levels, layout has {layout.levels}")

    best = contenders[0]
    matches = layout.matches
    if mode == "relu":
        zero = to_bits([1 << (b - 1) if signed else 0], b)[0]
        best = logic.match(best, zero)
        matches += 1

    winner = int(from_bits(best, signed=False))
    elements = [int(v) for v in from_bits(leaves, signed=False)] if mode == "softmax_max" else None
    return TournamentResult(winner=winner, cycles=matches * match_cycles(b), matches=matches,
                            gate_steps=logic.steps, elements=elements,
                            array_cycles=state.cycle - start, activated_cells=logic.activated)


@dataclass
class ExpLogLut:
    """Piecewise-linear exp and log tables fitted to one layer's range"""

    exp_x: np.ndarray
    exp_y: np.ndarray
    log_x: np.ndarray
    log_y: np.ndarray

    @classmethod
    def fit(cls, lowest: float, classes: int, entries: int = config.LUT_ENTRIES) -> "ExpLogLut":
        low = max(min(lowest, -1.0), -config.LUT_EXP_FLOOR) - math.log(max(classes, 1)) - 1.0
        exp_x = np.linspace(low, 0.0, entries)
        log_x = np.linspace(1.0, float(max(classes, 2)), entries)
        return cls(exp_x, np.exp(exp_x), log_x, np.log(log_x))

    def exp(self, x):
        return np.interp(x, self.exp_x, self.exp_y)

    def log(self, x):
        return np.interp(x, self.log_x, self.log_y)


def softmax_eval(elems, scale: float = 1.0, bits: Optional[int] = None,
                 state: Optional[CrossbarState] = None, region: Optional[Placement] = None,
                 lut: Optional[ExpLogLut] = None) -> np.ndarray:
    """
    Softmax as exp(x_i - x_max - log sum_j exp(x_j - x_max))

    Args:
        elems (array-like): Integer logits
        scale (float): Real value of one integer step
        bits (int): Signed element width; fitted to the data when None
        state, region: Array and op region to run the max tournament in

    Returns:
        np.ndarray: Probabilities
    """

    elems = np.asarray(elems, dtype=np.int64)
    if elems.size == 0:
        raise ValueError("softmax needs at least one element")
    if bits is None:
        bits = max(2, int(np.abs(elems).max()).bit_length() + 1)
    layout = plan_tournament(elems.size, bits)
    if state is None:
        state = CrossbarState(layout.rows + 1, layout.leaf_columns)
        region = Placement(0, (0, 0), (layout.rows + 1, layout.leaf_columns))
    offset = 1 << (bits - 1)
    leaf = Placement(region.fb_id, region.origin, (1, layout.leaf_columns))
    write_fb(state, leaf, to_bits(elems + offset, bits).reshape(1, -1))
    result = run_tournament(state, region, layout, mode="softmax_max", signed=True)
    x_max = result.winner - offset

    shifted = (elems - x_max).astype(np.float64) * scale
    lut = lut or ExpLogLut.fit(float(shifted.min()), elems.size)
    log_sum = lut.log(lut.exp(shifted).sum())
    return lut.exp(shifted - log_sum)


def softmax_cycles(classes: int, bits: int) -> int:
    """Tournament plus one LUT lookup per class"""
    return tournament_cycles(classes, bits) + classes * config.SOFTMAX_LUT_CYCLES_PER_CLASS
