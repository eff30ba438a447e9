"""
Intra-Block Data Layout
Weight-stationary kernel tiling for GEMM blocks and input-stationary
tournament layouts for Max/ReLU/Res/Softmax blocks
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from utils.errors import CapacityError, LayoutMismatchError

# Role codes stored per cell
ROLE_UNUSED = 0
ROLE_WEIGHT = 1
ROLE_INPUT = 2
ROLE_SLOT = 3

ROLE_NAMES = {
    ROLE_UNUSED: "unused",
    ROLE_WEIGHT: "weight_bit",
    ROLE_INPUT: "input_bit",
    ROLE_SLOT: "tournament_slot",
}


@dataclass(frozen=True)
class TournamentLayout:
    """
    Tree-shaped tournament of p leaves of b bits

    Level 0 is the leaf row. Level l holds ceil(p / 2**l) contenders, byes
    included; only match winners are stored, in the internal row.
    """

    p: int
    b: int
    levels: int
    leaf_columns: int
    slots: Tuple[int, ...]

    @property
    def matches_per_level(self) -> Tuple[int, ...]:
        return tuple(n // 2 for n in self.slots[:-1])

    @property
    def matches(self) -> int:
        return self.p - 1

    @property
    def internal_slots(self) -> int:
        return sum(self.matches_per_level)

    @property
    def rows(self) -> int:
        return 1 if self.p == 1 else 2

    @property
    def mapped_cells(self) -> int:
        return (self.p + self.internal_slots) * self.b

    def slot_column(self, level: int, index: int) -> int:
        """First column of a stored slot; leaves at level 0, winners above"""
        if level == 0:
            return index * self.b
        offset = sum(self.matches_per_level[: level - 1])
        return (offset + index) * self.b


def plan_tournament(p: int, b: int) -> TournamentLayout:
    """Layout of a p-element tournament over b-bit elements"""

    if p < 1 or b < 1:
        raise ValueError(f"tournament needs p >= 1 and b >= 1, got p={p}, b={b}")
    levels = math.ceil(math.log2(p)) if p > 1 else 0
    slots = tuple(math.ceil(p / 2 ** level) for level in range(levels + 1))
    return TournamentLayout(p=p, b=b, levels=levels, leaf_columns=p * b, slots=slots)


@dataclass
class CellAssignment:
    """Role and stored bit of every cell of one block's rectangle"""

    fb_id: int
    origin: Tuple[int, int]
    extent: Tuple[int, int]
    dataflow: str
    roles: np.ndarray
    bits: np.ndarray
    op_shape: Tuple[int, int] = (1, 1)
    bits_per_value: int = 1

    @property
    def mapped_cells(self) -> int:
        return int(np.count_nonzero(self.roles))

    def cells(self):
        """Absolute (row, col) of every mapped cell"""
        rows, cols = np.nonzero(self.roles)
        return rows + self.origin[0], cols + self.origin[1]

    def role_at(self, row: int, col: int):
        """
        Decode the role of a cell given in block-local coordinates

        Returns:
            tuple: ("weight_bit", replica, fan_in_row, channel, bit),
                   ("input_bit", elem, bit), ("tournament_slot", level, index, bit)
                   or ("unused",)
        """

        code = int(self.roles[row, col])
        bx, by = self.op_shape
        replica = (row // bx) * (self.extent[1] // by) + col // by
        r, c = row % bx, col % by
        b = self.bits_per_value
        if code == ROLE_WEIGHT:
            return ("weight_bit", replica, r, c // b, c % b)
        if code == ROLE_INPUT:
            return ("input_bit", c // b, c % b)
        if code == ROLE_SLOT:
            return ("tournament_slot", 1 if r else 0, c // b, c % b)
        return ("unused",)


def to_bits(values, bits: int) -> np.ndarray:
    """Two's-complement bit matrix, MSB in column 0"""
    values = np.asarray(values, dtype=np.int64) & ((1 << bits) - 1)
    shifts = np.arange(bits - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def from_bits(bit_matrix, signed: bool = True) -> np.ndarray:
    """Inverse of to_bits over the last axis"""
    bit_matrix = np.asarray(bit_matrix, dtype=np.int64)
    bits = bit_matrix.shape[-1]
    weights = 1 << np.arange(bits - 1, -1, -1, dtype=np.int64)
    values = (bit_matrix * weights).sum(axis=-1)
    if signed:
        values = np.where(values >= 1 << (bits - 1), values - (1 << bits), values)
    return values


def _blank(extent):
    return np.zeros(extent, dtype=np.int8), np.zeros(extent, dtype=np.uint8)


def replica_grid(fb, shape) -> Tuple[int, int]:
    """Row and column replica counts of a block sized (nx, ny)"""
    return shape.nx // fb.bx, shape.ny // fb.by


def map_weights(fb, shape, kernel, bits_w: int, origin=(0, 0)) -> CellAssignment:
    """
    Tile a kernel matrix over a weight-stationary block

    Args:
        fb: FbRequirement of a Conv/FC block
        shape: FbShape (nx, ny) assigned by balancing
        kernel (np.ndarray): Integer weights, shape (bx, by / bits_w)
        bits_w (int): Weight bit width

    Returns:
        CellAssignment: Replicas row-major, bits MSB leftmost
    """

    kernel = np.asarray(kernel)
    if fb.dataflow != "weight":
        raise LayoutMismatchError(f"fb {fb.fb_id} is not weight-stationary")
    if kernel.ndim != 2 or kernel.shape[0] != fb.bx or kernel.shape[1] * bits_w != fb.by:
        raise CapacityError(
            f"fb {fb.fb_id}: kernel {kernel.shape} does not match requirement {fb.bx}x{fb.by}"
        )
    extent = (shape.nx, shape.ny)
    roles, cells = _blank(extent)
    tile = to_bits(kernel, bits_w).reshape(fb.bx, fb.by)
    rep_x, rep_y = replica_grid(fb, shape)
    for i in range(rep_x):
        for j in range(rep_y):
            window = (slice(i * fb.bx, (i + 1) * fb.bx), slice(j * fb.by, (j + 1) * fb.by))
            cells[window] = tile
            roles[window] = ROLE_WEIGHT
    return CellAssignment(fb.fb_id, tuple(origin), extent, "weight", roles, cells,
                          op_shape=(fb.bx, fb.by), bits_per_value=bits_w)


def read_weights(assignment: CellAssignment, replica: int = 0) -> np.ndarray:
    """Recover the kernel matrix stored in one replica"""
    bx, by = assignment.op_shape
    per_row = assignment.extent[1] // by
    i, j = divmod(replica, per_row)
    tile = assignment.bits[i * bx:(i + 1) * bx, j * by:(j + 1) * by]
    b = assignment.bits_per_value
    return from_bits(tile.reshape(bx, by // b, b))


def map_inputs(fb, shape, elems, layout: Optional[TournamentLayout] = None,
               slot: int = 0, origin=(0, 0), bits_w: int = 8) -> CellAssignment:
    """
    Place elements into an input-stationary block

    Tournament blocks get the b-bit patterns of elems in the leaf row of op
    slot `slot`. Res blocks get one row per residual channel with a 1 at the
    channel's least-significant weight column of every column replica.
    """

    if fb.dataflow != "input":
        raise LayoutMismatchError(f"fb {fb.fb_id} is not input-stationary")
    extent = (shape.nx, shape.ny)
    roles, cells = _blank(extent)
    elems = [int(e) for e in elems]

    if fb.op_kind == "Res":
        channels = fb.bx
        if len(elems) > channels:
            raise CapacityError(f"fb {fb.fb_id}: {len(elems)} residuals, {channels} rows")
        for j in range(shape.ny // fb.by):
            for ch in range(channels):
                col = j * fb.by + ch * bits_w + bits_w - 1
                roles[ch, j * fb.by:(j + 1) * fb.by] = ROLE_INPUT
                cells[ch, col] = 1
        return CellAssignment(fb.fb_id, tuple(origin), extent, "input", roles, cells,
                              op_shape=(fb.bx, fb.by), bits_per_value=bits_w)

    layout = layout or plan_tournament(fb.leaves, fb.bits)
    if layout.leaf_columns > fb.by or layout.rows > fb.bx:
        raise LayoutMismatchError(f"fb {fb.fb_id}: layout does not fit {fb.bx}x{fb.by}")
    if len(elems) > layout.p:
        raise CapacityError(f"fb {fb.fb_id}: {len(elems)} elements for {layout.p} leaves")
    if any(e < 0 or e >= 1 << layout.b for e in elems):
        raise CapacityError(f"fb {fb.fb_id}: element outside the {layout.b}-bit range")
    rep_x, rep_y = replica_grid(fb, shape)
    if slot >= rep_x * rep_y:
        raise CapacityError(f"fb {fb.fb_id}: op slot {slot} beyond {rep_x * rep_y} slots")
    row0, col0 = (slot // rep_y) * fb.bx, (slot % rep_y) * fb.by
    if elems:
        cells[row0, col0:col0 + len(elems) * layout.b] = to_bits(elems, layout.b).reshape(-1)
    _mark_tournament(roles, row0, col0, layout)
    return CellAssignment(fb.fb_id, tuple(origin), extent, "input", roles, cells,
                          op_shape=(fb.bx, fb.by), bits_per_value=layout.b)


def _mark_tournament(roles, row0, col0, layout):
    roles[row0, col0:col0 + layout.leaf_columns] = ROLE_INPUT
    if layout.internal_slots:
        roles[row0 + 1, col0:col0 + layout.internal_slots * layout.b] = ROLE_SLOT


def tournament_assignment(fb, shape, origin=(0, 0)) -> CellAssignment:
    """Roles of a tournament block with every op slot populated"""
    extent = (shape.nx, shape.ny)
    roles, cells = _blank(extent)
    layout = plan_tournament(fb.leaves, fb.bits)
    rep_x, rep_y = replica_grid(fb, shape)
    for slot in range(rep_x * rep_y):
        _mark_tournament(roles, (slot // rep_y) * fb.bx, (slot % rep_y) * fb.by, layout)
    if fb.fused_relu:
        # zero operand shares the spare tail of the first internal row
        start = layout.internal_slots * layout.b
        roles[1, start:start + layout.b] = ROLE_SLOT
    return CellAssignment(fb.fb_id, tuple(origin), extent, "input", roles, cells,
                          op_shape=(fb.bx, fb.by), bits_per_value=layout.b)


def mapped_cells(fb, shape) -> int:
    """Data-mapped cells of a block at its balanced size"""
    rep_x, rep_y = replica_grid(fb, shape)
    replicas = rep_x * rep_y
    if fb.dataflow == "weight" or fb.op_kind == "Res":
        return replicas * fb.bx * fb.by
    layout = plan_tournament(fb.leaves, fb.bits)
    return replicas * layout.mapped_cells + (layout.b if fb.fused_relu else 0)
