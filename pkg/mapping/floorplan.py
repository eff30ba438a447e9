"""
Block Floorplanning
Relative positioning with a sequence pair, greedy size balancing and
longest-path packing into the unit array
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import config
from utils.errors import InfeasiblePlanError, InvariantViolation, PlacementOverflowError

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class SequencePair:
    seq1: Tuple[int, ...]
    seq2: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.seq1) != sorted(self.seq2) or len(set(self.seq1)) != len(self.seq1):
            raise InvariantViolation(f"sequence pair {self.seq1} / {self.seq2} is not a permutation pair")

    def left_of(self, i: int, j: int) -> bool:
        """i strictly left of j"""
        return self.seq1.index(i) < self.seq1.index(j) and self.seq2.index(i) < self.seq2.index(j)

    def below(self, i: int, j: int) -> bool:
        """i strictly below j"""
        return self.seq1.index(i) > self.seq1.index(j) and self.seq2.index(i) < self.seq2.index(j)


@dataclass(frozen=True)
class FbShape:
    fb_id: int
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise InvariantViolation(f"fb {self.fb_id}: shape {self.nx}x{self.ny} is empty")


@dataclass(frozen=True)
class Placement:
    fb_id: int
    origin: Tuple[int, int]
    extent: Tuple[int, int]

    @property
    def row_end(self) -> int:
        return self.origin[0] + self.extent[0]

    @property
    def col_end(self) -> int:
        return self.origin[1] + self.extent[1]

    @property
    def cells(self) -> int:
        return self.extent[0] * self.extent[1]

    def overlaps(self, other: "Placement") -> bool:
        return (self.origin[0] < other.row_end and other.origin[0] < self.row_end
                and self.origin[1] < other.col_end and other.origin[1] < self.col_end)

    def within(self, array: Tuple[int, int]) -> bool:
        return self.origin[0] >= 0 and self.origin[1] >= 0 \
            and self.row_end <= array[0] and self.col_end <= array[1]

    def sub(self, row: int, col: int, rows: int, cols: int) -> "Placement":
        """Sub-rectangle in block-local coordinates"""
        return Placement(self.fb_id, (self.origin[0] + row, self.origin[1] + col), (rows, cols))


def position_fbs(fbs: Sequence, canonical: bool = config.ALG1_CANONICAL) -> SequencePair:
    """
    Relative positions of the blocks of one array

    A block that accumulates with an earlier block goes directly below it.
    Any other block is appended to seq1 and inserted in seq2 next to the
    previous rightmost block k: left of k as written (which reads as below k),
    or after k with `canonical` (right of k).
    """

    if not fbs:
        raise InvariantViolation("no blocks to position")
    seq1 = [fbs[0].fb_id]
    seq2 = [fbs[0].fb_id]
    for fb in fbs[1:]:
        k = seq1[-1]
        seq1.append(fb.fb_id)
        partner = fb.accumulates_with
        if partner is not None and partner in seq2:
            seq2.insert(seq2.index(partner), fb.fb_id)
        elif canonical:
            seq2.insert(seq2.index(k) + 1, fb.fb_id)
        else:
            seq2.insert(seq2.index(k), fb.fb_id)
    return SequencePair(tuple(seq1), tuple(seq2))


def _intake(prev_fb, prev_nx: int, prev_ny: int, fb, literal: bool) -> int:
    """Smallest ny for fb that absorbs the predecessor's parallel output"""
    parallel = (prev_nx // prev_fb.bx) * (prev_ny // prev_fb.by)
    need = parallel * (prev_fb.by if literal else fb.by)
    return max(fb.by, -(-need // fb.by) * fb.by)


def _complete(fbs, chosen: Dict[int, Tuple[int, int]], literal: bool):
    """Fill unchosen blocks with their minimal sizes; returns fb_id -> (nx, ny)"""
    sizes = dict(chosen)
    prev = None
    for fb in fbs:
        if fb.accumulates_with is not None:
            continue
        if fb.fb_id not in sizes:
            ny = fb.by if prev is None else _intake(prev, *sizes[prev.fb_id], fb, literal)
            sizes[fb.fb_id] = (fb.bx, ny)
        prev = fb
    for fb in fbs:
        if fb.accumulates_with is not None:
            sizes[fb.fb_id] = (fb.bx, _partner_ny(fb, fbs, sizes))
    return sizes


def _partner_ny(fb, fbs, sizes) -> int:
    by_id = {f.fb_id: f for f in fbs}
    partner = by_id[fb.accumulates_with]
    while partner.accumulates_with is not None:
        partner = by_id[partner.accumulates_with]
    return sizes[partner.fb_id][1]


def _violation(fbs, sizes, array, literal: bool) -> Optional[str]:
    arr_x, arr_y = array
    if sum(sizes[fb.fb_id][0] for fb in fbs) > arr_x:
        return "rows"
    if sum(sizes[fb.fb_id][1] for fb in fbs if fb.accumulates_with is None) > arr_y:
        return "columns"
    prev = None
    for fb in fbs:
        nx, ny = sizes[fb.fb_id]
        if nx % fb.bx or ny % fb.by or nx > arr_x or ny > arr_y:
            return "extent"
        if fb.accumulates_with is not None:
            continue
        if prev is not None:
            pnx, pny = sizes[prev.fb_id]
            parallel = (pnx // prev.bx) * (pny // prev.by)
            intake = ny / (prev.by if literal else fb.by)
            if parallel > intake:
                return "throughput"
        prev = fb
    return None


def check_constraints(fbs, shapes: List[FbShape], array, literal: bool = config.THROUGHPUT_INDEX_LITERAL):
    """Name of the first violated balancing constraint, or None"""
    sizes = {s.fb_id: (s.nx, s.ny) for s in shapes}
    return _violation(fbs, sizes, array, literal)


def balance_sizes(fbs: Sequence, array: Tuple[int, int],
                  literal: bool = config.THROUGHPUT_INDEX_LITERAL) -> List[FbShape]:
    """
    Greedy size balancing of the blocks sharing one array

    Args:
        fbs (list): FbRequirement in chain order
        array (tuple): (arr_x, arr_y)
        literal (bool): Measure successor intake in predecessor op widths

    Returns:
        list: FbShape per block, in input order
    """

    arr_x, arr_y = array
    for fb in fbs:
        if fb.bx > arr_x or fb.by > arr_y:
            raise InfeasiblePlanError("extent", f"fb {fb.fb_id} needs {fb.bx}x{fb.by}, array is {arr_x}x{arr_y}")

    minimal = _complete(fbs, {}, literal)
    problem = _violation(fbs, minimal, array, literal)
    if problem:
        raise InfeasiblePlanError(problem, f"minimum block sizes already violate the {problem} bound")

    chosen: Dict[int, Tuple[int, int]] = {}
    prev = None
    for fb in fbs:
        if fb.accumulates_with is not None:
            continue
        best = None
        for nx in range((arr_x // fb.bx) * fb.bx, 0, -fb.bx):
            if prev is None:
                candidates = range((arr_y // fb.by) * fb.by, 0, -fb.by)
            else:
                candidates = [_intake(prev, *chosen[prev.fb_id], fb, literal)]
            for ny in candidates:
                trial = dict(chosen)
                trial[fb.fb_id] = (nx, ny)
                if _violation(fbs, _complete(fbs, trial, literal), array, literal) is None:
                    best = (nx, ny)
                    break
            if best:
                break
        if best is None:
            raise InfeasiblePlanError("throughput", f"no feasible size for fb {fb.fb_id}")
        chosen[fb.fb_id] = best
        prev = fb

    sizes = _complete(fbs, chosen, literal)
    shapes = [FbShape(fb.fb_id, *sizes[fb.fb_id]) for fb in fbs]
    LOGGER.debug("Balanced sizes: %s", [(s.fb_id, s.nx, s.ny) for s in shapes])
    return shapes


def realize_placement(sp: SequencePair, shapes: List[FbShape], array: Tuple[int, int]) -> List[Placement]:
    """
    Longest-path packing of a sequence pair

    Returns:
        list: Placement per block in seq1 order
    """

    extent = {s.fb_id: (s.nx, s.ny) for s in shapes}
    missing = set(sp.seq1) - set(extent)
    if missing:
        raise InvariantViolation(f"no shape for blocks {sorted(missing)}")
    pos1 = {fb: i for i, fb in enumerate(sp.seq1)}
    pos2 = {fb: i for i, fb in enumerate(sp.seq2)}

    origin: Dict[int, Tuple[int, int]] = {}
    for fb in sp.seq1:
        row = col = 0
        for other, (orow, ocol) in origin.items():
            onx, ony = extent[other]
            if pos2[other] < pos2[fb]:
                col = max(col, ocol + ony)
            elif pos2[other] > pos2[fb]:
                row = max(row, orow + onx)
        origin[fb] = (row, col)

    placements = [Placement(fb, origin[fb], extent[fb]) for fb in sp.seq1]
    for placement in placements:
        if not placement.within(array):
            raise PlacementOverflowError(
                f"fb {placement.fb_id} at {placement.origin} with extent {placement.extent} "
                f"leaves the {array[0]}x{array[1]} array"
            )
    return placements
