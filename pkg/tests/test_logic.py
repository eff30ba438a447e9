import numpy as np
import pytest

from mapping.datamap import plan_tournament, to_bits
from mapping.floorplan import Placement
from simulator.crossbar import CrossbarState
from simulator.logic import (
    ExpLogLut, match_cycles, run_tournament, softmax_cycles, softmax_eval, tournament_cycles,
)
from simulator.reference import softmax
from utils.errors import LayoutMismatchError


def load_leaves(values, bits, signed=False):
    layout = plan_tournament(len(values), bits)
    state = CrossbarState(2, layout.leaf_columns)
    encoded = [v + (1 << (bits - 1)) if signed else v for v in values]
    state.cells[0, :layout.leaf_columns] = to_bits(encoded, bits).reshape(-1)
    return state, Placement(1, (0, 0), (2, layout.leaf_columns)), layout


@pytest.mark.parametrize("a", range(4))
@pytest.mark.parametrize("b", range(4))
def test_every_two_bit_pair(a, b):
    state, region, layout = load_leaves([a, b], 2)
    result = run_tournament(state, region, layout)
    assert result.winner == max(a, b)
    assert result.cycles == 16
    assert result.matches == 1
    assert list(state.cells[1, :2]) == list(to_bits([max(a, b)], 2)[0])


def test_tournament_runs_on_the_array():
    state, region, layout = load_leaves([2, 1], 2)
    state.record = True
    result = run_tournament(state, region, layout)
    assert result.gate_steps == 2 * 11 + 2 + 1 + 2 * 6
    # leaf read, compare, select, then the two winner bits
    assert state.cycle == result.array_cycles == 1 + 30 + 17 + 2
    assert result.activated_cells == 4 + 10 * 6 + result.gate_steps * 6 + 2 * 2
    assert {kind for _, _, kind, _ in state.events} == {"read_region", "write_column", "logic_step"}
    assert list(state.cells[0, :4]) == [1, 0, 0, 1]


def test_cycle_constants():
    assert match_cycles(2) == 11 + 5
    assert match_cycles(8) == 4 * 11 + 5
    assert tournament_cycles(4, 8) == 3 * 49
    assert tournament_cycles(4, 8, relu=True) == 4 * 49
    assert tournament_cycles(1, 8) == 0
    assert softmax_cycles(10, 8) == 9 * 49 + 10


def test_random_eight_bit_tournaments():
    rng = np.random.default_rng(99)
    for _ in range(10000):
        p = int(rng.integers(1, 9))
        values = rng.integers(0, 256, size=p).tolist()
        state, region, layout = load_leaves(values, 8)
        result = run_tournament(state, region, layout)
        assert result.winner == max(values)
        assert result.matches == p - 1


def test_signed_leaves_and_relu():
    state, region, layout = load_leaves([-5, -3, -100], 8, signed=True)
    assert run_tournament(state, region, layout, signed=True).winner - 128 == -3
    state, region, layout = load_leaves([-5, -3, -100], 8, signed=True)
    relu = run_tournament(state, region, layout, mode="relu", signed=True)
    assert relu.winner - 128 == 0
    assert relu.cycles == tournament_cycles(3, 8, relu=True)
    state, region, layout = load_leaves([-5, 7], 8, signed=True)
    assert run_tournament(state, region, layout, mode="relu", signed=True).winner - 128 == 7


def test_internal_row_holds_the_bracket():
    state, region, layout = load_leaves([3, 9, 4, 1, 7], 4)
    run_tournament(state, region, layout)
    stored = [int("".join(map(str, state.cells[1, layout.slot_column(level, i):][:4])), 2)
              for level, count in enumerate(layout.matches_per_level, start=1) for i in range(count)]
    assert stored == [9, 4, 9, 9]


def test_region_too_small_for_layout():
    state, region, layout = load_leaves([1, 2, 3, 4], 4)
    with pytest.raises(LayoutMismatchError):
        run_tournament(state, Placement(1, (0, 0), (2, 8)), layout)
    with pytest.raises(ValueError):
        run_tournament(state, region, layout, mode="min")


def test_softmax_close_to_exact(rng):
    for _ in range(20):
        logits = rng.integers(-128, 128, size=10)
        got = softmax_eval(logits, bits=8)
        np.testing.assert_allclose(got, softmax(logits), atol=1e-2)
    np.testing.assert_allclose(softmax_eval([3]), [1.0], atol=1e-2)


def test_softmax_on_a_shared_array():
    state = CrossbarState(8, 96)
    region = Placement(4, (3, 8), (2, 80))
    logits = np.array([5, -7, 12, 0, 3, 3, -128, 127, 60, 1])
    got = softmax_eval(logits, bits=8, state=state, region=region)
    np.testing.assert_allclose(got, softmax(logits), atol=1e-2)
    assert not state.cells[:3].any()


def test_lut_tables_are_monotone():
    lut = ExpLogLut.fit(-30.0, 10)
    assert lut.exp_x[0] >= -24 - np.log(10) - 1 - 1e-9
    assert np.all(np.diff(lut.exp_y) > 0)
    assert lut.exp(0.0) == pytest.approx(1.0)
    assert lut.log(1.0) == pytest.approx(0.0)
