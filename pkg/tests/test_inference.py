import numpy as np
import pytest

from conftest import make_model
from data.lowering import lower_to_fbs
from mapping.plan import build_plan
from simulator.inference import compare_outputs, simulate_inference, verify_outputs
from simulator.reference import random_input, random_weights, reference_inference
from utils.errors import OracleMismatchError


def run_both(graph, hw, weights, x):
    plan = build_plan(graph, hw)
    result = simulate_inference(graph, plan, weights, x, hw, schedule=False)
    _, expected = reference_inference(graph, weights, x)
    return result, expected


def test_three_by_three_conv_matches_reference(hw, rng):
    graph = make_model([1, 5, 5], [{"id": 1, "kind": "Conv", "kernel": [2, 3, 3, 1, 0]}])
    weights = random_weights(graph, rng)
    x = random_input(graph, rng)
    result, expected = run_both(graph, hw, weights, x)
    assert result.output.shape == (2, 3, 3)
    np.testing.assert_array_equal(result.output, expected[1])
    assert result.diagnostics["adc_saturation"] == 0


def test_relu_of_negative_activations_is_zero(hw):
    graph = make_model([1, 2, 2], [
        {"id": 1, "kind": "Conv", "kernel": [3, 1, 1, 1, 0]},
        {"id": 2, "kind": "ReLU"},
    ])
    weights = {1: np.full((1, 3), 5, dtype=np.int64)}
    x = np.full((1, 2, 2), -100, dtype=np.int64)
    result, expected = run_both(graph, hw, weights, x)
    assert (result.values[1] < 0).all()
    assert not result.output.any()
    assert compare_outputs(graph, result.values, expected) == []


@pytest.mark.parametrize("name", ["lenet", "resnet_toy"])
def test_toy_models_match_reference(name, request, hw, rng):
    graph = request.getfixturevalue(name)
    weights = random_weights(graph, rng)
    x = random_input(graph, rng)
    plan = build_plan(graph, hw)
    result = simulate_inference(graph, plan, weights, x, hw)
    _, expected = reference_inference(graph, weights, x)
    assert compare_outputs(graph, result.values, expected, folded=result.folded) == []
    assert result.output.sum() == pytest.approx(1.0, abs=1e-2)
    assert result.trace is not None and result.trace.total_cycles > 0
    assert result.diagnostics["tournaments"] > 0


def random_cnn(rng):
    """Conv stages with optional ReLU, pooling and residual blocks, closed by an FC head"""
    start = int(rng.choice([4, 6, 8]))
    side = start
    layers = []

    def add(kind, **fields):
        layers.append({"id": len(layers) + 1, "kind": kind, **fields})
        return len(layers)

    for _ in range(int(rng.integers(1, 3))):
        channels = int(rng.integers(2, 5))
        add("Conv", kernel=[channels, 3, 3, 1, 1], bits_w=int(rng.integers(2, 9)))
        if rng.random() < 0.5 and side % 2 == 0:
            # ReLU and pool fuse in either order
            order = ["ReLU", "Max"] if rng.random() < 0.5 else ["Max", "ReLU"]
            for kind in order:
                add(kind, **({"window": [2, 2, 2]} if kind == "Max" else {}))
            side //= 2
        else:
            add("ReLU")
        if rng.random() < 0.4:
            source = len(layers)
            add("Conv", kernel=[channels, 3, 3, 1, 1], bits_w=int(rng.integers(2, 9)))
            add("ReLU")
            add("Conv", kernel=[channels, 3, 3, 1, 1], bits_w=int(rng.integers(2, 9)))
            add("Res", residual_source=source)
            add("ReLU")
    add("FC", kernel=[int(rng.integers(2, 11))])
    if rng.random() < 0.5:
        add("Softmax")
    return make_model([int(rng.integers(1, 4)), start, start], layers)


def test_random_cnns_match_reference(hw):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        graph = random_cnn(rng)
        weights = random_weights(graph, rng)
        x = random_input(graph, rng)
        result, expected = run_both(graph, hw, weights, x)
        assert compare_outputs(graph, result.values, expected, folded=result.folded) == [], graph.name


def test_tampered_values_are_reported(lenet, hw, rng):
    weights = random_weights(lenet, rng)
    x = random_input(lenet, rng)
    result, expected = run_both(lenet, hw, weights, x)
    verify_outputs(lenet, result.values, expected, folded=result.folded)
    tampered = dict(result.values)
    tampered[4] = tampered[4] + 1
    assert compare_outputs(lenet, tampered, expected, folded=result.folded) == [4]
    with pytest.raises(OracleMismatchError):
        verify_outputs(lenet, tampered, expected, folded=result.folded)


def test_fused_relu_is_never_materialized(lenet, hw, rng):
    weights = random_weights(lenet, rng)
    x = random_input(lenet, rng)
    result, expected = run_both(lenet, hw, weights, x)
    assert result.folded == {2}
    assert 2 not in result.values
    assert compare_outputs(lenet, result.values, expected) == [2]


def test_pool_feeding_a_residual_stays_unfused(hw, rng):
    graph = make_model([1, 4, 4], [
        {"id": 1, "kind": "Conv", "kernel": [2, 3, 3, 1, 1]},
        {"id": 2, "kind": "Max", "window": [2, 2, 2]},
        {"id": 3, "kind": "ReLU"},
        {"id": 4, "kind": "Conv", "kernel": [2, 3, 3, 1, 1]},
        {"id": 5, "kind": "Res", "residual_source": 2},
    ])
    assert all(fb.fused_layer_id is None for fb in lower_to_fbs(graph, hw))
    weights = random_weights(graph, rng)
    x = random_input(graph, rng)
    result, expected = run_both(graph, hw, weights, x)
    assert not result.folded
    assert compare_outputs(graph, result.values, expected) == []
