"""
Full benchmark models; run with `pytest -m slow`
"""

import pytest

from conftest import MODELS
from data.model_loader import parse_model
from mapping.floorplan import check_constraints
from mapping.plan import build_plan
from simulator.pipeline import count_cycles, schedule_model
from utils.baseline import run_baseline
from utils.stats import cost_report, plan_usage, utilization_report

BENCHMARKS = ["alexnet_cifar", "vgg16_cifar", "resnet18_cifar"]


def benchmark(name):
    return parse_model((MODELS / f"{name}.json").read_text(encoding="utf-8"))


def hurry_run(graph, hw):
    plan = build_plan(graph, hw)
    trace = schedule_model(plan, graph, hw)
    return trace, utilization_report(plan_usage(plan, graph), trace)


def baseline_run(graph, hw, mode, sizes):
    result = run_baseline(graph, hw, mode, sizes)
    return result.trace, utilization_report(result.usage, result.trace)


@pytest.mark.slow
@pytest.mark.parametrize("name", BENCHMARKS)
def test_benchmarks_map_within_constraints(name, hw):
    graph = benchmark(name)
    plan = build_plan(graph, hw)
    assert {fb.layer_id for fb in plan.fbs} <= {layer.id for layer in graph.layers}
    for ima in plan.imas:
        assert check_constraints(ima.fbs, ima.shapes, hw.array) is None
        assert all(p.within(hw.array) for p in ima.placements)


@pytest.mark.slow
@pytest.mark.parametrize("name", BENCHMARKS)
def test_flexible_blocks_beat_static_arrays(name, hw):
    graph = benchmark(name)
    trace, hurry = hurry_run(graph, hw)
    static_trace, static = baseline_run(graph, hw, "static", [512])
    _, multi = baseline_run(graph, hw, "multi_size", [128, 256, 512])

    assert hurry.spatial_mean > static.spatial_mean
    assert hurry.spatial_std < multi.spatial_std
    assert hurry.temporal_mean > static.temporal_mean
    speedup = cost_report(trace, hw).relative_to(cost_report(static_trace, hw))["speedup"]
    assert speedup >= 1.0


@pytest.mark.slow
def test_first_alexnet_pool_keeps_up_with_its_conv(hw):
    graph = benchmark("alexnet_cifar")
    trace, _ = hurry_run(graph, hw)
    active = count_cycles(trace)["layers"].set_index("layer_id")["active_cycles"]
    # ReLU 2 is folded into the pool (layer 3)
    assert active[3] <= active[1]
