from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from conftest import make_model
from data.lowering import FbRequirement
from mapping.floorplan import FbShape, position_fbs, realize_placement
from mapping.plan import ImaPlan, build_plan
from simulator.pipeline import (
    MOVEMENT_IMA, TRACE_COLUMNS, FbTask, PipelineTrace, check_causality, count_cycles, schedule_ima,
    schedule_model,
)


def hand_plan(fbs, sizes, array=(8, 32)):
    shapes = [FbShape(fb.fb_id, *sizes[fb.fb_id]) for fb in fbs]
    placements = realize_placement(position_fbs(fbs), shapes, array)
    return ImaPlan(ima=0, group=0, part=(0, 1, 0, 1), fbs=list(fbs), sequence_pair=position_fbs(fbs),
                   shapes=shapes, placements=placements)


GEMM = FbRequirement(fb_id=1, op_kind="Conv", bx=1, by=8, ops_per_layer=6, layer_id=1,
                     channels=(0, 1), rows=(0, 1), bits=8)
POOL = FbRequirement(fb_id=2, op_kind="Max", bx=2, by=16, ops_per_layer=3, layer_id=2,
                     channels=(0, 1), bits=8, leaves=2)


def test_gemm_passes_run_back_to_back(hw):
    graph = make_model([1, 1, 4], [{"id": 1, "kind": "Conv", "kernel": [1, 1, 1, 1, 0]}])
    gemm = replace(GEMM, ops_per_layer=4)
    sched = schedule_ima(hand_plan([gemm], {1: (1, 8)}), graph, hw)
    assert sched.pass_starts == [0, 8, 16, 24]
    assert sched.end == 32
    assert sched.backpressure_stall == sched.handoff_stall == 0


def test_pass_latency_follows_adc_throughput(hw):
    graph = make_model([1, 1, 64], [{"id": 1, "kind": "Conv", "kernel": [1, 1, 1, 1, 0]}])
    gemm = replace(GEMM, ops_per_layer=64)
    sched = schedule_ima(hand_plan([gemm], {1: (1, 256)}, array=(8, 256)), graph, hw)
    # 32 replicas x 8 columns = 256 conversions per input bit, 128 per clock
    assert sched.pass_starts == [0, 16]
    assert sched.end == 32


@pytest.mark.parametrize("or_bytes, stall", [(2, 50), (2048, 0)])
def test_pool_chain_by_hand(pool_chain, hw, or_bytes, stall):
    ima = hand_plan([GEMM, POOL], {1: (1, 8), 2: (2, 16)})
    sched = schedule_ima(ima, pool_chain, replace(hw, or_bytes=or_bytes))
    assert sched.end == 214
    assert sched.backpressure_stall == stall
    takes = [t.start for t in sched.tasks if t.phase == "load_input"]
    assert takes == [16, 82, 148]
    assert all(t.end - t.start == 17 for t in sched.tasks if t.phase == "load_input")
    assert all(t.end - t.start == 49 for t in sched.tasks if t.fb_id == 2 and t.phase == "compute")


def test_narrow_consumer_stalls_every_pass(pool_chain, hw):
    ima = hand_plan([GEMM, POOL], {1: (2, 8), 2: (2, 16)})
    sched = schedule_ima(ima, pool_chain, hw)
    # two ops per pass, one op handed over per write round
    assert sched.handoff_stall == 3 * 17


def trace_of(tasks, cycles):
    frame = pd.DataFrame([t.as_row() for t in tasks], columns=list(TRACE_COLUMNS))
    return PipelineTrace(tasks=frame, total_cycles=cycles, array_cells=100, arrays=1)


def test_overlap_fraction_bounds():
    apart = trace_of([FbTask(1, 1, 0, "compute", 0, 10, 5), FbTask(2, 2, 0, "compute", 10, 20, 5)], 20)
    together = trace_of([FbTask(1, 1, 0, "compute", 0, 10, 5), FbTask(2, 2, 0, "compute", 0, 10, 5)], 10)
    assert count_cycles(apart)["overlap_fraction"] == 0.0
    assert count_cycles(together)["overlap_fraction"] == 1.0
    counted = count_cycles(apart)
    assert counted["fbs"]["active_cycles"].tolist() == [10, 10]
    assert counted["layers"]["active_cycles"].tolist() == [10, 10]


def test_activity_and_per_cycle_view():
    trace = trace_of([
        FbTask(1, 1, 0, "compute", 0, 4, 10),
        FbTask(2, 2, 0, "load_input", 2, 6, 3),
        FbTask(1, 1, MOVEMENT_IMA, "load_input", 6, 8, 0),
    ], 8)
    assert trace.activity().tolist() == [10, 10, 13, 13, 3, 3, 0, 0]
    frame = trace.per_cycle_frame()
    assert len(frame) == 8
    assert frame.groupby("cycle")["activated_cells"].sum().tolist() == [10, 10, 13, 13, 3, 3]


def test_model_schedule_is_causal(lenet, resnet_toy, hw):
    for graph in (lenet, resnet_toy):
        trace = schedule_model(build_plan(graph, hw), graph, hw)
        assert check_causality(trace) == []
        assert trace.stalls["handoff"] == 0
        assert trace.total_cycles == trace.tasks["end"].max()
        assert 0.0 <= count_cycles(trace)["overlap_fraction"] <= 1.0
        movement = trace.tasks[trace.tasks["ima"] == MOVEMENT_IMA]
        assert len(movement) == len(build_plan(graph, hw).groups()) + 1


def test_write_port_reservations_never_overlap(lenet, hw):
    trace = schedule_model(build_plan(lenet, hw), lenet, hw)
    loads = trace.tasks[(trace.tasks["phase"] == "load_input") & (trace.tasks["ima"] >= 0)]
    for _, rows in loads.groupby("ima"):
        spans = sorted(zip(rows["start"], rows["end"]))
        assert all(a_end <= b_start for (_, a_end), (b_start, _) in zip(spans, spans[1:]))


def test_groups_run_in_sequence(lenet, hw):
    trace = schedule_model(build_plan(lenet, hw), lenet, hw)
    tasks = trace.tasks[trace.tasks["ima"] >= 0]
    spans = tasks.groupby("ima").agg(first=("start", "min"), last=("end", "max"))
    assert np.all(spans["first"].to_numpy()[1:] >= spans["last"].to_numpy()[:-1])


def test_reset_flag_shortens_writes(lenet, hw):
    plan = build_plan(lenet, hw)
    with_reset = schedule_model(plan, lenet, hw, include_reset=True)
    without = schedule_model(plan, lenet, hw, include_reset=False)
    assert without.total_cycles < with_reset.total_cycles


def test_schedule_is_deterministic(resnet_toy, hw):
    plan = build_plan(resnet_toy, hw)
    first = schedule_model(plan, resnet_toy, hw).tasks
    second = schedule_model(plan, resnet_toy, hw).tasks
    pd.testing.assert_frame_equal(first, second)


def test_partial_sum_arrays_never_trail_their_hosts(hw):
    graph = make_model([512, 1, 1], [{"id": 1, "kind": "FC", "kernel": [512]}, {"id": 2, "kind": "ReLU"}])
    plan = build_plan(graph, hw)
    trace = schedule_model(plan, graph, hw)
    assert check_causality(trace) == []
    compute = trace.tasks[trace.tasks["phase"] == "compute"].set_index(["ima", "granule"])["start"]
    hosts = [ima for ima in plan.imas if ima.fbs[0].is_host]
    for ima in plan.imas:
        lo, hi = ima.fbs[0].channels
        for host in hosts:
            hlo, hhi = host.fbs[0].channels
            if not ima.fbs[0].is_host and hlo < hi and lo < hhi:
                assert compute.loc[(ima.ima, 0)] <= compute.loc[(host.ima, 0)]


def test_wider_consumers_never_slow_the_pipeline(pool_chain, hw):
    for gemm_rows in (1, 2):
        ends, stalls = [], []
        for ny in (16, 32, 48):
            ima = hand_plan([GEMM, POOL], {1: (gemm_rows, 8), 2: (2, ny)}, array=(8, 64))
            sched = schedule_ima(ima, pool_chain, hw)
            ends.append(sched.end)
            stalls.append(sched.handoff_stall)
        assert ends == sorted(ends, reverse=True)
        assert stalls == sorted(stalls, reverse=True)
    assert stalls[0] > stalls[-1] == 0


def random_chain(rng):
    start = side = int(rng.choice([4, 8]))
    layers = []
    for _ in range(int(rng.integers(1, 4))):
        layers.append({"id": len(layers) + 1, "kind": "Conv",
                       "kernel": [int(rng.integers(1, 9)), 3, 3, 1, 1]})
        options = [[], ["ReLU"]]
        if side % 2 == 0:
            options += [["Max"], ["ReLU", "Max"], ["Max", "ReLU"]]
        for kind in options[int(rng.integers(len(options)))]:
            layer = {"id": len(layers) + 1, "kind": kind}
            if kind == "Max":
                layer["window"] = [2, 2, 2]
                side //= 2
            layers.append(layer)
    return make_model([int(rng.integers(1, 4)), start, start], layers)


def test_balanced_plans_run_gemm_passes_back_to_back(hw):
    rng = np.random.default_rng(99)
    roomy = replace(hw, or_bytes=1 << 20)
    for _ in range(20):
        graph = random_chain(rng)
        plan = build_plan(graph, roomy)
        trace = schedule_model(plan, graph, roomy)
        for ima in plan.imas:
            passes = trace.tasks[(trace.tasks["fb_id"] == ima.fbs[0].fb_id) & (trace.tasks["phase"] == "compute")]
            passes = passes.sort_values("granule")
            assert (passes["start"].to_numpy()[1:] == passes["end"].to_numpy()[:-1]).all()
