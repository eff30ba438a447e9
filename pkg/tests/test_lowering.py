from dataclasses import replace

import pytest

from conftest import make_model
from data.lowering import build_groups, cell_demand, fbs_by_ima, lower_to_fbs, replica_cells
from mapping.plan import build_plan
from utils.errors import InfeasiblePlanError, UnsupportedLayerError
from utils.stats import plan_usage, spatial_utilization


def test_lenet_blocks(lenet, hw):
    fbs = lower_to_fbs(lenet, hw)
    summary = [(fb.ima, fb.op_kind, fb.bx, fb.by, fb.ops_per_layer) for fb in fbs]
    assert summary == [
        (0, "Conv", 9, 32, 100),
        (0, "Max", 2, 32, 100),
        (1, "Conv", 36, 64, 9),
        (1, "ReLU", 2, 16, 72),
        (2, "FC", 72, 80, 1),
        (2, "Softmax", 2, 80, 1),
    ]
    pool = fbs[1]
    assert pool.fused_relu and pool.fused_layer_id == 2 and pool.layer_id == 3
    assert pool.leaves == 4
    assert fbs[5].leaves == 10
    assert [fb.fb_id for fb in fbs] == list(range(1, 7))


def test_groups_follow_gemm_producers(resnet_toy):
    groups = build_groups(resnet_toy)
    assert [g.gemm.id for g in groups] == [1, 3, 5, 8, 9, 11, 14]
    assert [layer.id for layer in groups[2].followers] == [6, 7]
    assert groups[3].followers == []


def test_res_block_accumulates_with_its_conv(resnet_toy, hw):
    fbs = lower_to_fbs(resnet_toy, hw)
    res = [fb for fb in fbs if fb.op_kind == "Res"]
    assert len(res) == 2
    for fb in res:
        partner = next(f for f in fbs if f.fb_id == fb.accumulates_with)
        assert partner.op_kind == "Conv"
        assert partner.ima == fb.ima
        assert fb.bx == partner.channel_count
        assert fb.by == partner.by


def test_split_fc_over_row_and_column_partitions(hw):
    graph = make_model([1, 16, 16], [{"id": 1, "kind": "FC", "kernel": [10]}])
    fbs = lower_to_fbs(graph, hw.with_array(64, 64))
    assert len(fbs) == 8
    assert sorted({fb.rows for fb in fbs}) == [(0, 64), (64, 128), (128, 192), (192, 256)]
    assert sorted({fb.channels for fb in fbs}) == [(0, 5), (5, 10)]
    assert all(fb.bx == 64 and fb.by == 40 for fb in fbs)
    assert sum(fb.is_host for fb in fbs) == 2
    assert sorted(fbs_by_ima(fbs)) == list(range(8))


def test_chip_too_small_for_split(hw):
    graph = make_model([1, 16, 16], [{"id": 1, "kind": "FC", "kernel": [10]}])
    small = replace(hw.with_array(64, 64), tiles=1, imas_per_tile=4)
    with pytest.raises(InfeasiblePlanError) as info:
        lower_to_fbs(graph, small)
    assert info.value.constraint == "imas"


def test_followers_that_cannot_fit_beside_the_gemm(lenet, hw):
    with pytest.raises(InfeasiblePlanError) as info:
        lower_to_fbs(lenet, hw.with_array(16, 16))
    assert info.value.constraint == "columns"


@pytest.mark.parametrize("layers", [
    [{"id": 1, "kind": "Max", "window": [2, 2, 2]}],
    [{"id": 1, "kind": "FC", "kernel": [4]}, {"id": 2, "kind": "Softmax"}, {"id": 3, "kind": "ReLU"}],
    [{"id": 1, "kind": "Conv", "kernel": [2, 1, 1, 1, 0]}, {"id": 2, "kind": "ReLU"},
     {"id": 3, "kind": "Res", "residual_source": 0}],
    [{"id": 1, "kind": "Conv", "kernel": [2, 1, 1, 1, 0], "bits_w": 1},
     {"id": 2, "kind": "Res", "residual_source": 0}],
    [{"id": 1, "kind": "Conv", "kernel": [2, 1, 1, 1, 0]}, {"id": 2, "kind": "ReLU"},
     {"id": 3, "kind": "ReLU", "inputs": [1]}],
])
def test_unsupported_chains(layers, hw):
    graph = make_model([2, 4, 4], layers)
    with pytest.raises(UnsupportedLayerError):
        lower_to_fbs(graph, hw)


def test_cell_demand(lenet, hw):
    fbs = lower_to_fbs(lenet, hw)
    assert cell_demand(fbs) == sum(fb.ops_per_layer * fb.bx * fb.by for fb in fbs)
    assert cell_demand(fbs[:1]) == 100 * 9 * 32


def test_wide_fc_keeps_full_arrays_beside_its_hosts(hw):
    graph = make_model([512, 1, 1], [{"id": 1, "kind": "FC", "kernel": [512]}, {"id": 2, "kind": "ReLU"}])
    gemms = [fb for fb in lower_to_fbs(graph, hw) if fb.op_kind == "FC"]
    assert len(gemms) == 17
    assert sorted({fb.rows for fb in gemms}) == [(0, 2), (2, 512)]
    assert {fb.channel_count for fb in gemms if not fb.is_host} == {64}
    assert {fb.channel_count for fb in gemms if fb.is_host} == {56, 57}
    plan = build_plan(graph, hw)
    assert spatial_utilization(plan_usage(plan, graph))["utilization"].iloc[0] > 0.9


def test_partition_prefers_replicable_bands():
    assert replica_cells(2, 512, 512, 512) == 512 * 512
    assert replica_cells(27, 256, 510, 512, intake=16) == 16 * 27 * 256
    assert replica_cells(400, 400, 300, 512) == 0
