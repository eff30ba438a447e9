import logging

import numpy as np
import pandas as pd
import pytest
import ujson

from conftest import HARDWARE, MODELS
from data.hardware import parse_hardware
from data.model_loader import parse_model
from mapping.plan import build_plan
from simulator.pipeline import TRACE_COLUMNS, FbTask, PipelineTrace, schedule_model
from utils.errors import ConfigError
from utils.reports import adc_study, array_size_study
from utils.stats import (
    CostReport, UtilizationReport, adc_tradeoff, cost_report, plan_usage, spatial_utilization,
    temporal_utilization, utilization_report,
)


def usage(mapped, allocated):
    return pd.DataFrame({"layer_id": range(1, len(mapped) + 1), "mapped_cells": mapped,
                         "allocated_cells": allocated})


def test_spatial_utilization_per_layer():
    frame = spatial_utilization(usage([50, 30, 0], [100, 120, 0]))
    assert frame["utilization"].tolist() == [0.5, 0.25, 0.0]
    report = UtilizationReport(spatial=frame)
    assert report.spatial_mean == pytest.approx(0.25)
    assert report.spatial_aggregate == pytest.approx(80 / 220)


def test_over_mapped_layers_are_logged(caplog):
    with caplog.at_level(logging.WARNING):
        spatial_utilization(usage([120], [100]))
    assert "map more cells" in caplog.text


def trace_of(tasks, cycles, meta=None):
    frame = pd.DataFrame([t.as_row() for t in tasks], columns=list(TRACE_COLUMNS))
    return PipelineTrace(tasks=frame, total_cycles=cycles, array_cells=100, arrays=1, meta=meta or {})


def test_temporal_utilization_counts_idle_cycles():
    trace = trace_of([FbTask(1, 1, 0, "compute", 0, 4, 50)], 8)
    np.testing.assert_allclose(temporal_utilization(trace), [0.5] * 4 + [0.0] * 4)
    report = utilization_report(usage([50], [100]), trace)
    assert report.temporal_mean == pytest.approx(0.25)
    assert report.summary()["cycles"] == 8


def test_overfull_cycles_are_logged(caplog):
    trace = trace_of([FbTask(1, 1, 0, "compute", 0, 2, 80), FbTask(2, 1, 0, "compute", 1, 3, 40)], 3)
    with caplog.at_level(logging.WARNING):
        share = temporal_utilization(trace)
    assert "activate more cells" in caplog.text
    np.testing.assert_allclose(share, [0.8, 1.0, 0.4])


def test_adc_energy_follows_conversions(hw):
    trace = trace_of([FbTask(1, 1, 0, "compute", 0, 4, 50, events={"adc_conversions": 10})], 4,
                     meta={"arrays_by_size": {512: 1}})
    cost = cost_report(trace, hw)
    assert cost.energy["adc"] == pytest.approx(10 * 7.34)
    assert cost.energy["controller_cycle"] == pytest.approx(4 * 5.0)
    assert cost.area["lut"] == pytest.approx(hw.area("lut"))
    assert "digital_unit" not in cost.area


def test_costs_scale_linearly(lenet, hw):
    trace = schedule_model(build_plan(lenet, hw), lenet, hw)
    base, doubled = cost_report(trace, hw), cost_report(trace, hw.scaled(2))
    assert doubled.energy_total == pytest.approx(2 * base.energy_total)
    assert doubled.area_total == pytest.approx(2 * base.area_total)
    assert all(0.0 <= share <= 1.0 for share in base.shares().values())


def test_relative_efficiency():
    hurry = CostReport(energy={"adc": 50.0}, area={"cell": 2.0}, cycles=100)
    static = CostReport(energy={"adc": 100.0}, area={"cell": 4.0}, cycles=200)
    assert hurry.relative_to(static) == {"speedup": 2.0, "energy_efficiency": 2.0, "area_efficiency": 4.0}
    assert hurry.relative_to(hurry)["speedup"] == 1.0


def test_small_adcs_cost_more_in_total(hw):
    trade = adc_tradeoff(hw)
    assert trade["count"] == 16
    assert trade["power_ratio"] == pytest.approx(3.40, rel=0.05)
    assert trade["area_ratio"] == pytest.approx(3.69, rel=0.05)
    assert adc_study(hw)["array_size"].tolist() == [128, 256, 512]
    assert adc_tradeoff(hw, 512)["power_ratio"] == pytest.approx(1.0)


def test_smaller_arrays_waste_fewer_cells():
    alexnet = parse_model((MODELS / "alexnet_cifar.json").read_text(encoding="utf-8"))
    study = array_size_study(alexnet).set_index("array_size")["spatial_aggregate"]
    assert study[128] >= 0.9
    assert study[512] <= 0.7
    assert study[128] > study[256] > study[512]


def test_plan_usage_stays_within_allocation(lenet, hw):
    frame = plan_usage(build_plan(lenet, hw), lenet)
    assert frame["kind"].tolist() == ["Conv", "Conv", "FC"]
    assert (frame["allocated_cells"] == frame["arrays"] * 512 * 512).all()
    assert (frame["mapped_cells"] <= frame["allocated_cells"]).all()


def hardware_doc():
    return ujson.loads(HARDWARE.read_text(encoding="utf-8"))


@pytest.mark.parametrize("edit", [
    lambda doc: doc["adc"]["512"]["power"].update(unit="W"),
    lambda doc: doc["energy"]["dac"].update(value=-1.0),
    lambda doc: doc["energy"].pop("cell_write"),
    lambda doc: doc["adc"].pop("512"),
    lambda doc: doc["architecture"].update(tiles=0),
    lambda doc: doc.update(version="v0"),
    lambda doc: doc["area"].update(lut=3),
])
def test_bad_hardware_configs(edit):
    doc = hardware_doc()
    edit(doc)
    with pytest.raises(ConfigError):
        parse_hardware(ujson.dumps(doc))


def test_hardware_config_round_trip(hw):
    assert parse_hardware(ujson.dumps(hardware_doc())) == hw
    assert hw.adc_bits == 9
    assert hw.total_imas == 128
    with pytest.raises(ConfigError):
        parse_hardware("{not json")
