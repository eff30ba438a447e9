import pandas as pd
import pytest

from data.data_loader import available_reports, load_report
from simulator.pipeline import TRACE_COLUMNS, FbTask
from utils import reports
from utils.visualization import activity_chart, adc_chart, array_size_chart, comparison_chart, timeline_chart


def test_reports_found_in_output_directory(tmp_path):
    reports.write_json({"model": "toy", "oracle": "PASS"}, tmp_path / "summary.json")
    reports.write_csv(pd.DataFrame({"array_size": [128], "spatial_aggregate": [0.9]}), tmp_path / "array_size.csv")
    assert available_reports(tmp_path) == ["summary", "array_size"]
    assert load_report("summary", tmp_path)["oracle"] == "PASS"
    assert load_report("array_size", tmp_path)["array_size"].tolist() == [128]
    assert load_report("trace", tmp_path) is None


def trace_frame():
    tasks = [FbTask(1, 1, 0, "compute", 0, 10, 40), FbTask(2, 2, 0, "load_input", 5, 20, 20)]
    return pd.DataFrame([t.as_row() for t in tasks], columns=list(TRACE_COLUMNS))


def test_activity_curve_is_binned():
    fig = activity_chart(trace_frame(), array_cells=100, bins=4)
    points = fig.data[0]
    assert list(points.x) == [0, 5, 10, 15]
    assert list(points.y) == pytest.approx([0.4, 0.6, 0.2, 0.2])


def test_timeline_has_a_trace_per_phase():
    fig = timeline_chart(trace_frame(), ima=0)
    assert sorted(bar.name for bar in fig.data) == ["compute", "load_input"]


def test_charts_over_study_tables():
    table = pd.DataFrame({"mode": ["hurry", "static-512"], "speedup": [0.8, 1.0]})
    bars = comparison_chart(table).data[0]
    assert list(bars.marker.color) == ["#2ecc71", "#e74c3c"]
    study = pd.DataFrame({"array_size": [128, 256], "spatial_aggregate": [0.9, 0.8], "spatial_mean": [0.8, 0.7]})
    assert len(array_size_chart(study).data) == 2


def test_adc_chart_over_the_study_file(tmp_path, hw):
    reports.write_csv(reports.adc_study(hw), tmp_path / "adc_tradeoff.csv")
    fig = adc_chart(load_report("adc_tradeoff", tmp_path))
    assert sorted(bar.name for bar in fig.data) == ["area_ratio", "power_ratio"]
    assert list(fig.data[0].x) == [128, 256, 512]
