import pandas as pd
import pytest
import ujson

import config
from cli import RunConfig, main, parse_args, parse_mode
from conftest import HARDWARE, MODELS, ROOT
from utils.errors import ConfigError

LENET = str(MODELS / "lenet_toy.json")


@pytest.fixture(autouse=True)
def at_root(monkeypatch):
    monkeypatch.chdir(ROOT)


def test_map_is_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["map", "--model", LENET, "--out", str(first), "-q"]) == 0
    assert main(["map", "--model", LENET, "--out", str(second), "-q"]) == 0
    assert (first / "plan.json").read_bytes() == (second / "plan.json").read_bytes()
    floorplan = pd.read_csv(first / "floorplan.csv")
    assert set(floorplan["op_kind"]) >= {"Conv", "FC", "Max"}


def test_array_too_small_exits_infeasible(tmp_path):
    doc = ujson.loads(HARDWARE.read_text(encoding="utf-8"))
    doc["architecture"].update(array_rows=8, array_cols=8)
    doc["adc"]["8"] = doc["adc"]["128"]
    config = tmp_path / "tiny.json"
    config.write_text(ujson.dumps(doc), encoding="utf-8")
    assert main(["map", "--model", LENET, "--config", str(config), "--out", str(tmp_path), "-q"]) == 3


def test_corrupt_plan_exits_with_format_error(tmp_path):
    plan = tmp_path / "plan.json"
    plan.write_text("{", encoding="utf-8")
    assert main(["simulate", "--model", LENET, "--plan", str(plan), "--out", str(tmp_path), "-q"]) == 2


def test_missing_model_exits_with_io_error(tmp_path):
    assert main(["map", "--model", str(tmp_path / "none.json"), "--out", str(tmp_path), "-q"]) == 1


def test_simulate_then_view_trace(tmp_path, capsys):
    assert main(["simulate", "--model", LENET, "--out", str(tmp_path), "-q"]) == 0
    assert "oracle: PASS" in capsys.readouterr().out
    summary = ujson.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["oracle"] == "PASS"
    assert summary["mismatched_layers"] == []
    assert summary["folded_layers"] == [2]
    for name in ("plan.json", "trace.csv", "spatial.csv", "cycles.csv"):
        assert (tmp_path / name).exists()
    assert main(["trace-view", "--trace", str(tmp_path / "trace.csv")]) == 0
    assert "overlap fraction" in capsys.readouterr().out


def test_simulate_reuses_a_saved_plan(tmp_path):
    assert main(["map", "--model", LENET, "--out", str(tmp_path), "-q"]) == 0
    out = tmp_path / "again"
    assert main(["simulate", "--model", LENET, "--plan", str(tmp_path / "plan.json"),
                 "--out", str(out), "-q"]) == 0
    assert (out / "plan.json").read_bytes() == (tmp_path / "plan.json").read_bytes()


def test_plan_for_another_model_is_rejected(tmp_path):
    assert main(["map", "--model", str(MODELS / "resnet_toy.json"), "--out", str(tmp_path), "-q"]) == 0
    assert main(["simulate", "--model", LENET, "--plan", str(tmp_path / "plan.json"),
                 "--out", str(tmp_path), "-q"]) == 2


def test_compare_writes_the_table(tmp_path):
    assert main(["compare", "--model", LENET, "--baseline-modes", "static-512,multi-128-256-512",
                 "--out", str(tmp_path), "--emit-plot-data", "-q"]) == 0
    table = pd.read_csv(tmp_path / "comparison.csv")
    assert table["mode"].tolist() == ["hurry", "static-512", "multi-128-256-512"]
    assert table.loc[1, "speedup"] == 1.0
    assert (tmp_path / "array_size.csv").exists() and (tmp_path / "adc_tradeoff.csv").exists()


def test_baseline_mode_from_simulate(tmp_path):
    assert main(["simulate", "--model", LENET, "--mode", "static-256", "--out", str(tmp_path), "-q"]) == 0
    assert (tmp_path / "summary_static-256.json").exists()


def test_mode_names():
    assert parse_mode("hurry") == ("hurry", [])
    assert parse_mode("static-512") == ("static", [512])
    assert parse_mode("multi-128-256") == ("multi_size", [128, 256])
    for bad in ("static", "static-128-256", "dynamic-512", "multi-x"):
        with pytest.raises(ConfigError):
            parse_mode(bad)


def test_trace_view_needs_a_trace():
    assert main(["trace-view"]) == 2


def test_run_config_defaults_come_from_config():
    run = parse_args(["map", "--config", str(HARDWARE)])
    assert run.config_path == HARDWARE
    assert run.seed == config.DEFAULT_SEED
    assert RunConfig(command="map").config_path is None


def test_mode_against_itself_gives_unit_ratios(tmp_path):
    assert main(["compare", "--model", LENET, "--baseline-modes", "static-512", "--reference", "hurry",
                 "--out", str(tmp_path), "-q"]) == 0
    table = pd.read_csv(tmp_path / "comparison.csv").set_index("mode")
    for column in ("speedup", "energy_efficiency", "area_efficiency"):
        assert table.loc["hurry", column] == 1.0


def test_reference_must_be_a_compared_mode(tmp_path):
    assert main(["compare", "--model", LENET, "--baseline-modes", "static-512", "--reference", "static-128",
                 "--out", str(tmp_path), "-q"]) == 2
