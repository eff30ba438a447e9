"""
Shared fixtures: repository root on the path, default hardware, toy models
"""

import sys
from pathlib import Path

import numpy as np
import pytest
import ujson

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from data.hardware import load_hardware  # noqa: E402
from data.model_loader import parse_model  # noqa: E402

MODELS = ROOT / "models"
HARDWARE = ROOT / "configs" / "hardware_default.json"


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full benchmark models, minutes of runtime")


def model_text(input_shape, layers, name="toy"):
    return ujson.dumps({"version": "v1", "name": name, "input_shape": list(input_shape), "layers": layers})


def make_model(input_shape, layers, name="toy"):
    return parse_model(model_text(input_shape, layers, name))


@pytest.fixture
def hw():
    return load_hardware(HARDWARE)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def lenet():
    return parse_model((MODELS / "lenet_toy.json").read_text(encoding="utf-8"))


@pytest.fixture
def resnet_toy():
    return parse_model((MODELS / "resnet_toy.json").read_text(encoding="utf-8"))


@pytest.fixture
def pool_chain():
    """1x1 Conv over a 1x1x6 row feeding a 1x2 stride-2 pool"""
    return make_model([1, 1, 6], [
        {"id": 1, "kind": "Conv", "kernel": [1, 1, 1, 1, 0]},
        {"id": 2, "kind": "Max", "window": [1, 2, 2]},
    ])
