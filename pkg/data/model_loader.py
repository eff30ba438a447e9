"""
Model Description Loading
Parses CNN model files into a validated layer graph with inferred shapes
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import ujson

import config
from utils.errors import ModelSchemaError, ShapeError

LOGGER = logging.getLogger(__name__)

LAYER_KINDS = ("Conv", "FC", "Max", "ReLU", "Res", "Softmax")
GEMM_KINDS = ("Conv", "FC")

# Id of the implicit graph input
INPUT_ID = 0


@dataclass(frozen=True)
class LayerSpec:
    """One CNN layer with its inferred shapes"""

    id: int
    kind: str
    in_shape: Tuple[int, int, int]
    out_shape: Tuple[int, int, int]
    inputs: Tuple[int, ...]
    bits_in: int = 8
    bits_w: int = 8
    kernel: Optional[Tuple[int, int, int, int, int]] = None
    window: Optional[Tuple[int, int, int]] = None
    residual_source: Optional[int] = None
    shift: int = 0

    @property
    def is_gemm(self) -> bool:
        return self.kind in GEMM_KINDS

    @property
    def fan_in(self) -> int:
        """Rows one GEMM op needs (R*S*C_in, or the flattened input for FC)"""
        if self.kind == "FC":
            return int(math.prod(self.in_shape))
        if self.kind == "Conv":
            _, r, s, _, _ = self.kernel
            return r * s * self.in_shape[0]
        return 0

    @property
    def positions(self) -> int:
        """Output spatial positions"""
        return self.out_shape[1] * self.out_shape[2]

    @property
    def out_channels(self) -> int:
        return self.out_shape[0]


@dataclass(frozen=True)
class ModelGraph:
    """Topologically ordered layer DAG"""

    name: str
    input_shape: Tuple[int, int, int]
    layers: Tuple[LayerSpec, ...]
    edges: Tuple[Tuple[int, int], ...]
    _index: Dict[int, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        self._index.update({layer.id: i for i, layer in enumerate(self.layers)})

    def layer(self, layer_id: int) -> LayerSpec:
        return self.layers[self._index[layer_id]]

    def consumers(self, layer_id: int) -> List[LayerSpec]:
        return [self.layer(dst) for src, dst in self.edges if src == layer_id]

    def producers(self, layer_id: int) -> List[int]:
        return [src for src, dst in self.edges if dst == layer_id]

    @property
    def output_layer(self) -> LayerSpec:
        return self.layers[-1]


def default_shift(bits_w: int, fan_in: int) -> int:
    """Requantization shift applied to GEMM accumulators when the model gives none"""
    return bits_w - 1 + math.ceil(math.log2(max(fan_in, 1))) // 2


def _require(obj: dict, key: str, types, where: str):
    if key not in obj:
        raise ModelSchemaError(f"{where}: missing field '{key}'")
    value = obj[key]
    if not isinstance(value, types) or isinstance(value, bool):
        raise ModelSchemaError(f"{where}: field '{key}' has type {type(value).__name__}")
    return value


def _int_tuple(value, length_options, where: str, name: str) -> Tuple[int, ...]:
    if not isinstance(value, list) or len(value) not in length_options:
        raise ModelSchemaError(f"{where}: '{name}' must be a list of {length_options} integers")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        raise ModelSchemaError(f"{where}: '{name}' must hold integers")
    return tuple(value)


def _infer_out_shape(kind, in_shape, kernel, window, layer_id):
    c, h, w = in_shape
    if kind == "Conv":
        k, r, s, stride, pad = kernel
        if stride < 1 or pad < 0 or k < 1:
            raise ShapeError(layer_id, f"invalid kernel {kernel}")
        oh = (h + 2 * pad - r) // stride + 1
        ow = (w + 2 * pad - s) // stride + 1
        out = (k, oh, ow)
    elif kind == "FC":
        out = (kernel[0], 1, 1)
    elif kind == "Max":
        ph, pw, stride = window
        if stride < 1 or ph < 1 or pw < 1:
            raise ShapeError(layer_id, f"invalid window {window}")
        out = (c, (h - ph) // stride + 1, (w - pw) // stride + 1)
    else:
        out = (c, h, w)
    if min(out) < 1:
        raise ShapeError(layer_id, f"output shape {out} is not positive")
    return out


def _parse_layer(raw: dict, shapes: Dict[int, tuple], bits: Dict[int, int], previous_id: int):
    where = f"layer {raw.get('id', '?')}"
    layer_id = _require(raw, "id", int, where)
    kind = _require(raw, "kind", str, where)
    if kind not in LAYER_KINDS:
        raise ModelSchemaError(f"{where}: unknown kind '{kind}'")
    if layer_id <= previous_id:
        raise ModelSchemaError(f"{where}: ids must be strictly increasing")

    inputs = tuple(raw.get("inputs", [previous_id]))
    if not inputs:
        raise ModelSchemaError(f"{where}: layer needs at least one producer")
    for src in inputs:
        if src not in shapes:
            raise ShapeError(layer_id, f"producer {src} is unknown or comes later")
    if len(inputs) > 1:
        raise ShapeError(layer_id, "layers take one producer; use Res for joins")

    producer_shape = shapes[inputs[0]]
    if "in_shape" in raw:
        in_shape = _int_tuple(raw["in_shape"], (3,), where, "in_shape")
        if in_shape != producer_shape:
            raise ShapeError(layer_id, f"in_shape {in_shape} != producer output {producer_shape}")
    else:
        in_shape = producer_shape

    bits_in = raw.get("bits_in", 8)
    bits_w = raw.get("bits_w", 8)
    if any(not isinstance(b, int) or isinstance(b, bool) or b < 1 for b in (bits_in, bits_w)):
        raise ModelSchemaError(f"{where}: bits_in and bits_w must be integers >= 1")
    if inputs[0] in bits and bits[inputs[0]] != bits_in:
        raise ShapeError(layer_id, f"bits_in {bits_in} != producer precision {bits[inputs[0]]}")

    kernel = window = residual_source = None
    if kind == "Conv":
        kernel = _int_tuple(_require(raw, "kernel", list, where), (5,), where, "kernel")
    elif kind == "FC":
        kernel = _int_tuple(_require(raw, "kernel", list, where), (1, 5), where, "kernel")
        kernel = (kernel[0], 1, 1, 1, 0)
    elif kind == "Max":
        window = _int_tuple(_require(raw, "window", list, where), (3,), where, "window")
    elif kind == "Res":
        residual_source = _require(raw, "residual_source", int, where)
        if residual_source not in shapes:
            raise ShapeError(layer_id, f"residual_source {residual_source} does not precede the layer")

    out_shape = _infer_out_shape(kind, in_shape, kernel, window, layer_id)
    if kind == "Res" and shapes[residual_source] != out_shape:
        raise ShapeError(
            layer_id, f"residual shape {shapes[residual_source]} != output shape {out_shape}"
        )
    if kind == "Res" and residual_source in bits and bits[residual_source] != bits_in:
        raise ShapeError(layer_id, "residual precision differs from bits_in")

    layer = LayerSpec(
        id=layer_id, kind=kind, in_shape=in_shape, out_shape=out_shape, inputs=inputs,
        bits_in=bits_in, bits_w=bits_w, kernel=kernel, window=window,
        residual_source=residual_source,
    )
    if layer.is_gemm:
        shift = raw.get("shift", default_shift(bits_w, layer.fan_in))
        if not isinstance(shift, int) or shift < 0:
            raise ModelSchemaError(f"{where}: shift must be a non-negative integer")
        layer = replace(layer, shift=shift)
    return layer


def parse_model(text: str) -> ModelGraph:
    """
    Parse and validate a model description

    Args:
        text (str): JSON model description (schema "v1")

    Returns:
        ModelGraph: Validated graph with inferred shapes
    """

    try:
        doc = ujson.loads(text)
    except ValueError as exc:
        raise ModelSchemaError(f"model text is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ModelSchemaError("model description must be an object")
    if doc.get("version") != config.MODEL_SCHEMA_VERSION:
        raise ModelSchemaError(f"unsupported model schema version {doc.get('version')!r}")

    name = doc.get("name", "model")
    input_shape = _int_tuple(_require(doc, "input_shape", list, "model"), (3,), "model", "input_shape")
    if min(input_shape) < 1:
        raise ShapeError(INPUT_ID, f"input shape {input_shape} is not positive")
    raw_layers = _require(doc, "layers", list, "model")
    if not raw_layers:
        raise ModelSchemaError("model has no layers")

    shapes = {INPUT_ID: input_shape}
    bits: Dict[int, int] = {}
    layers, edges = [], []
    previous_id = INPUT_ID
    for raw in raw_layers:
        if not isinstance(raw, dict):
            raise ModelSchemaError("each layer must be an object")
        layer = _parse_layer(raw, shapes, bits, previous_id)
        shapes[layer.id] = layer.out_shape
        bits[layer.id] = layer.bits_in
        layers.append(layer)
        edges.extend((src, layer.id) for src in layer.inputs)
        if layer.residual_source is not None:
            edges.append((layer.residual_source, layer.id))
        previous_id = layer.id

    graph = ModelGraph(name=name, input_shape=input_shape, layers=tuple(layers), edges=tuple(edges))
    LOGGER.debug("Parsed model %s with %d layers", name, len(layers))
    return graph


def load_model(path) -> ModelGraph:
    """Read a model file from disk"""
    path = Path(path)
    if not path.exists():
        candidate = Path(config.MODELS_DIR) / f"{path.name}.json"
        if candidate.exists():
            path = candidate
    return parse_model(path.read_text(encoding="utf-8"))


def model_hash(graph: ModelGraph) -> str:
    """Stable digest of a graph, used to check that compared runs share a model"""

    text = ujson.dumps(
        [[l.id, l.kind, l.in_shape, l.out_shape, l.kernel, l.window, l.residual_source,
          l.bits_in, l.bits_w, l.shift, l.inputs] for l in graph.layers]
    )
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
