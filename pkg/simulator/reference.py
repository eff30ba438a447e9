"""
Reference Inference
Plain integer execution of a model, used as the oracle for simulated runs
"""

from typing import Dict, Tuple

import numpy as np

from data.model_loader import INPUT_ID, LayerSpec, ModelGraph


def signed_range(bits: int) -> Tuple[int, int]:
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


def clip(values, bits: int) -> np.ndarray:
    lo, hi = signed_range(bits)
    return np.clip(values, lo, hi)


def requantize(raw, shift: int, bits: int) -> np.ndarray:
    """Arithmetic right shift then saturate to the activation width"""
    return clip(np.asarray(raw, dtype=np.int64) >> shift, bits)


def random_weights(graph: ModelGraph, rng: np.random.Generator) -> Dict[int, np.ndarray]:
    """Kernel matrix (fan_in, out_channels) for every GEMM layer"""
    weights = {}
    for layer in graph.layers:
        if layer.is_gemm:
            lo, hi = signed_range(layer.bits_w)
            weights[layer.id] = rng.integers(lo, hi + 1, size=(layer.fan_in, layer.out_channels), dtype=np.int64)
    return weights


def random_input(graph: ModelGraph, rng: np.random.Generator) -> np.ndarray:
    first = graph.layers[0]
    lo, hi = signed_range(first.bits_in)
    return rng.integers(lo, hi + 1, size=graph.input_shape, dtype=np.int64)


def im2col(x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """
    Patches of a (C, H, W) tensor, one row per output position in raster order

    Columns follow (channel, kernel row, kernel col), the row order of the
    kernel matrix.
    """

    if layer.kind == "FC":
        return x.reshape(1, -1)
    _, r, s, stride, pad = layer.kernel
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    _, oh, ow = layer.out_shape
    patches = np.empty((oh * ow, layer.fan_in), dtype=np.int64)
    for i in range(oh):
        for j in range(ow):
            window = padded[:, i * stride:i * stride + r, j * stride:j * stride + s]
            patches[i * ow + j] = window.reshape(-1)
    return patches


def gemm_raw(x: np.ndarray, weights: np.ndarray, layer: LayerSpec) -> np.ndarray:
    """Accumulator values shaped (K, H_out, W_out)"""
    raw = im2col(x, layer) @ weights
    return raw.T.reshape(layer.out_shape)


def max_pool(x: np.ndarray, window) -> np.ndarray:
    ph, pw, stride = window
    c, h, w = x.shape
    oh, ow = (h - ph) // stride + 1, (w - pw) // stride + 1
    out = np.empty((c, oh, ow), dtype=x.dtype)
    for i in range(oh):
        for j in range(ow):
            out[:, i, j] = x[:, i * stride:i * stride + ph, j * stride:j * stride + pw].reshape(c, -1).max(axis=1)
    return out


def softmax(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    shifted = np.exp(values - values.max())
    return shifted / shifted.sum()


def reference_inference(graph: ModelGraph, weights: Dict[int, np.ndarray], x: np.ndarray):
    """
    Run the model in integer arithmetic

    Returns:
        tuple: (output of the last layer, dict of every layer's output)
    """

    x = np.asarray(x, dtype=np.int64)
    if tuple(x.shape) != graph.input_shape:
        raise ValueError(f"input shape {x.shape} != model input {graph.input_shape}")
    values = {INPUT_ID: x}
    raws = {}
    for layer in graph.layers:
        src = values[layer.inputs[0]]
        if layer.is_gemm:
            raws[layer.id] = gemm_raw(src, weights[layer.id], layer)
            values[layer.id] = requantize(raws[layer.id], layer.shift, layer.bits_in)
        elif layer.kind == "Res":
            conv = graph.layer(layer.inputs[0])
            values[layer.id] = requantize(raws[conv.id] + values[layer.residual_source], conv.shift, layer.bits_in)
        elif layer.kind == "ReLU":
            values[layer.id] = np.maximum(src, 0)
        elif layer.kind == "Max":
            values[layer.id] = max_pool(src, layer.window)
        elif layer.kind == "Softmax":
            values[layer.id] = softmax(src)
    return values[graph.output_layer.id], values
