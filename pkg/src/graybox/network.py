"""Convnet skeleton: graph specs, parameter init, forward pass, param counts.

Every classifier shares one layout: a stack of conv blocks
(conv -> optional 2x2 max-pool -> activation), a flatten, a stack of fc
blocks (linear -> activation -> optional dropout), and a final 10-way linear
classifier. The free choices (activation kind, dropout, pooling, kernel
size, block counts) are exactly the knobs the attribute grid varies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import ConfigError, ShapeError

ACTIVATIONS = ("relu", "prelu", "elu", "tanh")

# Channel widths per conv block, by kernel size. Chosen so the zoo's
# parameter counts sweep the 2^14..2^21 range while a full 400-model build
# stays tractable on a single CPU core; see README for the resulting spread.
CONV_WIDTHS = {3: (8, 16, 16, 16), 5: (4, 8, 8, 8)}
FC_WIDTH = 128
N_CLASSES = 10
INPUT_SHAPE = (1, 28, 28)
DROPOUT_KEEP = 0.5
PRELU_INIT = 0.25


@dataclass(frozen=True)
class Layer:
    """One node of the graph spec: kind + static shape info."""

    name: str
    kind: str  # conv | pool | act | drop | flatten | linear
    act: str = ""
    out_channels: int = 0
    kernel: int = 0
    in_features: int = 0
    out_features: int = 0
    keep: float = DROPOUT_KEEP


@dataclass(frozen=True)
class GraphSpec:
    layers: tuple[Layer, ...]
    input_shape: tuple[int, int, int] = INPUT_SHAPE


def build_skeleton(act: str, drop: bool, pool: bool, ks: int, n_conv: int, n_fc: int) -> GraphSpec:
    """Assemble the graph spec for one attribute combination."""
    if act not in ACTIVATIONS:
        raise ConfigError(f"unknown activation {act!r}")
    if ks not in CONV_WIDTHS:
        raise ConfigError(f"unsupported kernel size {ks}")
    if n_conv not in (2, 3, 4) or n_fc not in (2, 3, 4):
        raise ConfigError(f"block counts out of range: n_conv={n_conv}, n_fc={n_fc}")

    layers: list[Layer] = []
    c, h, w = INPUT_SHAPE
    for i in range(n_conv):
        width = CONV_WIDTHS[ks][i]
        layers.append(Layer(name=f"conv{i + 1}", kind="conv", out_channels=width, kernel=ks))
        c = width
        if pool:
            if h // 2 >= 1 and w // 2 >= 1:
                layers.append(Layer(name=f"pool{i + 1}", kind="pool"))
                h, w = h // 2, w // 2
            # else: pooling would erase the feature map; skip for this block
        layers.append(Layer(name=f"act{i + 1}", kind="act", act=act))

    flat = c * h * w
    layers.append(Layer(name="flatten", kind="flatten", in_features=flat))
    width_in = flat
    for j in range(n_fc):
        layers.append(
            Layer(name=f"fc{j + 1}", kind="linear", in_features=width_in, out_features=FC_WIDTH)
        )
        layers.append(Layer(name=f"fcact{j + 1}", kind="act", act=act))
        if drop:
            layers.append(Layer(name=f"drop{j + 1}", kind="drop", keep=DROPOUT_KEEP))
        width_in = FC_WIDTH
    layers.append(Layer(name="clf", kind="linear", in_features=width_in, out_features=N_CLASSES))
    return GraphSpec(layers=tuple(layers))


def param_shapes(graph: GraphSpec) -> dict[str, tuple[int, ...]]:
    """Parameter name -> shape, in layer order."""
    shapes: dict[str, tuple[int, ...]] = {}
    c = graph.input_shape[0]
    for layer in graph.layers:
        if layer.kind == "conv":
            shapes[f"{layer.name}.w"] = (layer.out_channels, c, layer.kernel, layer.kernel)
            shapes[f"{layer.name}.b"] = (layer.out_channels,)
            c = layer.out_channels
        elif layer.kind == "linear":
            shapes[f"{layer.name}.w"] = (layer.in_features, layer.out_features)
            shapes[f"{layer.name}.b"] = (layer.out_features,)
        elif layer.kind == "act" and layer.act == "prelu":
            shapes[f"{layer.name}.slope"] = (1,)
    return shapes


def count_params(graph: GraphSpec) -> int:
    """Exact trainable scalar count of the built skeleton."""
    return sum(int(np.prod(s)) for s in param_shapes(graph).values())


def init_params(graph: GraphSpec, seed: int) -> dict[str, Tensor]:
    """Uniform fan-in init (bound 1/sqrt(fan_in)), seeded per model.

    One deterministic sweep in layer order, weight then bias, both drawn
    with the weight's fan-in bound.
    """
    rng = np.random.default_rng(seed)
    params: dict[str, Tensor] = {}
    c = graph.input_shape[0]
    for layer in graph.layers:
        if layer.kind == "conv":
            fan_in = c * layer.kernel * layer.kernel
            bound = 1.0 / np.sqrt(fan_in)
            wshape = (layer.out_channels, c, layer.kernel, layer.kernel)
            params[f"{layer.name}.w"] = Tensor(
                rng.uniform(-bound, bound, wshape).astype(np.float32), requires_grad=True
            )
            params[f"{layer.name}.b"] = Tensor(
                rng.uniform(-bound, bound, (layer.out_channels,)).astype(np.float32),
                requires_grad=True,
            )
            c = layer.out_channels
        elif layer.kind == "linear":
            bound = 1.0 / np.sqrt(layer.in_features)
            params[f"{layer.name}.w"] = Tensor(
                rng.uniform(-bound, bound, (layer.in_features, layer.out_features)).astype(
                    np.float32
                ),
                requires_grad=True,
            )
            params[f"{layer.name}.b"] = Tensor(
                rng.uniform(-bound, bound, (layer.out_features,)).astype(np.float32),
                requires_grad=True,
            )
        elif layer.kind == "act" and layer.act == "prelu":
            params[f"{layer.name}.slope"] = Tensor(
                np.full((1,), PRELU_INIT, dtype=np.float32), requires_grad=True
            )
    return params


def _apply_act(tape: Tape | None, layer: Layer, params: dict[str, Tensor], x: Tensor) -> Tensor:
    if layer.act == "relu":
        return ad.relu(tape, x)
    if layer.act == "prelu":
        return ad.prelu(tape, x, params[f"{layer.name}.slope"])
    if layer.act == "elu":
        return ad.elu(tape, x)
    if layer.act == "tanh":
        return ad.tanh(tape, x)
    raise ConfigError(f"layer {layer.name}: unknown activation {layer.act!r}")


def forward(
    graph: GraphSpec,
    params: dict[str, Tensor],
    x: Tensor,
    mode: str = "eval",
    tape: Tape | None = None,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Run the graph, returning class-score logits [B, 10].

    In eval mode dropout layers are skipped entirely (inverted scaling makes
    that exact) and nothing is recorded. Train mode requires an rng for the
    dropout masks when the graph contains dropout layers.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown forward mode {mode!r}")
    if x.data.ndim != 4 or x.shape[1:] != graph.input_shape:
        raise ShapeError(
            f"input: expected [B, {', '.join(map(str, graph.input_shape))}], got {x.shape}"
        )
    train = mode == "train"
    out = x
    for layer in graph.layers:
        try:
            if layer.kind == "conv":
                out = ad.conv2d(tape, out, params[f"{layer.name}.w"], params[f"{layer.name}.b"])
            elif layer.kind == "pool":
                out = ad.maxpool2(tape, out)
            elif layer.kind == "act":
                out = _apply_act(tape, layer, params, out)
            elif layer.kind == "flatten":
                out = ad.reshape(tape, out, (out.shape[0], layer.in_features))
            elif layer.kind == "linear":
                out = ad.linear(tape, out, params[f"{layer.name}.w"], params[f"{layer.name}.b"])
            elif layer.kind == "drop":
                if train:
                    if rng is None:
                        raise ConfigError(f"layer {layer.name}: train mode needs an rng for dropout")
                    out = ad.dropout(tape, out, layer.keep, rng)
                # eval: identity
            else:
                raise ConfigError(f"layer {layer.name}: unknown layer tag {layer.kind!r}")
        except ShapeError as e:
            raise ShapeError(f"layer {layer.name}: {e}") from None
    return out


def predict_probs(graph: GraphSpec, params: dict[str, Tensor], images: np.ndarray) -> np.ndarray:
    """Eval-mode softmax outputs for a raw [B,1,28,28] image array."""
    logits = forward(graph, params, Tensor(images), mode="eval", tape=None)
    return ad.softmax_rows(logits.data)
