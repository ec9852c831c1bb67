"""VGG-19-shaped feature extractor: topology, weight-file I/O, tapped
forward pass, and backpropagation of layer gradients to the input pixels.

The weight file format ("GLW1") is a flat little-endian stream defined in
``load_weights``/``save_weights``; it carries the per-channel preprocessing
mean alongside the kernels so checkpoint-derived constants travel together.
Only the convolutional trunk exists: the fully-connected layers of the
original classifier are never tapped and are omitted.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FormatError, ValidationError
from .ops import (
    ConvKernel,
    PoolContext,
    Tensor,
    conv2d_backward_input,
    conv2d_forward,
    pool2d_backward,
    pool2d_forward,
    relu_backward,
    relu_forward,
)

GLW_MAGIC = b"GLW1"
GLW_VERSION = 1

# Conv channel plan per block: (block, n_convs, out_channels)
_VGG19_BLOCKS = [(1, 2, 64), (2, 2, 128), (3, 4, 256), (4, 4, 512), (5, 4, 512)]


@dataclass(frozen=True)
class Layer:
    name: str
    kind: str  # conv | relu | pool


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[Layer, ...]
    pool_mode: str = "average"

    def layer_names(self) -> list[str]:
        return [l.name for l in self.layers]

    def conv_layers(self) -> list[str]:
        return [l.name for l in self.layers if l.kind == "conv"]


def vgg19_spec(pool_mode: str = "average") -> NetworkSpec:
    """The 16-conv trunk of VGG-19 with a pool after each block."""
    layers: list[Layer] = []
    for block, n_convs, _ in _VGG19_BLOCKS:
        for i in range(1, n_convs + 1):
            layers.append(Layer(f"conv{block}_{i}", "conv"))
            layers.append(Layer(f"relu{block}_{i}", "relu"))
        layers.append(Layer(f"pool{block}", "pool"))
    return NetworkSpec(tuple(layers), pool_mode)


def vgg19_conv_shapes() -> dict[str, tuple[int, int, int, int]]:
    """Expected (out, in, kh, kw) for every conv layer."""
    shapes = {}
    in_ch = 3
    for block, n_convs, out_ch in _VGG19_BLOCKS:
        for i in range(1, n_convs + 1):
            shapes[f"conv{block}_{i}"] = (out_ch, in_ch, 3, 3)
            in_ch = out_ch
    return shapes


@dataclass(frozen=True)
class WeightSet:
    kernels: dict[str, ConvKernel]
    preprocess_mean: np.ndarray  # 3 float32, channel order matches images
    format_version: int = GLW_VERSION


@dataclass(frozen=True)
class FeatureMap:
    """Activations of one layer: values (1, N_l, h, w)."""

    layer_name: str
    values: Tensor

    @property
    def n_l(self) -> int:
        return self.values.shape[1]

    @property
    def m_l(self) -> int:
        return self.values.shape[2] * self.values.shape[3]


def validate_weights(weights: WeightSet, spec: NetworkSpec) -> None:
    prev_out = 3
    for name in spec.conv_layers():
        kernel = weights.kernels.get(name)
        if kernel is None:
            raise ValidationError(f"weight set is missing conv layer {name!r}")
        if kernel.in_channels != prev_out:
            raise ValidationError(
                f"layer {name!r}: expected {prev_out} input channels, "
                f"weight file has {kernel.in_channels}"
            )
        prev_out = kernel.out_channels


def save_weights(weights: WeightSet, path) -> None:
    """Write the GLW1 binary weight file."""
    with open(path, "wb") as fh:
        fh.write(GLW_MAGIC)
        fh.write(struct.pack("<I", weights.format_version))
        fh.write(np.asarray(weights.preprocess_mean, dtype="<f4").tobytes())
        fh.write(struct.pack("<I", len(weights.kernels)))
        for name, kernel in weights.kernels.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<4I", *kernel.weights.shape))
            fh.write(np.ascontiguousarray(kernel.weights, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(kernel.bias, dtype="<f4").tobytes())


def load_weights(path, spec: NetworkSpec | None = None) -> WeightSet:
    """Read and fully validate a GLW1 weight file."""
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"weight file truncated while reading {what}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    magic = take(4, "magic")
    if magic != GLW_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {GLW_MAGIC!r}")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != GLW_VERSION:
        raise FormatError(f"unsupported weight format version {version}")
    mean = np.frombuffer(take(12, "preprocess mean"), dtype="<f4").copy()
    (layer_count,) = struct.unpack("<I", take(4, "layer count"))
    kernels: dict[str, ConvKernel] = {}
    for _ in range(layer_count):
        (name_len,) = struct.unpack("<H", take(2, "layer name length"))
        name = take(name_len, "layer name").decode("utf-8")
        out, cin, kh, kw = struct.unpack("<4I", take(16, f"{name} dims"))
        n_weights = out * cin * kh * kw
        w = np.frombuffer(take(4 * n_weights, f"{name} weights"), dtype="<f4")
        b = np.frombuffer(take(4 * out, f"{name} biases"), dtype="<f4")
        if name in kernels:
            raise ValidationError(f"duplicate layer {name!r} in weight file")
        kernels[name] = ConvKernel(
            w.reshape(out, cin, kh, kw).copy(), b.copy()
        )
    if pos != len(data):
        raise ValidationError(
            f"{len(data) - pos} trailing bytes after the last layer"
        )
    weights = WeightSet(kernels, mean, version)
    validate_weights(weights, spec or vgg19_spec())
    return weights


def random_weights(seed: int = 0, spec: NetworkSpec | None = None) -> WeightSet:
    """Deterministic He-scaled random weights for the full topology.

    Lets the pipeline run end to end without a converted checkpoint
    (smoke tests, demos); the features are meaningless but well scaled.
    """
    spec = spec or vgg19_spec()
    rng = np.random.default_rng(seed)
    kernels: dict[str, ConvKernel] = {}
    for name, (out, cin, kh, kw) in vgg19_conv_shapes().items():
        if name not in spec.conv_layers():
            continue
        std = np.sqrt(2.0 / (cin * kh * kw))
        w = rng.normal(0.0, std, size=(out, cin, kh, kw)).astype(np.float32)
        b = np.zeros(out, dtype=np.float32)
        kernels[name] = ConvKernel(w, b)
    mean = np.array([123.68, 116.779, 103.939], dtype=np.float32)
    return WeightSet(kernels, mean)


@dataclass
class ForwardContext:
    """Saved intermediates from one forward pass, consumed by
    backward_to_input exactly once."""

    input_shape: tuple[int, int, int, int]
    steps: list[tuple[Layer, object]] = field(default_factory=list)
    tapped: dict[str, FeatureMap] = field(default_factory=dict)


def forward_features(
    x: Tensor,
    weights: WeightSet,
    taps: list[str],
    spec: NetworkSpec | None = None,
) -> tuple[dict[str, FeatureMap], ForwardContext]:
    """Run the trunk as far as the deepest tap and return F_l per tap.

    x is a mean-subtracted 1x3xHxW tensor.
    """
    spec = spec or vgg19_spec()
    if x.ndim != 4 or x.shape[0] != 1 or x.shape[1] != 3:
        raise ConfigurationError(f"input must be 1x3xHxW, got {x.shape}")
    known = set(spec.layer_names())
    for tap in taps:
        if tap not in known:
            raise ConfigurationError(f"unknown tap layer {tap!r}")
    ctx = ForwardContext(input_shape=x.shape)
    if not taps:
        return {}, ctx
    wanted = set(taps)
    deepest = max(spec.layer_names().index(t) for t in taps)
    out = x
    for layer in spec.layers[: deepest + 1]:
        if layer.kind == "conv":
            kernel = weights.kernels[layer.name]
            kh = kernel.weights.shape[2]
            saved = (kernel, out.shape)
            out = conv2d_forward(out, kernel, pad=kh // 2, stride=1)
        elif layer.kind == "relu":
            saved = out
            out = relu_forward(out)
        else:
            out, saved = pool2d_forward(out, spec.pool_mode)
        ctx.steps.append((layer, saved))
        if layer.name in wanted:
            ctx.tapped[layer.name] = FeatureMap(layer.name, out)
    return dict(ctx.tapped), ctx


def backward_to_input(loss_grads: dict[str, Tensor], ctx: ForwardContext) -> Tensor:
    """Accumulate d(loss)/d(input) from per-tap gradients d(loss)/dF_l."""
    for name, grad in loss_grads.items():
        if name not in ctx.tapped:
            raise ConfigurationError(f"gradient supplied for untapped layer {name!r}")
        expected = ctx.tapped[name].values.shape
        if grad.shape != expected:
            raise ConfigurationError(
                f"gradient for {name!r} has shape {grad.shape}, "
                f"feature map has {expected}"
            )
    grad: Tensor | None = None
    for layer, saved in reversed(ctx.steps):
        if layer.name in loss_grads:
            inject = loss_grads[layer.name].astype(np.float32, copy=False)
            grad = inject.copy() if grad is None else grad + inject
        if grad is None:
            continue
        if layer.kind == "conv":
            kernel, in_shape = saved
            kh = kernel.weights.shape[2]
            grad = conv2d_backward_input(grad, kernel, in_shape, pad=kh // 2, stride=1)
        elif layer.kind == "relu":
            grad = relu_backward(grad, saved)
        else:
            grad = pool2d_backward(grad, saved)
    if grad is None:
        return np.zeros(ctx.input_shape, dtype=np.float32)
    return grad
