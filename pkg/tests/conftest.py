import numpy as np
import pytest

from ghostlayer.network import Layer, NetworkSpec, WeightSet
from ghostlayer.ops import ConvKernel


def naive_conv2d(x, kernel, pad=0, stride=1):
    """Five-nested-loop direct cross-correlation, the independent oracle."""
    b, c, h, w = x.shape
    o, ci, kh, kw = kernel.weights.shape
    assert c == ci
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((b, o, oh, ow))
    for n in range(b):
        for f in range(o):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for ch in range(c):
                        patch = xp[n, ch, i * stride : i * stride + kh, j * stride : j * stride + kw]
                        acc += float(np.sum(patch * kernel.weights[f, ch].astype(np.float64)))
                    out[n, f, i, j] = acc + float(kernel.bias[f])
    return out


def finite_difference(f, x, coords, step=1e-3):
    """Central finite differences of scalar f at the given flat coords."""
    flat = x.reshape(-1).astype(np.float64)
    grads = []
    for idx in coords:
        xp = flat.copy()
        xp[idx] += step
        xp = xp.reshape(x.shape).astype(x.dtype)
        xm = flat.copy()
        xm[idx] -= step
        xm = xm.reshape(x.shape).astype(x.dtype)
        # divide by the step actually realized after any float32 rounding
        actual = float(xp.reshape(-1)[idx]) - float(xm.reshape(-1)[idx])
        grads.append((f(xp) - f(xm)) / actual)
    return np.array(grads)


def naive_forward(x, spec, weights, taps):
    """Independent float64 forward pass: naive conv, relu, average pool.

    Mirrors the network contract (pad k//2, stride 1, 2x2 average pool)
    without sharing any code with the engine's im2col path.
    """
    out = x.astype(np.float64)
    feats = {}
    for layer in spec.layers:
        if layer.kind == "conv":
            k = weights.kernels[layer.name]
            pad = k.weights.shape[2] // 2
            out = naive_conv2d(out, k, pad=pad)
        elif layer.kind == "relu":
            out = np.maximum(out, 0.0)
        else:
            b, c, h, w = out.shape
            oh, ow = h // 2, w // 2
            out = out[:, :, : 2 * oh, : 2 * ow].reshape(b, c, oh, 2, ow, 2).mean(axis=(3, 5))
        if layer.name in taps:
            feats[layer.name] = out
        if len(feats) == len(taps):
            break
    return feats


def rel_err(a, b, floor=1e-6):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def random_kernel(rng, out_ch, in_ch, kh=3, kw=3, bias=True):
    w = rng.standard_normal((out_ch, in_ch, kh, kw)).astype(np.float32)
    b = rng.standard_normal(out_ch).astype(np.float32) if bias else np.zeros(out_ch, np.float32)
    return ConvKernel(w, b)


def small_net(rng, channels=(4, 6, 8), pool_after=(False, True, False), scale=0.5):
    """A tiny conv/relu(/pool) chain for gradient and descent tests."""
    layers = []
    kernels = {}
    in_ch = 3
    for i, out_ch in enumerate(channels):
        name = f"conv{i + 1}_1"
        layers.append(Layer(name, "conv"))
        layers.append(Layer(f"relu{i + 1}_1", "relu"))
        w = (scale * rng.standard_normal((out_ch, in_ch, 3, 3))).astype(np.float32)
        b = (0.1 * rng.standard_normal(out_ch)).astype(np.float32)
        kernels[name] = ConvKernel(w, b)
        if pool_after[i]:
            layers.append(Layer(f"pool{i + 1}", "pool"))
        in_ch = out_ch
    spec = NetworkSpec(tuple(layers), "average")
    weights = WeightSet(kernels, np.zeros(3, dtype=np.float32))
    return spec, weights


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
