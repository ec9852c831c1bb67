"""Content cost, Gram-matrix style cost, and their weighted combination,
with analytic gradients w.r.t. the tapped feature maps.

All accumulation runs in float64; gradients are returned as float32
tensors shaped like the feature maps so they feed straight into
``backward_to_input``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .network import FeatureMap
from .ops import Tensor

DEFAULT_CONTENT_LAYER = "conv4_2"
DEFAULT_STYLE_LAYERS = ["conv1_1", "conv2_1", "conv3_1", "conv4_1", "conv5_1"]


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 10.0
    beta: float = 40.0
    content_layer: str | None = DEFAULT_CONTENT_LAYER
    style_layers: tuple[tuple[str, float], ...] = tuple(
        (name, 1.0 / len(DEFAULT_STYLE_LAYERS)) for name in DEFAULT_STYLE_LAYERS
    )

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ConfigurationError("alpha and beta must be non-negative")
        if any(w < 0 for _, w in self.style_layers):
            raise ConfigurationError("style layer weights must be non-negative")
        if self.content_layer is None and not self.style_layers:
            raise ConfigurationError(
                "at least one content or style layer must be configured"
            )

    def tap_names(self) -> list[str]:
        names = [name for name, _ in self.style_layers]
        if self.content_layer and self.content_layer not in names:
            names.append(self.content_layer)
        return names


@dataclass(frozen=True)
class GramMatrix:
    layer_name: str
    values: np.ndarray  # (N_l, N_l) float64
    n_l: int
    m_l: int


@dataclass(frozen=True)
class LossBreakdown:
    c_cont: float
    c_style: float
    c_tot: float
    per_layer_e: dict[str, float] = field(default_factory=dict)


def gram(fmap: FeatureMap) -> GramMatrix:
    """G[i][j] = sum over spatial positions of F_i . F_j."""
    f = fmap.values.reshape(fmap.n_l, fmap.m_l).astype(np.float64)
    return GramMatrix(fmap.layer_name, f @ f.T, fmap.n_l, fmap.m_l)


def content_loss(f_hat: FeatureMap, f_c: FeatureMap) -> tuple[float, Tensor]:
    """Mean squared feature difference with the 1/(N_l M_l) prefactor."""
    if f_hat.values.shape != f_c.values.shape:
        raise ConfigurationError(
            f"feature shapes differ: {f_hat.values.shape} vs {f_c.values.shape}"
        )
    norm = 1.0 / (f_hat.n_l * f_hat.m_l)
    diff = f_hat.values.astype(np.float64) - f_c.values.astype(np.float64)
    loss = norm * float(np.sum(diff * diff))
    grad = (2.0 * norm * diff).astype(np.float32)
    return loss, grad


def style_layer_error(g_hat: GramMatrix, g_s: GramMatrix, f_hat: FeatureMap) -> tuple[float, Tensor]:
    """E_l = sum((G_hat - G_s)^2) / (4 N_l^2 M_l^2) and its gradient back
    through the Gram map, evaluated at f_hat."""
    if g_hat.layer_name != g_s.layer_name:
        raise ConfigurationError(
            f"gram layer mismatch: {g_hat.layer_name!r} vs {g_s.layer_name!r}"
        )
    if g_hat.n_l != g_s.n_l:
        raise ConfigurationError(
            f"layer {g_hat.layer_name!r}: channel counts differ "
            f"({g_hat.n_l} vs {g_s.n_l})"
        )
    n, m = g_hat.n_l, g_hat.m_l
    resid = g_hat.values - g_s.values
    e_l = float(np.sum(resid * resid)) / (4.0 * n * n * m * m)
    f = f_hat.values.reshape(n, m).astype(np.float64)
    grad = (resid @ f) / (n * n * m * m)
    return e_l, grad.reshape(f_hat.values.shape).astype(np.float32)


def total_loss(
    config: LossConfig,
    features_hat: dict[str, FeatureMap],
    features_content: dict[str, FeatureMap],
    grams_style: dict[str, list[GramMatrix]],
) -> tuple[LossBreakdown, dict[str, Tensor]]:
    """Combine content and style terms into C_tot = alpha*C_cont +
    beta*C_style and the per-layer gradients ready for backward_to_input.

    grams_style maps each style layer to one Gram per style image; with
    several style images the layer's error is the sum over them.
    """
    grads: dict[str, np.ndarray] = {}
    c_cont = 0.0
    if config.content_layer is not None:
        lc = config.content_layer
        if lc not in features_hat:
            raise ConfigurationError(f"content layer {lc!r} missing from features")
        if lc not in features_content:
            raise ConfigurationError(f"content layer {lc!r} missing from content features")
        c_cont, g = content_loss(features_hat[lc], features_content[lc])
        if config.alpha != 0.0:
            grads[lc] = config.alpha * g.astype(np.float64)

    c_style = 0.0
    per_layer_e: dict[str, float] = {}
    for name, w_l in config.style_layers:
        if name not in features_hat:
            raise ConfigurationError(f"style layer {name!r} missing from features")
        if name not in grams_style:
            raise ConfigurationError(f"style layer {name!r} missing from style grams")
        f_hat = features_hat[name]
        g_hat = gram(f_hat)
        e_total = 0.0
        for g_s in grams_style[name]:
            e_l, g = style_layer_error(g_hat, g_s, f_hat)
            e_total += e_l
            scale = config.beta * w_l
            if scale != 0.0:
                grads[name] = grads.get(name, 0.0) + scale * g.astype(np.float64)
        per_layer_e[name] = e_total
        c_style += w_l * e_total

    c_tot = config.alpha * c_cont + config.beta * c_style
    breakdown = LossBreakdown(c_cont, c_style, c_tot, per_layer_e)
    return breakdown, {k: v.astype(np.float32) for k, v in grads.items()}
