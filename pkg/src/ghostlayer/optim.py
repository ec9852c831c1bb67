"""First-order minimization of the transfer cost over image pixels.

The network is frozen; the only variable is the 1x3xHxW image tensor.
Pixels are unconstrained during optimization and clamped only at export.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigurationError, NumericError
from .losses import LossBreakdown, LossConfig, GramMatrix, total_loss
from .network import FeatureMap, NetworkSpec, WeightSet, backward_to_input, forward_features
from .ops import Tensor


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "adam"
    learning_rate: float = 1.0
    iterations: int = 10000
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    init: str = "noise"
    checkpoint_every: int = 100

    def __post_init__(self):
        if self.method not in ("adam", "sgd"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning rate must be positive")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigurationError("beta1 and beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.init not in ("noise", "content"):
            raise ConfigurationError(f"unknown init {self.init!r}")


@dataclass
class OptimizationState:
    x_hat: Tensor
    step: int = 0
    m: Tensor | None = None
    v: Tensor | None = None
    loss_trace: list[tuple[int, LossBreakdown]] = field(default_factory=list)


def init_state(config: OptimizerConfig, content_image: Tensor, pixel_mean: np.ndarray) -> OptimizationState:
    """Start from the content image or from seeded uniform noise.

    content_image is already mean-subtracted; noise is drawn uniformly over
    the valid pixel range [0, 255] and shifted by the same mean.
    """
    if content_image.ndim != 4 or content_image.shape[0] != 1 or content_image.shape[1] != 3:
        raise ConfigurationError(f"content image must be 1x3xHxW, got {content_image.shape}")
    if config.init == "content":
        x0 = content_image.copy()
    else:
        rng = np.random.default_rng(config.seed)
        noise = rng.uniform(0.0, 255.0, size=content_image.shape)
        x0 = (noise - np.asarray(pixel_mean, dtype=np.float64)[None, :, None, None]).astype(
            np.float32
        )
    return OptimizationState(x_hat=x0)


def step(state: OptimizationState, pixel_grad: Tensor, config: OptimizerConfig) -> OptimizationState:
    """One in-place update; returns the same state for convenience."""
    if pixel_grad.shape != state.x_hat.shape:
        raise ConfigurationError(
            f"gradient shape {pixel_grad.shape} != image shape {state.x_hat.shape}"
        )
    if not np.all(np.isfinite(pixel_grad)):
        raise NumericError(f"non-finite gradient at step {state.step}")
    lr = np.float32(config.learning_rate)
    if config.method == "sgd":
        state.x_hat -= lr * pixel_grad
    else:
        if state.m is None:
            state.m = np.zeros_like(state.x_hat)
            state.v = np.zeros_like(state.x_hat)
        t = state.step + 1
        b1, b2 = np.float32(config.beta1), np.float32(config.beta2)
        state.m = b1 * state.m + (1 - b1) * pixel_grad
        state.v = b2 * state.v + (1 - b2) * pixel_grad * pixel_grad
        m_hat = state.m / np.float32(1 - config.beta1**t)
        v_hat = state.v / np.float32(1 - config.beta2**t)
        state.x_hat -= lr * m_hat / (np.sqrt(v_hat) + np.float32(config.epsilon))
    state.step += 1
    if not np.all(np.isfinite(state.x_hat)):
        raise NumericError(f"image became non-finite at step {state.step}")
    return state


def run(
    weights: WeightSet,
    content_features: dict[str, FeatureMap],
    style_grams: dict[str, list[GramMatrix]],
    loss_config: LossConfig,
    opt_config: OptimizerConfig,
    content_image: Tensor,
    spec: NetworkSpec | None = None,
    on_checkpoint: Callable[[int, LossBreakdown], None] | None = None,
    full_trace: list[float] | None = None,
) -> OptimizationState:
    """Forward -> loss -> backward -> step for the configured iterations.

    Checkpoints (step 0, every checkpoint_every, and the final step) are
    appended to state.loss_trace; if full_trace is given, c_tot of every
    iteration is appended to it as well.
    """
    taps = loss_config.tap_names()
    state = init_state(opt_config, content_image, weights.preprocess_mean)

    def checkpoint_due(s: int) -> bool:
        return s % opt_config.checkpoint_every == 0 or s == opt_config.iterations

    for t in range(opt_config.iterations):
        features, ctx = forward_features(state.x_hat, weights, taps, spec)
        breakdown, layer_grads = total_loss(
            loss_config, features, content_features, style_grams
        )
        if full_trace is not None:
            full_trace.append(breakdown.c_tot)
        if checkpoint_due(t):
            state.loss_trace.append((t, breakdown))
            if on_checkpoint:
                on_checkpoint(t, breakdown)
        pixel_grad = backward_to_input(layer_grads, ctx)
        step(state, pixel_grad, opt_config)

    features, _ = forward_features(state.x_hat, weights, taps, spec)
    breakdown, _ = total_loss(loss_config, features, content_features, style_grams)
    if full_trace is not None:
        full_trace.append(breakdown.c_tot)
    state.loss_trace.append((state.step, breakdown))
    if on_checkpoint:
        on_checkpoint(state.step, breakdown)
    return state
