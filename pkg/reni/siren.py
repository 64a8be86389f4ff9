#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
SIREN Module

Sine-activated conditional MLP (the neural field f) with exact reverse-mode
gradients. The network is a fixed chain

    h_0 = concat(dir_feat, cond_feat)
    h_{i+1} = sin(omega_0 (W_i h_i + b_i))      for the L sine layers
    out = W_L h_L + b_L                         linear output, no clamp

so each layer's backward pass is written out by hand instead of using a
general autodiff tape. Everything runs in float64.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from reni.equivariant.base import InvariantFeatures
from reni.utils.validation import ValidationError

LOGGER = logging.getLogger(__name__)

DEFAULT_OMEGA0 = 30.0
OUTPUT_WIDTH = 3


@dataclass
class FieldParams:
    """
    Weights and biases of the sine MLP.

    Attributes:
        weights (List[np.ndarray]): L + 1 matrices of shape (out, in).
        biases (List[np.ndarray]): L + 1 vectors.
        omega0 (float): Frequency scale of every sine layer.
    """
    weights: List[np.ndarray] = field(repr=False)
    biases: List[np.ndarray] = field(repr=False)
    omega0: float = DEFAULT_OMEGA0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or len(self.weights) < 1:
            raise ValidationError("FieldParams needs matching, non-empty weight and bias lists")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValidationError(f"Layer {i} has weight {w.shape} and bias {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValidationError(f"Layer {i} input {w.shape[1]} does not chain from {self.weights[i - 1].shape[0]}")

    @property
    def num_layers(self) -> int:
        """Number of sine layers L."""
        return len(self.weights) - 1

    @property
    def hidden_width(self) -> int:
        return self.weights[0].shape[0] if self.num_layers else 0

    @property
    def input_width(self) -> int:
        return self.weights[0].shape[1]

    def arrays(self) -> List[np.ndarray]:
        """All parameter arrays in a fixed order (weights then biases per layer)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def copy(self) -> "FieldParams":
        return FieldParams([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.omega0)


@dataclass
class FieldGradients:
    """Gradients of a scalar loss w.r.t. parameters and input features."""
    weights: List[np.ndarray] = field(repr=False)
    biases: List[np.ndarray] = field(repr=False)
    dir_feat: np.ndarray = field(repr=False)
    cond_feat: np.ndarray = field(repr=False)

    def arrays(self) -> List[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out


def init_params(num_layers: int, hidden_width: int, input_width: int, seed: int,
                omega0: float = DEFAULT_OMEGA0, output_width: int = OUTPUT_WIDTH) -> FieldParams:
    """
    SIREN initialization.

    First layer weights ~ U(-1/fan_in, 1/fan_in); later layers (including the
    linear output) ~ U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0); biases
    ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    Args:
        num_layers (int): Number of sine layers L (>= 1).
        hidden_width (int): Width of every sine layer.
        input_width (int): Length of concat(dir_feat, cond_feat).
        seed (int): Seed of the generator; equal seeds give equal parameters.
        omega0 (float): Frequency scale.
        output_width (int): Output channels.

    Returns:
        FieldParams: Freshly initialized parameters.
    """
    if num_layers < 1 or hidden_width < 1 or input_width < 1:
        raise ValidationError(
            f"Invalid network shape layers={num_layers} width={hidden_width} input={input_width}"
        )
    rng = np.random.default_rng(seed)
    sizes = [input_width] + [hidden_width] * num_layers + [output_width]
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        bound = 1.0 / fan_in if i == 0 else np.sqrt(6.0 / fan_in) / omega0
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bias_bound = 1.0 / np.sqrt(fan_in)
        biases.append(rng.uniform(-bias_bound, bias_bound, size=fan_out))
    LOGGER.debug(f"Initialized SIREN {sizes} with omega0={omega0}, seed={seed}")
    return FieldParams(weights, biases, float(omega0))


def _check_width(params: FieldParams, feats: InvariantFeatures) -> None:
    if feats.width != params.input_width:
        raise ValidationError(f"Feature width {feats.width} does not match network input width {params.input_width}")


def forward(params: FieldParams, feats: InvariantFeatures, return_cache: bool = False):
    """
    Evaluate the field for every direction in feats.

    Args:
        params (FieldParams): Network parameters.
        feats (InvariantFeatures): Features with P directions.
        return_cache (bool): Also return the activations needed by backward.

    Returns:
        np.ndarray: (P, 3) normalized log-HDR output, or (output, cache).
    """
    _check_width(params, feats)
    h = feats.stacked()
    activations = [h]
    phases = []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        phase = params.omega0 * (h @ w.T + b)
        h = np.sin(phase)
        phases.append(phase)
        activations.append(h)
    out = h @ params.weights[-1].T + params.biases[-1]
    if return_cache:
        return out, (activations, phases)
    return out


def backward(params: FieldParams, feats: InvariantFeatures, upstream_grad: np.ndarray,
             cache: Optional[Tuple[list, list]] = None) -> FieldGradients:
    """
    Reverse-mode gradients of sum(upstream_grad * output).

    Args:
        params (FieldParams): Network parameters.
        feats (InvariantFeatures): Features used in the forward pass.
        upstream_grad (np.ndarray): dL/d output of shape (P, 3).
        cache: Activations from forward(..., return_cache=True); recomputed if None.

    Returns:
        FieldGradients: dL/dW, dL/db per layer, dL/d dir_feat (P, a) and
        dL/d cond_feat (b,) summed over directions.
    """
    if cache is None:
        _, cache = forward(params, feats, return_cache=True)
    activations, phases = cache
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)
    if upstream_grad.shape != (feats.num_directions, params.weights[-1].shape[0]):
        raise ValidationError(f"Upstream gradient has shape {upstream_grad.shape}")

    n_layers = len(params.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers

    g = upstream_grad
    grad_w[-1] = g.T @ activations[-1]
    grad_b[-1] = g.sum(axis=0)
    g = g @ params.weights[-1]
    for i in range(n_layers - 2, -1, -1):
        g = g * params.omega0 * np.cos(phases[i])
        grad_w[i] = g.T @ activations[i]
        grad_b[i] = g.sum(axis=0)
        g = g @ params.weights[i]

    n_dir = feats.dir_feat.shape[1]
    return FieldGradients(grad_w, grad_b, g[:, :n_dir], g[:, n_dir:].sum(axis=0))
