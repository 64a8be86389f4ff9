#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
Optimizer Module

Adam with bias-corrected moments and an exponentially decaying learning rate.
Training keeps one AdamState for the network and one per latent distribution.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from reni.utils.validation import ValidationError, validate_positive

LOGGER = logging.getLogger(__name__)


@dataclass
class AdamState:
    """
    Moment accumulators for a fixed list of parameter arrays.

    Attributes:
        m (List[np.ndarray]): First moments.
        v (List[np.ndarray]): Second moments.
        t (int): Completed steps.
    """
    m: List[np.ndarray] = field(repr=False)
    v: List[np.ndarray] = field(repr=False)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0, beta1, beta2, eps)


@dataclass(frozen=True)
class LrSchedule:
    """Geometric interpolation from lr_start at step 0 to lr_end at total_steps."""
    lr_start: float
    lr_end: float
    total_steps: int

    def __post_init__(self):
        validate_positive("lr_start", self.lr_start)
        validate_positive("lr_end", self.lr_end)
        if int(self.total_steps) < 1:
            raise ValidationError(f"total_steps must be a positive integer, got {self.total_steps}")


def lr_at(schedule: LrSchedule, step: float) -> float:
    """Learning rate lr_start (lr_end / lr_start)^(step / total_steps)."""
    ratio = schedule.lr_end / schedule.lr_start
    return float(schedule.lr_start * ratio ** (step / schedule.total_steps))


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              lr: float) -> Tuple[Sequence[np.ndarray], AdamState]:
    """
    Apply one Adam update in place.

    Args:
        state (AdamState): Moments matching params one-to-one.
        params (Sequence[np.ndarray]): Arrays updated in place.
        grads (Sequence[np.ndarray]): Gradients with the same shapes.
        lr (float): Step size.

    Returns:
        Tuple: The (updated) params and state.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValidationError(
            f"Adam got {len(params)} params, {len(grads)} grads and {len(state.m)} moment slots"
        )
    state.t += 1
    correction1 = 1.0 - state.beta1 ** state.t
    correction2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValidationError(f"Gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params, state
