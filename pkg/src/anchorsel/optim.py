"""Decoupled-weight-decay adaptive-moment optimizer for the prompt vector.

Functional style: each step returns fresh (params, state). State is
created zeroed at every test-sample boundary, matching the per-sample
prompt reset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InvalidConfigError, NonFiniteError
from .encoder import PromptParams


@dataclass
class AdamWState:
    m: np.ndarray  # first moment
    v: np.ndarray  # second moment
    t: int = 0  # step count

    @classmethod
    def init(cls, dim: int) -> "AdamWState":
        return cls(m=np.zeros(dim, dtype=np.float64), v=np.zeros(dim, dtype=np.float64))


def adamw_step(
    state: AdamWState,
    params: PromptParams,
    grad: np.ndarray,
    lr: float = 0.003,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    weight_decay: float = 0.0,
) -> tuple[PromptParams, AdamWState]:
    """One bias-corrected update; weight decay is applied to the
    parameters directly, not mixed into the gradient."""
    if lr <= 0:
        raise InvalidConfigError(f"lr must be > 0, got {lr}")
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise InvalidConfigError(f"betas must lie in [0, 1), got ({beta1}, {beta2})")
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != params.theta.shape:
        raise InvalidConfigError(f"grad shape {g.shape} != {params.theta.shape}")
    if not np.isfinite(g).all():
        raise NonFiniteError("non-finite gradient passed to optimizer")

    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)

    theta = params.theta * (1.0 - lr * weight_decay)
    theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return PromptParams(theta=theta), AdamWState(m=m, v=v, t=t)
