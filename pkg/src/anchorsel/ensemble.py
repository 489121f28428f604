"""Confidence-weighted fusion of prediction sources and target building.

Three sources emit per-view logits over the same class set: the
learnable prompt, the text anchors, and the image prototypes. Sources
are blended per view by their softmax confidence, the blended
distributions are averaged across the selected views, and temperature
sharpening produces the adaptation target. The target is fixed — no
gradient flows into it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidConfigError,
    NonFiniteError,
    softmax,
)

SOURCE_NAMES = ("prompt", "text", "image")


@dataclass(frozen=True)
class SourceLogits:
    """Per-view class logits from each available prediction source.

    Every array is (B_sel, C): tau-scaled cosine similarities of each
    selected view to the source's class representations. ``z_text`` and
    ``z_image`` may be None when the corresponding source is disabled
    (ablation runs); ``z_prompt`` is always present.
    """

    z_prompt: np.ndarray
    z_text: np.ndarray | None = None
    z_image: np.ndarray | None = None

    def __post_init__(self) -> None:
        shape = None
        for name, z in zip(SOURCE_NAMES, (self.z_prompt, self.z_text, self.z_image)):
            if z is None:
                continue
            z = np.asarray(z, dtype=np.float64)
            if z.ndim != 2:
                raise DimensionMismatchError(f"z_{name} must be 2-D (views, classes)")
            if shape is None:
                shape = z.shape
            elif z.shape != shape:
                raise DimensionMismatchError(
                    f"z_{name} shape {z.shape} differs from {shape}"
                )
            if not np.isfinite(z).all():
                raise NonFiniteError(f"z_{name} contains non-finite values")
            object.__setattr__(self, f"z_{name}", z)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(
            n for n, z in zip(SOURCE_NAMES, (self.z_prompt, self.z_text, self.z_image))
            if z is not None
        )

    def stack(self) -> np.ndarray:
        """Present sources stacked to (K, B_sel, C) in canonical order."""
        return np.stack(
            [z for z in (self.z_prompt, self.z_text, self.z_image) if z is not None]
        )


@dataclass(frozen=True)
class EnsembleTarget:
    """Sharpened target distribution plus the weights that produced it."""

    q_tilde: np.ndarray  # (C,)
    per_view_weights: np.ndarray  # (B_sel, K)


def confidence_weights(
    logits: SourceLogits, epsilon: float = 1e-8, simple: bool = False
) -> np.ndarray:
    """Per-view source weights w_k = gamma_k / (sum_j gamma_j + epsilon).

    gamma_k is source k's maximum softmax probability for that view.
    Returns (B_sel, K) with K the number of present sources. With
    ``simple=True`` every weight is exactly 1/K. A single present source
    always gets weight exactly 1.0.
    """
    if epsilon <= 0:
        raise InvalidConfigError(f"epsilon must be > 0, got {epsilon}")
    stacked = logits.stack()  # (K, V, C)
    k, v, _ = stacked.shape
    if simple or k == 1:
        return np.full((v, k), 1.0 / k, dtype=np.float64)
    gamma = softmax(stacked).max(axis=2)  # (K, V)
    weights = gamma / (gamma.sum(axis=0, keepdims=True) + epsilon)
    return weights.T  # (V, K)


def ensemble_logits(logits: SourceLogits, weights: np.ndarray) -> np.ndarray:
    """Per-view weighted sum of the source logits: z_ens (B_sel, C)."""
    stacked = logits.stack()  # (K, V, C)
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (stacked.shape[1], stacked.shape[0]):
        raise DimensionMismatchError(
            f"weights shape {w.shape} != (views={stacked.shape[1]}, sources={stacked.shape[0]})"
        )
    return np.einsum("vk,kvc->vc", w, stacked)


def sharpen(p: np.ndarray, temperature: float = 0.3) -> np.ndarray:
    """Temperature-sharpen a distribution: p^(1/T), renormalized.

    Computed in log space for stability; zero entries stay zero.
    """
    if temperature <= 0:
        raise InvalidConfigError(
            f"sharpening temperature must be > 0, got {temperature}"
        )
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
    scaled = logp / temperature
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    out = np.exp(scaled)
    return out / out.sum(axis=-1, keepdims=True)


def build_target(z_ens: np.ndarray, temperature: float = 0.3) -> np.ndarray:
    """Sharpened mean of the per-view ensemble distributions.

    Softmax each view's ensemble logits, average over views, sharpen.
    The result is treated as a constant during adaptation.
    """
    z = np.asarray(z_ens, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0:
        raise EmptyInputError("z_ens must be (B_sel >= 1, C)")
    mean_probs = softmax(z).mean(axis=0)
    return sharpen(mean_probs, temperature)


def kl_loss(q_tilde: np.ndarray, p_v: np.ndarray) -> float:
    """KL(q_tilde || p_v) with natural log; q-zero terms contribute zero."""
    q = np.asarray(q_tilde, dtype=np.float64)
    p = np.asarray(p_v, dtype=np.float64)
    if q.shape != p.shape:
        raise DimensionMismatchError(f"shape mismatch {q.shape} vs {p.shape}")
    mask = q > 0
    with np.errstate(divide="ignore"):  # p=0 on q's support is caught below
        val = float(np.sum(q[mask] * (np.log(q[mask]) - np.log(p[mask]))))
    if not np.isfinite(val):
        raise NonFiniteError("KL divergence is not finite")
    return val
