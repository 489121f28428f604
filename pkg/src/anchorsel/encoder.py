"""Differentiable surrogate for a prompted class-embedding encoder.

A real prompt acts through a frozen deep text encoder. Here the prompt
is a flat parameter vector theta and the encoder is a fixed seeded
linear map into embedding space followed by L2 normalization:

    shared-offset mode:  E_c(theta) = normalize(u_c + W theta)
    linear mode:         E_c(theta) = normalize(u_c + W_c theta)

theta = 0 reproduces the base class embeddings exactly, so zero
adaptation steps equal the zero-shot classifier. All gradients are
analytic; finite differences are only used to cross-check them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    NORM_FLOOR,
    DimensionMismatchError,
    EmptyInputError,
    InvalidConfigError,
    NonFiniteError,
    ZeroVectorError,
    softmax,
)
from .ensemble import kl_loss

ENCODER_MODES = ("shared-offset", "linear")


@dataclass
class PromptParams:
    """Learnable prompt parameter vector (reset at each sample boundary)."""

    theta: np.ndarray  # (d_p,) float64

    def __post_init__(self) -> None:
        t = np.asarray(self.theta, dtype=np.float64)
        if t.ndim != 1:
            raise DimensionMismatchError("theta must be a 1-D vector")
        if not np.isfinite(t).all():
            raise NonFiniteError("theta contains non-finite values")
        self.theta = t

    @classmethod
    def zeros(cls, dim: int) -> "PromptParams":
        if dim < 1:
            raise InvalidConfigError(f"prompt dimension must be >= 1, got {dim}")
        return cls(theta=np.zeros(dim, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.theta.shape[0]

    def copy(self) -> "PromptParams":
        return PromptParams(theta=self.theta.copy())


class SurrogateEncoder:
    """Fixed map from prompt parameters to per-class unit embeddings."""

    def __init__(
        self,
        base_class_embeddings: np.ndarray,
        prompt_dim: int = 32,
        mode: str = "shared-offset",
        seed: int = 0,
    ) -> None:
        if mode not in ENCODER_MODES:
            raise InvalidConfigError(f"mode must be one of {ENCODER_MODES}, got {mode!r}")
        if prompt_dim < 1:
            raise InvalidConfigError(f"prompt_dim must be >= 1, got {prompt_dim}")
        base = np.asarray(base_class_embeddings, dtype=np.float64)
        if base.ndim != 2 or base.shape[0] < 2:
            raise DimensionMismatchError("base_class_embeddings must be (C >= 2, D)")
        norms = np.linalg.norm(base, axis=1)
        if (norms <= NORM_FLOOR).any():
            raise ZeroVectorError("zero-norm base class embedding")
        self.base = base / norms[:, None]
        self.prompt_dim = prompt_dim
        self.mode = mode
        self.seed = seed
        c, d = self.base.shape
        rng = np.random.default_rng(seed)
        scale = 1.0 / np.sqrt(prompt_dim)
        if mode == "shared-offset":
            self.projection = rng.standard_normal((d, prompt_dim)) * scale
        else:
            self.projection = rng.standard_normal((c, d, prompt_dim)) * scale

    @property
    def num_classes(self) -> int:
        return self.base.shape[0]

    @property
    def dim(self) -> int:
        return self.base.shape[1]

    def _raw(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pre-normalization class vectors v_c = u_c + (W theta) and their norms."""
        t = np.asarray(theta, dtype=np.float64)
        if t.shape != (self.prompt_dim,):
            raise DimensionMismatchError(
                f"theta shape {t.shape} != ({self.prompt_dim},)"
            )
        if self.mode == "shared-offset":
            v = self.base + self.projection @ t
        else:
            v = self.base + np.einsum("cdp,p->cd", self.projection, t)
        norms = np.linalg.norm(v, axis=1)
        if (norms <= NORM_FLOOR).any():
            bad = int(np.argmin(norms))
            raise ZeroVectorError(f"prompt drives class {bad} embedding to zero norm")
        return v, norms

    def encode(self, theta: np.ndarray) -> np.ndarray:
        """Per-class unit embeddings E_c(theta), shape (C, D)."""
        v, norms = self._raw(theta)
        return v / norms[:, None]

    def prompt_logits(self, views: np.ndarray, theta: np.ndarray, tau: float) -> np.ndarray:
        """tau-scaled cosine similarities of views to E(theta), shape (V, C)."""
        x = np.asarray(views, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise DimensionMismatchError(f"views must be (V, {self.dim})")
        xn = np.linalg.norm(x, axis=1)
        if (xn <= NORM_FLOOR).any():
            raise ZeroVectorError("zero-norm view embedding")
        return tau * (x / xn[:, None]) @ self.encode(theta).T

    def backprop_logits(
        self, views: np.ndarray, theta: np.ndarray, grad_z: np.ndarray, tau: float
    ) -> np.ndarray:
        """Chain an upstream gradient dL/dz (V, C) back to theta.

        z[v, c] = tau * x_hat_v . E_c(theta). The normalization of each
        class vector contributes the tangent projector (I - E E^T)/|v|.
        """
        x = np.asarray(views, dtype=np.float64)
        g = np.asarray(grad_z, dtype=np.float64)
        v, norms = self._raw(theta)
        e = v / norms[:, None]
        xhat = x / np.linalg.norm(x, axis=1)[:, None]
        if g.shape != (x.shape[0], self.num_classes):
            raise DimensionMismatchError(
                f"grad_z shape {g.shape} != ({x.shape[0]}, {self.num_classes})"
            )
        r = g.T @ xhat  # (C, D): r_c = sum_v g[v,c] * x_hat_v
        term = tau * (r - (np.sum(r * e, axis=1)[:, None]) * e) / norms[:, None]
        if self.mode == "shared-offset":
            return self.projection.T @ term.sum(axis=0)
        return np.einsum("cdp,cd->p", self.projection, term)

    def encode_jacobian(self, theta: np.ndarray) -> np.ndarray:
        """Analytic d E / d theta, shape (C, D, d_p); used by gradcheck."""
        v, norms = self._raw(theta)
        e = v / norms[:, None]
        c, d = self.base.shape
        if self.mode == "shared-offset":
            w = np.broadcast_to(self.projection, (c, d, self.prompt_dim))
        else:
            w = self.projection
        # (I - e e^T) W / |v| per class
        ew = np.einsum("cd,cdp->cp", e, w)
        return (w - e[:, :, None] * ew[:, None, :]) / norms[:, None, None]


def encode_classes(enc: SurrogateEncoder, params: PromptParams) -> np.ndarray:
    """Per-class unit embeddings for the given prompt parameters."""
    return enc.encode(params.theta)


def loss_and_grad(
    enc: SurrogateEncoder,
    params: PromptParams,
    selected_views: np.ndarray,
    q_tilde: np.ndarray,
    tau: float,
) -> tuple[float, np.ndarray]:
    """KL(q_tilde || p_v) and its analytic gradient in theta.

    p_v is the softmax of the prompt logits averaged over the selected
    views; q_tilde is a fixed target.
    """
    x = np.asarray(selected_views, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInputError("selected_views must be (B_sel >= 1, D)")
    q = np.asarray(q_tilde, dtype=np.float64)
    z = enc.prompt_logits(x, params.theta, tau)  # (V, C)
    p_v = softmax(z.mean(axis=0))
    loss = kl_loss(q, p_v)
    n_views = x.shape[0]
    grad_z = np.tile((p_v - q) / n_views, (n_views, 1))  # dL/dz[v,c]
    grad = enc.backprop_logits(x, params.theta, grad_z, tau)
    if not np.isfinite(grad).all():
        raise NonFiniteError("non-finite gradient")
    return loss, grad


def entropy_loss_and_grad(
    enc: SurrogateEncoder,
    params: PromptParams,
    selected_views: np.ndarray,
    tau: float,
    prompt_weights: np.ndarray | None = None,
    fixed_logits: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Marginal-entropy loss H(p_bar) and its analytic gradient in theta.

    p_bar is the view-averaged softmax of z[v] = w_v * z_prompt[v] + f[v],
    where f collects the (constant) contribution of any other sources and
    w_v is the prompt's per-view ensemble weight. With the defaults
    (w = 1, f = 0) this is plain entropy minimization over the prompt's
    own predictions.
    """
    x = np.asarray(selected_views, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInputError("selected_views must be (B_sel >= 1, D)")
    n_views = x.shape[0]
    w = (
        np.ones(n_views, dtype=np.float64)
        if prompt_weights is None
        else np.asarray(prompt_weights, dtype=np.float64)
    )
    if w.shape != (n_views,):
        raise DimensionMismatchError(f"prompt_weights shape {w.shape} != ({n_views},)")
    z = w[:, None] * enc.prompt_logits(x, params.theta, tau)
    if fixed_logits is not None:
        f = np.asarray(fixed_logits, dtype=np.float64)
        if f.shape != z.shape:
            raise DimensionMismatchError(f"fixed_logits shape {f.shape} != {z.shape}")
        z = z + f
    probs = softmax(z)  # (V, C)
    p_bar = probs.mean(axis=0)
    loss = float(-np.sum(p_bar * np.log(p_bar)))
    g = -(np.log(p_bar) + 1.0)  # dL/dp_bar
    # back through the view average and each view's softmax
    inner = probs * (g - np.sum(probs * g, axis=1, keepdims=True)) / n_views
    grad_z = w[:, None] * inner
    grad = enc.backprop_logits(x, params.theta, grad_z, tau)
    if not np.isfinite(grad).all() or not np.isfinite(loss):
        raise NonFiniteError("non-finite entropy loss or gradient")
    return loss, grad


def finite_difference_grad(
    loss_fn: Callable[[np.ndarray], float], theta: np.ndarray, h: float = 1e-5
) -> np.ndarray:
    """Central-difference gradient of a scalar function, for cross-checks."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = h
        grad[i] = (loss_fn(theta + step) - loss_fn(theta - step)) / (2.0 * h)
    return grad


def relative_grad_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Normwise relative error: ||a - n||_inf / max(||a||_inf, ||n||_inf)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = max(np.abs(a).max(initial=0.0), np.abs(n).max(initial=0.0), 1e-12)
    return float(np.abs(a - n).max(initial=0.0) / denom)
