"""Shared vector/matrix primitives: normalization, cosine similarity,
softmax, normalized entropy, and deterministic top-fraction selection.

All functions are pure, operate in float64, and are safe for concurrent
use. Stored embeddings are 32-bit on disk; everything here assumes they
have already been widened.
"""

from __future__ import annotations

import math

import numpy as np

NORM_FLOOR = 1e-12


class AnchorselError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVectorError(AnchorselError):
    """A vector with (near-)zero L2 norm where a direction is required."""


class NonFiniteError(AnchorselError):
    """NaN or Inf encountered in an input that must be finite."""


class DimensionMismatchError(AnchorselError):
    """Array shapes do not agree with the declared dimensions."""


class EmptyInputError(AnchorselError):
    """An operation received an empty collection."""


class IndexOutOfRangeError(AnchorselError):
    """A class or view index outside the valid range."""


class NoAnchorsAvailableError(AnchorselError):
    """Image-anchor scoring requested with an empty anchor set."""


class InvalidConfigError(AnchorselError):
    """A configuration value outside its documented domain."""


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains NaN or Inf")


def l2_normalize(v) -> np.ndarray:
    """Return ``v / ||v||_2`` as float64.

    Raises ZeroVectorError when the norm is at or below 1e-12 and
    NonFiniteError on NaN/Inf entries.
    """
    v = np.asarray(v, dtype=np.float64)
    _require_finite(v, "vector")
    norm = float(np.linalg.norm(v))
    if norm <= NORM_FLOOR:
        raise ZeroVectorError(f"cannot normalize vector with norm {norm!r}")
    return v / norm


def cosine_sim(a, b) -> float:
    """Cosine similarity of two vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _require_finite(a, "vector a")
    _require_finite(b, "vector b")
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= NORM_FLOOR or nb <= NORM_FLOOR:
        raise ZeroVectorError("cosine similarity of a zero vector is undefined")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def cosine_matrix(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between the rows of two matrices.

    Shapes (M, D) x (K, D) -> (M, K). Row norms are divided out
    explicitly, so inputs need not be exactly unit.
    """
    rows = np.asarray(rows, dtype=np.float64)
    cols = np.asarray(cols, dtype=np.float64)
    if rows.shape[-1] != cols.shape[-1]:
        raise DimensionMismatchError(
            f"feature dims {rows.shape[-1]} and {cols.shape[-1]} differ"
        )
    rn = np.linalg.norm(rows, axis=-1)
    cn = np.linalg.norm(cols, axis=-1)
    if np.any(rn <= NORM_FLOOR) or np.any(cn <= NORM_FLOOR):
        raise ZeroVectorError("zero row in cosine_matrix input")
    sims = (rows / rn[:, None]) @ (cols / cn[:, None]).T
    return np.clip(sims, -1.0, 1.0)


def softmax(z, temperature: float = 1.0) -> np.ndarray:
    """Numerically stable softmax of ``temperature * z`` over the last axis.

    Max-subtraction keeps the exponentials bounded; the argmax of the
    output matches the argmax of ``z`` for any positive temperature.
    """
    if temperature <= 0:
        raise InvalidConfigError(f"temperature must be positive, got {temperature}")
    z = np.asarray(z, dtype=np.float64)
    _require_finite(z, "logits")
    scaled = temperature * z
    scaled = scaled - scaled.max(axis=-1, keepdims=True)
    e = np.exp(scaled)
    return e / e.sum(axis=-1, keepdims=True)


def check_probvec(p: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    """Validate a probability vector (or rows of them) and return it as float64."""
    p = np.asarray(p, dtype=np.float64)
    _require_finite(p, "probabilities")
    if np.any(p < -1e-12) or np.any(p > 1.0 + 1e-12):
        raise InvalidConfigError("probabilities outside [0, 1]")
    sums = p.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol):
        raise InvalidConfigError("probabilities do not sum to 1")
    return p


def normalized_entropy(p) -> float:
    """Entropy of ``p`` divided by log(C), in [0, 1]; 0*log(0) counts as 0."""
    p = check_probvec(p)
    if p.ndim != 1 or p.shape[0] < 2:
        raise DimensionMismatchError("normalized entropy needs a 1-D vector, C >= 2")
    return float(entropy_rows(p[None, :])[0])


def entropy_rows(p: np.ndarray) -> np.ndarray:
    """Normalized entropy of each row of a (M, C) probability matrix."""
    p = np.asarray(p, dtype=np.float64)
    c = p.shape[-1]
    if c < 2:
        raise DimensionMismatchError("entropy normalization needs C >= 2")
    plogp = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    h = -plogp.sum(axis=-1) / math.log(c)
    # float rounding can leave values a hair outside [0, 1]
    return np.clip(h, 0.0, 1.0)


def selection_count(n: int, fraction: float) -> int:
    """Number of items the top-fraction rule keeps: floor(f*n + 0.5), min 1."""
    if not 0.0 < fraction <= 1.0:
        raise InvalidConfigError(f"fraction must be in (0, 1], got {fraction}")
    return min(n, max(1, math.floor(fraction * n + 0.5)))


def top_fraction_indices(scores, fraction: float) -> np.ndarray:
    """Indices of the highest-scoring entries, best first.

    Keeps ``selection_count(len(scores), fraction)`` entries. Ties are
    broken toward the lower index, so the result is deterministic.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or scores.size == 0:
        raise EmptyInputError("scores must be a non-empty 1-D array")
    _require_finite(scores, "scores")
    count = selection_count(scores.size, fraction)
    order = np.argsort(-scores, kind="stable")
    return order[:count].astype(np.int64)
