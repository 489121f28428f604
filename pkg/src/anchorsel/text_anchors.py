"""Per-image text anchors from description embeddings.

For each test image the description bank is re-weighted by how much each
description helps explain that image's augmented views, aggregated into
one anchor per class, and the anchors then score views by joint
alignment + confidence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    DimensionMismatchError,
    InvalidConfigError,
    ZeroVectorError,
    NORM_FLOOR,
    cosine_matrix,
    entropy_rows,
    softmax,
    top_fraction_indices,
)

UNIT_TOL = 1e-5


def _check_unit_rows(arr: np.ndarray, what: str) -> None:
    norms = np.linalg.norm(arr, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        worst = float(np.abs(norms - 1.0).max())
        raise DimensionMismatchError(f"{what} rows must be unit norm (off by {worst:.2e})")


@dataclass(frozen=True)
class DescriptionBank:
    """Unit description embeddings, (C, N, D), with per-class mean features."""

    descriptions: np.ndarray
    class_names: tuple[str, ...]
    class_means: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        desc = np.asarray(self.descriptions, dtype=np.float64)
        if desc.ndim != 3:
            raise DimensionMismatchError("descriptions must have shape (C, N, D)")
        c, n, _ = desc.shape
        if c < 2 or n < 1:
            raise DimensionMismatchError("need C >= 2 classes and N >= 1 descriptions")
        if not np.all(np.isfinite(desc)):
            raise DimensionMismatchError("descriptions contain NaN/Inf")
        _check_unit_rows(desc, "description")
        object.__setattr__(self, "descriptions", desc)
        if len(self.class_names) != c:
            raise DimensionMismatchError("class_names length must equal C")
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "class_means", desc.mean(axis=1))

    @property
    def num_classes(self) -> int:
        return self.descriptions.shape[0]

    @property
    def num_descriptions(self) -> int:
        return self.descriptions.shape[1]

    @property
    def dim(self) -> int:
        return self.descriptions.shape[2]


@dataclass(frozen=True)
class ViewBatch:
    """Unit view embeddings for one test image, original view included."""

    views: np.ndarray
    original_index: int = 0

    def __post_init__(self):
        views = np.asarray(self.views, dtype=np.float64)
        if views.ndim != 2 or views.shape[0] < 1:
            raise DimensionMismatchError("views must have shape (B, D) with B >= 1")
        if not np.all(np.isfinite(views)):
            raise DimensionMismatchError("views contain NaN/Inf")
        _check_unit_rows(views, "view")
        object.__setattr__(self, "views", views)
        if not 0 <= self.original_index < views.shape[0]:
            raise DimensionMismatchError(
                f"original_index {self.original_index} outside batch of {views.shape[0]}"
            )

    @property
    def size(self) -> int:
        return self.views.shape[0]


@dataclass(frozen=True)
class TextAnchorSet:
    """Aggregated per-class anchors plus the description weights that built them.

    ``weights[c]`` sums to 1; when ``renormalized`` is False,
    ``anchors[c] == weights[c] @ descriptions[c]`` exactly.
    """

    anchors: np.ndarray  # (C, D)
    weights: np.ndarray  # (C, N)
    renormalized: bool = True

    @property
    def num_classes(self) -> int:
        return self.anchors.shape[0]


def marginal_benefit_scores(batch: ViewBatch, bank: DescriptionBank) -> np.ndarray:
    """How much each description adds over its class mean, per view.

    Returns (B, C, N) with entry sim(view_b, desc_ci) - sim(view_b, mean_c).
    """
    if batch.views.shape[1] != bank.dim:
        raise DimensionMismatchError(
            f"view dim {batch.views.shape[1]} != description dim {bank.dim}"
        )
    c, n, d = bank.descriptions.shape
    flat = bank.descriptions.reshape(c * n, d)
    sim_desc = cosine_matrix(batch.views, flat).reshape(batch.size, c, n)
    sim_mean = cosine_matrix(batch.views, bank.class_means)  # (B, C)
    return sim_desc - sim_mean[:, :, None]


def build_text_anchors(
    batch: ViewBatch, bank: DescriptionBank, renormalize: bool = True
) -> TextAnchorSet:
    """Aggregate descriptions into one anchor per class for this image.

    Per-view weights are a softmax of the marginal-benefit scores over
    descriptions, averaged across all views; the anchor is the weighted
    sum of description embeddings, unit-normalized unless ``renormalize``
    is off.
    """
    scores = marginal_benefit_scores(batch, bank)
    per_view = softmax(scores)  # softmax over descriptions, (B, C, N)
    weights = per_view.mean(axis=0)  # (C, N)
    anchors = np.einsum("cn,cnd->cd", weights, bank.descriptions)
    if renormalize:
        norms = np.linalg.norm(anchors, axis=1)
        if np.any(norms <= NORM_FLOOR):
            raise ZeroVectorError("aggregated anchor collapsed to zero norm")
        anchors = anchors / norms[:, None]
    return TextAnchorSet(anchors=anchors, weights=weights, renormalized=renormalize)


def text_distributions(views: np.ndarray, anchors: TextAnchorSet, tau: float) -> np.ndarray:
    """Class distributions softmax(tau * cos(view, anchor_c)) for each view row."""
    sims = cosine_matrix(np.atleast_2d(views), anchors.anchors)
    return softmax(sims, tau)


def text_confidence_distribution(view, anchors: TextAnchorSet, tau: float) -> np.ndarray:
    """Class distribution of a single view under the text anchors."""
    return text_distributions(np.asarray(view, dtype=np.float64)[None, :], anchors, tau)[0]


def score_views_text(
    batch: ViewBatch,
    anchors: TextAnchorSet,
    alpha1: float = 1.0,
    alpha2: float = 2.0,
    tau: float = 100.0,
) -> np.ndarray:
    """Joint alignment-confidence score per view.

    alpha1 weights the best anchor cosine, alpha2 weights one minus the
    normalized prediction entropy under the anchors.
    """
    if alpha1 < 0 or alpha2 < 0 or (alpha1 == 0 and alpha2 == 0):
        raise InvalidConfigError("alpha weights must be nonnegative and not both zero")
    sims = cosine_matrix(batch.views, anchors.anchors)
    align = sims.max(axis=1)
    conf = 1.0 - entropy_rows(softmax(sims, tau))
    return alpha1 * align + alpha2 * conf


def filter_text(
    batch: ViewBatch,
    anchors: TextAnchorSet,
    q: float = 0.10,
    alpha1: float = 1.0,
    alpha2: float = 2.0,
    tau: float = 100.0,
) -> np.ndarray:
    """Indices of the top-q fraction of views by text score, best first."""
    return top_fraction_indices(score_views_text(batch, anchors, alpha1, alpha2, tau), q)
