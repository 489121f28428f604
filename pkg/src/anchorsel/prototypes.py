"""Online class-prototype bank and image-anchor view filtering.

The bank keeps a running mean embedding per class, updated one
embedding at a time across the test stream. Per image, the top-K
predicted classes supply prototypes as image anchors; views are scored
by alignment to those anchors plus prediction confidence, and the final
selection is the union of the text and image filters.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    EmptyInputError,
    IndexOutOfRangeError,
    NoAnchorsAvailableError,
    cosine_matrix,
    entropy_rows,
    softmax,
    top_fraction_indices,
)
from .text_anchors import TextAnchorSet, ViewBatch


@dataclass
class PrototypeBank:
    """Per-class running-mean prototypes with update counts.

    ``counts[c] == 0`` marks an unpopulated class whose prototype row is
    all zeros. Updates must be sequential; the bank is single-writer.
    """

    prototypes: np.ndarray  # (C, D) float64
    counts: np.ndarray  # (C,) int64

    @classmethod
    def empty(cls, num_classes: int, dim: int) -> "PrototypeBank":
        return cls(
            prototypes=np.zeros((num_classes, dim), dtype=np.float64),
            counts=np.zeros(num_classes, dtype=np.int64),
        )

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]

    @property
    def populated(self) -> np.ndarray:
        return self.counts > 0

    def update(self, embedding: np.ndarray, class_id: int) -> None:
        """Fold one embedding into class ``class_id`` by cumulative averaging."""
        if not 0 <= class_id < self.num_classes:
            raise IndexOutOfRangeError(
                f"class_id {class_id} outside [0, {self.num_classes})"
            )
        e = np.asarray(embedding, dtype=np.float64)
        if e.shape != (self.prototypes.shape[1],):
            raise IndexOutOfRangeError(
                f"embedding shape {e.shape} != ({self.prototypes.shape[1]},)"
            )
        n = int(self.counts[class_id])
        self.prototypes[class_id] = (n * self.prototypes[class_id] + e) / (n + 1)
        self.counts[class_id] = n + 1

    def copy(self) -> "PrototypeBank":
        return PrototypeBank(self.prototypes.copy(), self.counts.copy())

    def save(self, directory: str | Path) -> None:
        """Write the snapshot as two .npy files (tensor + counts)."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        np.save(directory / "bank_prototypes.npy", self.prototypes)
        np.save(directory / "bank_counts.npy", self.counts)

    @classmethod
    def load(cls, directory: str | Path) -> "PrototypeBank":
        directory = Path(directory)
        return cls(
            prototypes=np.load(directory / "bank_prototypes.npy"),
            counts=np.load(directory / "bank_counts.npy"),
        )


def bank_update(bank: PrototypeBank, embedding: np.ndarray, class_id: int) -> PrototypeBank:
    """Functional alias for :meth:`PrototypeBank.update`; returns the bank."""
    bank.update(embedding, class_id)
    return bank


@dataclass(frozen=True)
class ImageAnchorSet:
    """Prototypes of the top-ranked populated classes for one image."""

    class_indices: np.ndarray  # (<=K,) int64
    anchors: np.ndarray  # (len(class_indices), D)

    def __len__(self) -> int:
        return len(self.class_indices)


def select_topk_classes(predictions, k: int) -> np.ndarray:
    """Rank classes by the mean of the given class distributions, keep top-K.

    Ties go to the lower class index. All K ranked classes are returned;
    unpopulated ones are dropped later when the anchor set is gathered.
    """
    preds = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    if preds.size == 0:
        raise EmptyInputError("need at least one prediction to rank classes")
    if k < 1:
        raise IndexOutOfRangeError(f"K must be >= 1, got {k}")
    mean = preds.mean(axis=0)
    order = np.argsort(-mean, kind="stable")
    return order[: min(k, mean.shape[0])].astype(np.int64)


def build_image_anchor_set(bank: PrototypeBank, class_indices, normalize: bool = False) -> ImageAnchorSet:
    """Gather prototypes for the ranked classes, skipping unpopulated ones."""
    kept = [int(c) for c in class_indices if bank.counts[int(c)] > 0]
    anchors = bank.prototypes[kept].copy() if kept else np.zeros((0, bank.prototypes.shape[1]))
    if normalize and len(kept):
        anchors = anchors / np.linalg.norm(anchors, axis=1)[:, None]
    return ImageAnchorSet(class_indices=np.asarray(kept, dtype=np.int64), anchors=anchors)


def class_representations(
    bank: PrototypeBank, text_anchors: TextAnchorSet, normalize: bool = False
) -> np.ndarray:
    """Per-class vectors for image-side confidence: prototypes where
    populated, text anchors as the fallback elsewhere, so a full C-way
    distribution exists from the first sample."""
    reps = np.where(bank.populated[:, None], bank.prototypes, text_anchors.anchors)
    if normalize:
        reps = reps / np.linalg.norm(reps, axis=1)[:, None]
    return reps


def score_views_image(
    batch: ViewBatch,
    anchor_set: ImageAnchorSet,
    bank: PrototypeBank,
    text_anchors: TextAnchorSet,
    beta1: float = 2.0,
    beta2: float = 1.0,
    tau: float = 100.0,
    normalize_prototypes: bool = False,
) -> np.ndarray:
    """Image-side joint alignment-confidence score per view.

    When the ranked classes are all unpopulated the alignment term falls
    back to the full per-class representation set, so scoring works from
    the first sample onward; only a bank with no populated class at all
    is unscorable.
    """
    reps = class_representations(bank, text_anchors, normalize_prototypes)
    if len(anchor_set) > 0:
        align_targets = anchor_set.anchors
    elif bank.populated.any():
        align_targets = reps
    else:
        raise NoAnchorsAvailableError("prototype bank has no populated class")
    align = cosine_matrix(batch.views, align_targets).max(axis=1)
    conf = 1.0 - entropy_rows(softmax(cosine_matrix(batch.views, reps), tau))
    return beta1 * align + beta2 * conf


def filter_image(
    batch: ViewBatch,
    anchor_set: ImageAnchorSet,
    bank: PrototypeBank,
    text_anchors: TextAnchorSet,
    p: float = 0.05,
    beta1: float = 2.0,
    beta2: float = 1.0,
    tau: float = 100.0,
    normalize_prototypes: bool = False,
) -> np.ndarray:
    """Top-p fraction of views by image score; empty on a cold bank."""
    if len(anchor_set) == 0 and not bank.populated.any():
        return np.zeros(0, dtype=np.int64)
    scores = score_views_image(
        batch, anchor_set, bank, text_anchors, beta1, beta2, tau, normalize_prototypes
    )
    return top_fraction_indices(scores, p)


def union_selection(text_indices, image_indices) -> np.ndarray:
    """Deduplicated union of the two index sets, sorted ascending."""
    joined = np.concatenate(
        [np.asarray(text_indices, dtype=np.int64).ravel(),
         np.asarray(image_indices, dtype=np.int64).ravel()]
    )
    return np.unique(joined)
