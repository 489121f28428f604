"""Seeded synthetic feature bundles with a controllable miscalibration knob.

The generator models the failure mode the selection pipeline targets:
augmented views that the base classifier scores with high confidence
even though they show background, not the labeled object.

Geometry (all on the unit sphere):

* one "semantic" direction per class; descriptions scatter around it
* the base classifier embedding mixes the semantic direction with a
  private quirk direction, so classifier confidence and description
  alignment are decoupled; it also leaks onto the *next* class's
  semantic direction (``confusion_strength``), so the classifier's
  decision boundaries are systematically off while the descriptions
  remain discriminative
* informative views lie near the true class's semantic direction; a
  random share of them (``hard_view_fraction``) carries extra noise —
  partial or occluded crops that the classifier reads ambiguously while
  the descriptions still identify them
* background views lie near one shared background direction; a random
  half of them is pulled toward the *classifier* embedding of a wrong
  class, which makes them confidently wrong without making them look
  like that class to the descriptions
* finally every view is rotated by a fixed angle to emulate test-time
  distribution shift (an exact isometry, so within-sample geometry is
  preserved)

Everything is driven by one seed; the same spec always yields a
byte-identical bundle.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .bundle import BundleSample, FeatureBundle, BundleManifest, write_bundle
from .core import InvalidConfigError

# weight of the private quirk direction inside each base classifier
# embedding; above 1.0 the classifier leans more on its quirk than on
# the semantic direction, widening the confidence/alignment split
QUIRK_WEIGHT = 2.5

# probability that a background view receives the confidence boost
BOOST_PROBABILITY = 0.5

# noise multiplier for hard informative views (partial/occluded crops)
HARD_NOISE_MULTIPLIER = 3.0


@dataclass(frozen=True)
class SyntheticSpec:
    C: int = 20  # classes
    N: int = 8  # descriptions per class
    D: int = 64  # embedding dimension
    B: int = 64  # views per sample
    num_samples: int = 500
    informative_fraction: float = 0.3
    background_confidence_boost: float = 2.0
    confusion_strength: float = 0.8
    hard_view_fraction: float = 0.9
    shift_angle: float = 0.25
    noise_sigma: float = 0.1
    seed: int = 42

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("C", "N", "D", "B", "num_samples"):
            if getattr(self, name) < 1:
                raise InvalidConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.C < 2:
            raise InvalidConfigError(f"need at least 2 classes, got {self.C}")
        if not 0.0 < self.informative_fraction <= 1.0:
            raise InvalidConfigError(
                f"informative_fraction must lie in (0, 1], got {self.informative_fraction}"
            )
        if self.background_confidence_boost < 0:
            raise InvalidConfigError(
                f"background_confidence_boost must be >= 0, got {self.background_confidence_boost}"
            )
        if self.confusion_strength < 0:
            raise InvalidConfigError(
                f"confusion_strength must be >= 0, got {self.confusion_strength}"
            )
        if not 0.0 <= self.hard_view_fraction <= 1.0:
            raise InvalidConfigError(
                f"hard_view_fraction must lie in [0, 1], got {self.hard_view_fraction}"
            )
        if self.noise_sigma < 0:
            raise InvalidConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    def replace(self, **changes: Any) -> "SyntheticSpec":
        return replace(self, **changes)


DEFAULT_SPEC = SyntheticSpec()


def _unit_rows(arr: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    return arr / np.where(norms > 0, norms, 1.0)


def _direction_frame(rng: np.random.Generator, c: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Semantic directions, quirk directions, and the background direction.

    With room to spare (D >= 2C+1) the whole frame is exactly orthonormal.
    Otherwise semantic directions get one Gram-Schmidt pass when D >= C
    and the rest stay plain random unit vectors: tiny test instances only
    exercise code paths, not the miscalibration geometry.
    """
    needed = 2 * c + 1
    if d >= needed:
        raw = rng.standard_normal((d, needed))
        q, r = np.linalg.qr(raw)
        q = q * np.sign(np.diag(r))  # fix QR sign ambiguity for determinism
        frame = q.T
        return frame[:c], frame[c : 2 * c], frame[2 * c]
    dirs = rng.standard_normal((c, d))
    if d >= c:
        for i in range(c):
            for j in range(i):
                dirs[i] -= (dirs[i] @ dirs[j]) * dirs[j]
            dirs[i] /= np.linalg.norm(dirs[i])
    else:
        dirs = _unit_rows(dirs)
    quirks = _unit_rows(rng.standard_normal((c, d)))
    background = _unit_rows(rng.standard_normal(d))
    return dirs, quirks, background


def rotation_matrix(rng: np.random.Generator, d: int, angle: float) -> np.ndarray:
    """Random-basis rotation applying `angle` in every 2-D block: an exact
    isometry that moves all of embedding space by roughly that angle."""
    block = np.eye(d)
    c, s = np.cos(angle), np.sin(angle)
    for i in range(0, d - 1, 2):
        block[i, i] = c
        block[i, i + 1] = -s
        block[i + 1, i] = s
        block[i + 1, i + 1] = c
    raw = rng.standard_normal((d, d))
    q, r = np.linalg.qr(raw)
    q = q * np.sign(np.diag(r))
    return q @ block @ q.T


def generate_bundle(spec: SyntheticSpec) -> FeatureBundle:
    """Build an in-memory bundle with informative-view ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    c, n, d, b = spec.C, spec.N, spec.D, spec.B

    dirs, quirks, background = _direction_frame(rng, c, d)
    descriptions = _unit_rows(
        dirs[:, None, :] + spec.noise_sigma * rng.standard_normal((c, n, d))
    )
    confuser = np.roll(dirs, -1, axis=0)  # classifier c also fires on class c+1
    base = _unit_rows(dirs + QUIRK_WEIGHT * quirks + spec.confusion_strength * confuser)
    rot = rotation_matrix(rng, d, spec.shift_angle)

    n_inf = min(b, max(1, int(round(spec.informative_fraction * b))))
    samples: list[BundleSample] = []
    for idx in range(spec.num_samples):
        label = int(rng.integers(c))
        mask = np.zeros(b, dtype=bool)
        mask[0] = True  # the original view always shows the object
        if n_inf > 1 and b > 1:
            extra = rng.choice(b - 1, size=n_inf - 1, replace=False) + 1
            mask[extra] = True

        views = np.empty((b, d), dtype=np.float64)
        for v in range(b):
            noise = spec.noise_sigma * rng.standard_normal(d)
            if mask[v]:
                # the original view is always a clean crop of the object
                if v != 0 and rng.random() < spec.hard_view_fraction:
                    noise = noise * HARD_NOISE_MULTIPLIER
                views[v] = dirs[label] + noise
            else:
                center = background.copy()
                if spec.background_confidence_boost > 0 and rng.random() < BOOST_PROBABILITY:
                    wrong = int(rng.integers(c - 1))
                    wrong += wrong >= label
                    center = center + spec.background_confidence_boost * base[wrong]
                views[v] = center + noise
        views = _unit_rows(views) @ rot.T

        samples.append(
            BundleSample(sample_id=idx, label=label, views=views, mask=mask)
        )

    class_names = [f"class_{i:03d}" for i in range(c)]
    manifest = BundleManifest(
        format_version=1,
        dim=d,
        num_classes=c,
        num_descriptions=n,
        views_per_sample=b,
        num_samples=spec.num_samples,
        class_names=class_names,
        normalized=True,
        variable_views=False,
        original_index=0,
    )
    return FeatureBundle(
        manifest=manifest,
        descriptions=descriptions,
        base_class_embeddings=base,
        samples=samples,
    )


def generate_and_write(spec: SyntheticSpec, path) -> BundleManifest:
    """Generate a bundle and store it on disk in the portable layout."""
    fb = generate_bundle(spec)
    return write_bundle(
        path,
        descriptions=fb.descriptions,
        base_class_embeddings=fb.base_class_embeddings,
        samples=fb.samples,
        class_names=fb.manifest.class_names,
        normalized=True,
        original_index=fb.manifest.original_index,
    )
