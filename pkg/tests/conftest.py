"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from anchorsel.bundle import BundleSample
from anchorsel.synth import SyntheticSpec, generate_and_write, generate_bundle
from anchorsel.text_anchors import DescriptionBank


def unit(a):
    """Row-normalize an array (test helper; inputs are never zero rows)."""
    a = np.asarray(a, dtype=np.float64)
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


def random_instance(rng, C=None, N=None, B=None, D=None):
    """Random unit-vector descriptions, base embeddings, and one view batch."""
    C = C if C is not None else int(rng.integers(2, 9))
    N = N if N is not None else int(rng.integers(1, 5))
    B = B if B is not None else int(rng.integers(2, 17))
    D = D if D is not None else int(rng.integers(4, 17))
    desc = unit(rng.standard_normal((C, N, D)))
    base = unit(rng.standard_normal((C, D)))
    views = unit(rng.standard_normal((B, D)))
    return desc, base, views


def make_desc_bank(desc):
    return DescriptionBank(
        descriptions=desc,
        class_names=tuple(f"class_{i}" for i in range(desc.shape[0])),
    )


def make_sample(views, label=-1, sample_id=0, mask=None):
    return BundleSample(sample_id=sample_id, label=label, views=views, mask=mask)


@pytest.fixture(scope="session")
def default_bundle():
    """The pinned synthetic benchmark bundle (generated once per session)."""
    return generate_bundle(SyntheticSpec())


@pytest.fixture(scope="session")
def tiny_bundle():
    """A small bundle for fast end-to-end runs."""
    return generate_bundle(SyntheticSpec(C=5, N=3, D=24, B=16, num_samples=10, seed=73))


@pytest.fixture(scope="session")
def default_bundle_dir(tmp_path_factory):
    """The pinned benchmark bundle written to disk, for CLI-level tests."""
    path = tmp_path_factory.mktemp("bundles") / "default"
    generate_and_write(SyntheticSpec(), path)
    return path


@pytest.fixture(scope="session")
def small_bundle_dir(tmp_path_factory):
    """A fast on-disk bundle for CLI plumbing tests."""
    path = tmp_path_factory.mktemp("bundles-small") / "small"
    generate_and_write(
        SyntheticSpec(C=4, N=2, D=16, B=8, num_samples=6, seed=19), path
    )
    return path
