"""Anchor-guided view selection and test-time prompt adaptation.

Per test sample, a batch of augmented-view embeddings is filtered twice
— against text anchors aggregated from class descriptions, and against
an online bank of class prototypes — and a learnable prompt vector is
adapted toward a sharpened, confidence-weighted ensemble of the
surviving views' predictions. Everything operates in embedding space;
encoders live outside this package and talk to it through the bundle
file format.
"""

from .bundle import (
    BundleManifest,
    BundleSample,
    ChecksumMismatch,
    FeatureBundle,
    ShapeMismatch,
    TruncatedRecord,
    VersionUnsupported,
    bundle_checksum,
    read_bundle,
    write_bundle,
)
from .config import (
    AblationVariant,
    AdaptationConfig,
    MethodPlan,
    METHODS,
    ablation_variants,
    plan_for_method,
)
from .core import (
    AnchorselError,
    DimensionMismatchError,
    EmptyInputError,
    IndexOutOfRangeError,
    InvalidConfigError,
    NoAnchorsAvailableError,
    NonFiniteError,
    ZeroVectorError,
    cosine_matrix,
    cosine_sim,
    entropy_rows,
    l2_normalize,
    normalized_entropy,
    selection_count,
    softmax,
    top_fraction_indices,
)
from .encoder import (
    PromptParams,
    SurrogateEncoder,
    encode_classes,
    entropy_loss_and_grad,
    finite_difference_grad,
    loss_and_grad,
)
from .engine import (
    RunSummary,
    SampleResult,
    adapt_sample,
    baseline_cosine_sel,
    baseline_tpt_entropy,
    run_stream,
)
from .ensemble import (
    EnsembleTarget,
    SourceLogits,
    build_target,
    confidence_weights,
    ensemble_logits,
    kl_loss,
    sharpen,
)
from .optim import AdamWState, adamw_step
from .oracle import oracle_pipeline
from .prototypes import (
    ImageAnchorSet,
    PrototypeBank,
    bank_update,
    build_image_anchor_set,
    filter_image,
    score_views_image,
    select_topk_classes,
    union_selection,
)
from .synth import DEFAULT_SPEC, SyntheticSpec, generate_bundle, generate_and_write
from .text_anchors import (
    DescriptionBank,
    TextAnchorSet,
    ViewBatch,
    build_text_anchors,
    filter_text,
    marginal_benefit_scores,
    score_views_text,
    text_distributions,
)

__version__ = "0.1.0"

__all__ = [
    "AblationVariant",
    "AdamWState",
    "AdaptationConfig",
    "AnchorselError",
    "BundleManifest",
    "BundleSample",
    "ChecksumMismatch",
    "DEFAULT_SPEC",
    "DescriptionBank",
    "DimensionMismatchError",
    "EmptyInputError",
    "EnsembleTarget",
    "FeatureBundle",
    "ImageAnchorSet",
    "IndexOutOfRangeError",
    "InvalidConfigError",
    "METHODS",
    "MethodPlan",
    "NoAnchorsAvailableError",
    "NonFiniteError",
    "PromptParams",
    "PrototypeBank",
    "RunSummary",
    "SampleResult",
    "ShapeMismatch",
    "SourceLogits",
    "SurrogateEncoder",
    "SyntheticSpec",
    "TextAnchorSet",
    "TruncatedRecord",
    "VersionUnsupported",
    "ViewBatch",
    "ZeroVectorError",
    "ablation_variants",
    "adamw_step",
    "adapt_sample",
    "bank_update",
    "baseline_cosine_sel",
    "baseline_tpt_entropy",
    "build_image_anchor_set",
    "build_target",
    "build_text_anchors",
    "bundle_checksum",
    "confidence_weights",
    "cosine_matrix",
    "cosine_sim",
    "encode_classes",
    "ensemble_logits",
    "entropy_loss_and_grad",
    "entropy_rows",
    "filter_image",
    "filter_text",
    "finite_difference_grad",
    "generate_and_write",
    "generate_bundle",
    "kl_loss",
    "l2_normalize",
    "loss_and_grad",
    "marginal_benefit_scores",
    "normalized_entropy",
    "oracle_pipeline",
    "plan_for_method",
    "read_bundle",
    "run_stream",
    "score_views_image",
    "score_views_text",
    "select_topk_classes",
    "selection_count",
    "sharpen",
    "softmax",
    "text_distributions",
    "top_fraction_indices",
    "union_selection",
    "write_bundle",
]
