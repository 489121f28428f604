"""Per-sample adaptation pipeline and test-stream orchestration.

For each test sample: score and filter the augmented views (text
anchors, then prototype anchors), fuse the prediction sources over the
surviving views into a sharpened target, adapt the prompt parameters
for a few steps, and predict from the original view with the adapted
prompt. The prototype bank is the only state that crosses sample
boundaries; the prompt and optimizer are reset every time.

A numerical failure inside one sample downgrades that sample to its
zero-shot prediction and the stream continues.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .bundle import BundleSample, FeatureBundle
from .config import AdaptationConfig, MethodPlan, plan_for_method
from .core import AnchorselError, cosine_matrix, entropy_rows, softmax, top_fraction_indices
from .encoder import (
    PromptParams,
    SurrogateEncoder,
    entropy_loss_and_grad,
    loss_and_grad,
)
from .ensemble import SOURCE_NAMES, SourceLogits, build_target, confidence_weights, ensemble_logits
from .optim import AdamWState, adamw_step
from .prototypes import (
    PrototypeBank,
    build_image_anchor_set,
    class_representations,
    filter_image,
    select_topk_classes,
    union_selection,
)
from .text_anchors import DescriptionBank, ViewBatch, build_text_anchors, filter_text, text_distributions


@dataclass(frozen=True)
class SampleResult:
    sample_id: int
    zero_shot_pred: int
    adapted_pred: int
    label: int  # -1 = unlabeled
    selected_text: tuple[int, ...]  # stage-1 selection (text score or baseline rule)
    selected_image: tuple[int, ...]
    selected_union: tuple[int, ...]
    loss: float
    source_weight_means: tuple[float, float, float]  # (prompt, text, image)
    failed: bool = False
    note: str = ""


@dataclass
class RunSummary:
    method: str
    num_samples: int
    accuracy: float | None
    zero_shot_accuracy: float | None
    mean_loss: float
    selection_precision: float | None
    selection_recall: float | None
    wall_clock_per_sample: float
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "num_samples": self.num_samples,
            "accuracy": self.accuracy,
            "zero_shot_accuracy": self.zero_shot_accuracy,
            "mean_loss": self.mean_loss,
            "selection_precision": self.selection_precision,
            "selection_recall": self.selection_recall,
            "wall_clock_per_sample": self.wall_clock_per_sample,
            "failures": self.failures,
        }


def rank_normalize(values: np.ndarray) -> np.ndarray:
    """Map values to [0, 1] by rank (stable ties), 0 = smallest."""
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    ranks = np.empty_like(v)
    ranks[order] = np.arange(v.shape[0], dtype=np.float64)
    return ranks / max(v.shape[0] - 1, 1)


def _stage1_select(
    plan: MethodPlan,
    config: AdaptationConfig,
    batch: ViewBatch,
    anchors,
    z0: np.ndarray,
) -> np.ndarray:
    """First view filter: text-anchor score, low entropy, or the
    rank-combined cosine baseline."""
    if plan.stage1 == "text":
        return filter_text(
            batch, anchors, q=config.q,
            alpha1=config.alpha[0], alpha2=config.alpha[1], tau=config.tau,
        )
    conf = 1.0 - entropy_rows(softmax(z0))
    if plan.stage1 == "entropy":
        return top_fraction_indices(conf, config.q)
    # cosine rule: confidence and similarity-to-original, both rank-normalized
    original = batch.views[batch.original_index : batch.original_index + 1]
    sims = cosine_matrix(batch.views, original)[:, 0]
    return top_fraction_indices(rank_normalize(conf) + rank_normalize(sims), config.q)


def _zero_shot_result(sample: BundleSample, pred: int, failed: bool = False, note: str = "") -> SampleResult:
    return SampleResult(
        sample_id=sample.sample_id,
        zero_shot_pred=pred,
        adapted_pred=pred,
        label=sample.label,
        selected_text=(),
        selected_image=(),
        selected_union=(),
        loss=0.0,
        source_weight_means=(0.0, 0.0, 0.0),
        failed=failed,
        note=note,
    )


def adapt_sample(
    config: AdaptationConfig,
    bank: PrototypeBank,
    enc: SurrogateEncoder,
    desc_bank: DescriptionBank,
    sample: BundleSample,
    plan: MethodPlan | None = None,
    original_index: int = 0,
    trace: dict | None = None,
) -> tuple[SampleResult, PrototypeBank]:
    """Run the full per-sample pipeline; returns the result and the
    (possibly updated) prototype bank. Pass a dict as ``trace`` to
    capture intermediates (anchors, ensemble logits, target)."""
    if plan is None:
        plan = plan_for_method(config.method)

    theta0 = PromptParams.zeros(config.prompt_dim)
    z0 = enc.prompt_logits(sample.views, theta0.theta, config.tau)
    zero_shot_pred = int(np.argmax(z0[original_index]))

    if not plan.adapt:
        return _zero_shot_result(sample, zero_shot_pred), bank

    try:
        result = _adapt_inner(
            config, bank, enc, desc_bank, sample, plan, original_index, z0,
            zero_shot_pred, trace,
        )
    except AnchorselError as exc:
        result = _zero_shot_result(
            sample, zero_shot_pred, failed=True, note=f"{type(exc).__name__}: {exc}"
        )
    return result, bank


def _adapt_inner(
    config: AdaptationConfig,
    bank: PrototypeBank,
    enc: SurrogateEncoder,
    desc_bank: DescriptionBank,
    sample: BundleSample,
    plan: MethodPlan,
    original_index: int,
    z0: np.ndarray,
    zero_shot_pred: int,
    trace: dict | None = None,
) -> SampleResult:
    batch = ViewBatch(views=sample.views, original_index=original_index)
    anchors = build_text_anchors(batch, desc_bank, renormalize=config.renormalize_anchors)

    stage1 = _stage1_select(plan, config, batch, anchors, z0)
    pseudo_label = zero_shot_pred

    uses_bank = plan.image_filter or plan.z_image
    if uses_bank:
        if config.bank_commit == "selected":
            for idx in sorted(int(i) for i in stage1):
                bank.update(sample.views[idx], pseudo_label)
        else:
            bank.update(sample.views[original_index], pseudo_label)

    if plan.image_filter:
        pi_bar = text_distributions(sample.views[stage1], anchors, config.tau)
        ranked = select_topk_classes(pi_bar, config.K)
        anchor_set = build_image_anchor_set(bank, ranked, normalize=config.normalize_prototypes)
        selected_image = filter_image(
            batch, anchor_set, bank, anchors,
            p=config.p, beta1=config.beta[0], beta2=config.beta[1],
            tau=config.tau, normalize_prototypes=config.normalize_prototypes,
        )
    else:
        selected_image = np.zeros(0, dtype=np.int64)

    union = union_selection(stage1, selected_image)
    if config.pin_original:
        union = union_selection(union, np.array([original_index]))
    union_views = sample.views[union]

    z_text = None
    z_image = None
    if plan.z_text:
        z_text = config.tau * cosine_matrix(union_views, anchors.anchors)
    if plan.z_image:
        reps = class_representations(bank, anchors, config.normalize_prototypes)
        z_image = config.tau * cosine_matrix(union_views, reps)
    sources = SourceLogits(z_prompt=z0[union], z_text=z_text, z_image=z_image)

    weights = confidence_weights(
        sources, epsilon=config.epsilon, simple=(plan.weighting == "simple")
    )
    weight_means = _weight_means(sources.names, weights)

    params = PromptParams.zeros(config.prompt_dim)
    state = AdamWState.init(config.prompt_dim)
    if trace is not None:
        trace.update(
            anchors=anchors, sources=sources, weights=weights,
            z_ens=ensemble_logits(sources, weights),
        )
    if plan.loss == "kld":
        z_ens = ensemble_logits(sources, weights)
        q_tilde = build_target(z_ens, config.T)
        if trace is not None:
            trace["q_tilde"] = q_tilde
        loss_val = None
        for _ in range(config.steps):
            loss_val, grad = loss_and_grad(enc, params, union_views, q_tilde, config.tau)
            params, state = adamw_step(state, params, grad, lr=config.lr)
        if loss_val is None:
            loss_val, _ = loss_and_grad(enc, params, union_views, q_tilde, config.tau)
    else:
        prompt_col = list(sources.names).index("prompt")
        w_prompt = weights[:, prompt_col]
        fixed = ensemble_logits(sources, weights) - w_prompt[:, None] * sources.z_prompt
        loss_val = None
        for _ in range(config.steps):
            loss_val, grad = entropy_loss_and_grad(
                enc, params, union_views, config.tau,
                prompt_weights=w_prompt, fixed_logits=fixed,
            )
            params, state = adamw_step(state, params, grad, lr=config.lr)
        if loss_val is None:
            loss_val, _ = entropy_loss_and_grad(
                enc, params, union_views, config.tau,
                prompt_weights=w_prompt, fixed_logits=fixed,
            )

    z_final = enc.prompt_logits(sample.views[original_index : original_index + 1],
                                params.theta, config.tau)
    adapted_pred = int(np.argmax(z_final[0]))

    return SampleResult(
        sample_id=sample.sample_id,
        zero_shot_pred=zero_shot_pred,
        adapted_pred=adapted_pred,
        label=sample.label,
        selected_text=tuple(int(i) for i in stage1),
        selected_image=tuple(int(i) for i in selected_image),
        selected_union=tuple(int(i) for i in union),
        loss=float(loss_val),
        source_weight_means=weight_means,
    )


def _weight_means(names: tuple[str, ...], weights: np.ndarray) -> tuple[float, float, float]:
    means = dict.fromkeys(SOURCE_NAMES, 0.0)
    for col, name in enumerate(names):
        means[name] = float(weights[:, col].mean())
    return (means["prompt"], means["text"], means["image"])


def baseline_tpt_entropy(
    config: AdaptationConfig,
    bank: PrototypeBank,
    enc: SurrogateEncoder,
    desc_bank: DescriptionBank,
    sample: BundleSample,
    original_index: int = 0,
) -> tuple[SampleResult, PrototypeBank]:
    """Entropy-ranked selection with marginal-entropy adaptation."""
    return adapt_sample(
        config, bank, enc, desc_bank, sample,
        plan=plan_for_method("tpt-entropy"), original_index=original_index,
    )


def baseline_cosine_sel(
    config: AdaptationConfig,
    bank: PrototypeBank,
    enc: SurrogateEncoder,
    desc_bank: DescriptionBank,
    sample: BundleSample,
    original_index: int = 0,
) -> tuple[SampleResult, PrototypeBank]:
    """Rank-combined confidence + similarity-to-original selection."""
    return adapt_sample(
        config, bank, enc, desc_bank, sample,
        plan=plan_for_method("cosine-sel"), original_index=original_index,
    )


def run_stream(
    config: AdaptationConfig,
    bundle: FeatureBundle,
    plan: MethodPlan | None = None,
) -> tuple[RunSummary, list[SampleResult], PrototypeBank]:
    """Sequential fold over the bundle's samples carrying the bank."""
    if plan is None:
        plan = plan_for_method(config.method)
    manifest = bundle.manifest
    desc_bank = DescriptionBank(
        descriptions=bundle.descriptions,
        class_names=tuple(manifest.class_names),
    )
    enc = SurrogateEncoder(
        bundle.base_class_embeddings,
        prompt_dim=config.prompt_dim,
        mode=config.encoder_mode,
        seed=config.seed,
    )
    bank = PrototypeBank.empty(manifest.num_classes, manifest.dim)

    results: list[SampleResult] = []
    start = time.perf_counter()
    for sample in bundle.samples:
        res, bank = adapt_sample(
            config, bank, enc, desc_bank, sample,
            plan=plan, original_index=manifest.original_index,
        )
        results.append(res)
    elapsed = time.perf_counter() - start

    summary = summarize(config.method, results, bundle, elapsed)
    return summary, results, bank


def summarize(
    method: str,
    results: list[SampleResult],
    bundle: FeatureBundle,
    elapsed: float,
) -> RunSummary:
    n = len(results)
    labeled = [r for r in results if r.label >= 0]
    accuracy = (
        sum(r.adapted_pred == r.label for r in labeled) / len(labeled) if labeled else None
    )
    zs_accuracy = (
        sum(r.zero_shot_pred == r.label for r in labeled) / len(labeled) if labeled else None
    )
    mean_loss = float(np.mean([r.loss for r in results])) if results else 0.0

    masks = {s.sample_id: s.mask for s in bundle.samples if s.mask is not None}
    precisions, recalls = [], []
    for r in results:
        mask = masks.get(r.sample_id)
        if mask is None or not r.selected_union:
            continue
        informative = {int(i) for i in np.nonzero(mask)[0]}
        chosen = set(r.selected_union)
        hits = len(chosen & informative)
        precisions.append(hits / len(chosen))
        if informative:
            recalls.append(hits / len(informative))
    precision = float(np.mean(precisions)) if precisions else None
    recall = float(np.mean(recalls)) if recalls else None

    return RunSummary(
        method=method,
        num_samples=n,
        accuracy=accuracy,
        zero_shot_accuracy=zs_accuracy,
        mean_loss=mean_loss,
        selection_precision=precision,
        selection_recall=recall,
        wall_clock_per_sample=elapsed / n if n else 0.0,
        failures=sum(r.failed for r in results),
    )
