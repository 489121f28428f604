"""Run configuration, method resolution, and the ablation grid.

A method name resolves to a MethodPlan: which scoring rule drives the
first view filter, whether the prototype filter runs, which prediction
sources join the ensemble, and which loss/weighting pair adapts the
prompt. The ablation grid enumerates the component-toggle matrix plus
the loss/weighting matrix as runnable plans.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

from .core import InvalidConfigError

METHODS = (
    "ours",
    "tpt-entropy",
    "cosine-sel",
    "zero-shot",
    "em-simple",
    "em-conf",
    "kld-simple",
)

STAGE1_MODES = ("text", "entropy", "cosine")
BANK_COMMIT_MODES = ("selected", "original")
LOSSES = ("kld", "em")
WEIGHTINGS = ("conf", "simple")


@dataclass(frozen=True)
class AdaptationConfig:
    """All knobs for one run. Defaults are the recommended operating
    point: keep the top 10% of views by text score and top 5% by image
    score, 1:2 alignment:confidence on the text side, 2:1 on the image
    side, top-3 prototype classes, sharpening temperature 0.3."""

    q: float = 0.10
    p: float = 0.05
    alpha: tuple[float, float] = (1.0, 2.0)
    beta: tuple[float, float] = (2.0, 1.0)
    K: int = 3
    T: float = 0.3
    tau: float = 100.0
    lr: float = 0.003
    steps: int = 1
    epsilon: float = 1e-8
    renormalize_anchors: bool = True
    normalize_prototypes: bool = False
    seed: int = 0
    method: str = "ours"
    bank_commit: str = "original"
    pin_original: bool = False
    prompt_dim: int = 32
    encoder_mode: str = "shared-offset"

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        self.validate()

    def validate(self) -> None:
        for name, frac in (("q", self.q), ("p", self.p)):
            if not 0.0 < frac <= 1.0:
                raise InvalidConfigError(f"{name} must lie in (0, 1], got {frac}")
        for name, val in (("T", self.T), ("tau", self.tau), ("lr", self.lr),
                          ("epsilon", self.epsilon)):
            if val <= 0:
                raise InvalidConfigError(f"{name} must be > 0, got {val}")
        if self.steps < 0:
            raise InvalidConfigError(f"steps must be >= 0, got {self.steps}")
        if self.K < 1:
            raise InvalidConfigError(f"K must be >= 1, got {self.K}")
        if len(self.alpha) != 2 or len(self.beta) != 2:
            raise InvalidConfigError("alpha and beta must each have two entries")
        for name, pair in (("alpha", self.alpha), ("beta", self.beta)):
            if any(x < 0 for x in pair) or sum(pair) == 0:
                raise InvalidConfigError(f"{name} entries must be >= 0 and not both 0")
        if self.method not in METHODS:
            raise InvalidConfigError(
                f"unknown method {self.method!r}; choose from {METHODS}"
            )
        if self.bank_commit not in BANK_COMMIT_MODES:
            raise InvalidConfigError(
                f"bank_commit must be one of {BANK_COMMIT_MODES}, got {self.bank_commit!r}"
            )
        if self.prompt_dim < 1:
            raise InvalidConfigError(f"prompt_dim must be >= 1, got {self.prompt_dim}")
        if self.encoder_mode not in ("shared-offset", "linear"):
            raise InvalidConfigError(f"unknown encoder_mode {self.encoder_mode!r}")

    def replace(self, **changes: Any) -> "AdaptationConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["alpha"] = list(self.alpha)
        d["beta"] = list(self.beta)
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AdaptationConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
        clean = dict(data)
        for key in ("alpha", "beta"):
            if key in clean:
                clean[key] = tuple(clean[key])
        return cls(**clean)


@dataclass(frozen=True)
class MethodPlan:
    """Resolved pipeline shape for one method or ablation row."""

    stage1: str = "text"  # scoring rule for the first view filter
    image_filter: bool = True  # run the prototype-anchor filter and union
    z_text: bool = True  # text-anchor logits join the ensemble
    z_image: bool = True  # prototype logits join the ensemble
    loss: str = "kld"  # adaptation loss
    weighting: str = "conf"  # ensemble weighting
    adapt: bool = True  # False = report the zero-shot prediction

    def __post_init__(self) -> None:
        if self.stage1 not in STAGE1_MODES:
            raise InvalidConfigError(f"unknown stage1 mode {self.stage1!r}")
        if self.loss not in LOSSES:
            raise InvalidConfigError(f"unknown loss {self.loss!r}")
        if self.weighting not in WEIGHTINGS:
            raise InvalidConfigError(f"unknown weighting {self.weighting!r}")


_PLANS: dict[str, MethodPlan] = {
    "ours": MethodPlan(),
    "kld-simple": MethodPlan(weighting="simple"),
    "em-conf": MethodPlan(loss="em"),
    "em-simple": MethodPlan(loss="em", weighting="simple"),
    "tpt-entropy": MethodPlan(
        stage1="entropy", image_filter=False, z_text=False, z_image=False,
        loss="em", weighting="simple",
    ),
    "cosine-sel": MethodPlan(
        stage1="cosine", image_filter=False, z_text=False, z_image=False,
        loss="em", weighting="simple",
    ),
    "zero-shot": MethodPlan(
        stage1="entropy", image_filter=False, z_text=False, z_image=False,
        loss="em", weighting="simple", adapt=False,
    ),
}


def plan_for_method(method: str) -> MethodPlan:
    try:
        return _PLANS[method]
    except KeyError:
        raise InvalidConfigError(
            f"unknown method {method!r}; choose from {METHODS}"
        ) from None


@dataclass(frozen=True)
class AblationVariant:
    label: str
    plan: MethodPlan
    toggles: tuple[bool, bool, bool, bool] | None = None  # (S_text, S_image, z_text, z_image)


def _toggle_plan(s_text: bool, s_image: bool, z_text: bool, z_image: bool) -> MethodPlan:
    """Component-toggle rows: with no extra ensemble sources the loss is
    plain entropy minimization (the starting baseline); once any source
    joins, the confidence-weighted divergence loss applies."""
    has_sources = z_text or z_image
    return MethodPlan(
        stage1="text" if s_text else "entropy",
        image_filter=s_image,
        z_text=z_text,
        z_image=z_image,
        loss="kld" if has_sources else "em",
        weighting="conf" if has_sources else "simple",
    )


def ablation_variants(config: AdaptationConfig) -> list[AblationVariant]:
    """The 7 component-toggle rows plus the 4 loss/weighting rows."""
    config.validate()
    toggle_rows = [
        (False, False, False, False),
        (True, False, False, False),
        (False, True, False, False),
        (True, True, False, False),
        (True, True, True, False),
        (True, True, False, True),
        (True, True, True, True),
    ]
    variants = [
        AblationVariant(
            label="components:"
            + ",".join(
                f"{name}={'on' if flag else 'off'}"
                for name, flag in zip(("stext", "simage", "ztext", "zimage"), row)
            ),
            plan=_toggle_plan(*row),
            toggles=row,
        )
        for row in toggle_rows
    ]
    for method in ("em-simple", "em-conf", "kld-simple", "ours"):
        variants.append(
            AblationVariant(label=f"loss:{method}", plan=plan_for_method(method))
        )
    return variants
