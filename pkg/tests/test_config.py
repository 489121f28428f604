"""Configuration validation, method resolution, and the ablation grid."""

import pytest

from anchorsel.config import (
    AblationVariant,
    AdaptationConfig,
    METHODS,
    MethodPlan,
    ablation_variants,
    plan_for_method,
)
from anchorsel.core import InvalidConfigError


class TestAdaptationConfig:
    def test_defaults(self):
        cfg = AdaptationConfig()
        assert cfg.q == 0.10 and cfg.p == 0.05
        assert cfg.alpha == (1.0, 2.0) and cfg.beta == (2.0, 1.0)
        assert cfg.K == 3 and cfg.T == 0.3 and cfg.tau == 100.0
        assert cfg.method == "ours"
        assert cfg.bank_commit == "original"

    @pytest.mark.parametrize(
        "changes",
        [
            {"q": 0.0},
            {"q": 1.5},
            {"p": -0.1},
            {"T": 0.0},
            {"tau": -1.0},
            {"lr": 0.0},
            {"steps": -1},
            {"K": 0},
            {"alpha": (0.0, 0.0)},
            {"beta": (-1.0, 2.0)},
            {"method": "gradient-descent"},
            {"bank_commit": "everything"},
            {"prompt_dim": 0},
            {"encoder_mode": "transformer"},
            {"epsilon": 0.0},
        ],
    )
    def test_rejects_out_of_domain(self, changes):
        with pytest.raises(InvalidConfigError):
            AdaptationConfig(**changes)

    def test_replace_revalidates(self):
        cfg = AdaptationConfig()
        assert cfg.replace(q=0.2).q == 0.2
        with pytest.raises(InvalidConfigError):
            cfg.replace(q=2.0)

    def test_dict_roundtrip(self):
        cfg = AdaptationConfig(q=0.25, alpha=(0.5, 1.5), method="em-conf", steps=4)
        again = AdaptationConfig.from_dict(cfg.to_dict())
        assert again == cfg

    def test_from_dict_rejects_unknown_keys(self):
        with pytest.raises(InvalidConfigError, match="momentum"):
            AdaptationConfig.from_dict({"momentum": 0.9})

    def test_steps_zero_allowed(self):
        assert AdaptationConfig(steps=0).steps == 0


class TestMethodPlans:
    def test_every_method_resolves(self):
        for m in METHODS:
            assert isinstance(plan_for_method(m), MethodPlan)

    def test_full_method_enables_everything(self):
        plan = plan_for_method("ours")
        assert plan == MethodPlan(
            stage1="text", image_filter=True, z_text=True, z_image=True,
            loss="kld", weighting="conf", adapt=True,
        )

    def test_entropy_baseline_disables_anchors(self):
        plan = plan_for_method("tpt-entropy")
        assert plan.stage1 == "entropy"
        assert not plan.image_filter and not plan.z_text and not plan.z_image
        assert plan.loss == "em" and plan.weighting == "simple"

    def test_zero_shot_does_not_adapt(self):
        assert plan_for_method("zero-shot").adapt is False

    def test_loss_variants(self):
        assert plan_for_method("kld-simple").weighting == "simple"
        assert plan_for_method("kld-simple").loss == "kld"
        assert plan_for_method("em-conf").loss == "em"
        assert plan_for_method("em-conf").weighting == "conf"
        assert plan_for_method("em-simple") == MethodPlan(loss="em", weighting="simple")

    def test_unknown_method(self):
        with pytest.raises(InvalidConfigError):
            plan_for_method("sgd")

    def test_plan_validation(self):
        with pytest.raises(InvalidConfigError):
            MethodPlan(stage1="random")
        with pytest.raises(InvalidConfigError):
            MethodPlan(loss="mse")


class TestAblationGrid:
    def test_grid_has_eleven_rows(self):
        rows = ablation_variants(AdaptationConfig())
        assert len(rows) == 11
        assert all(isinstance(r, AblationVariant) for r in rows)
        assert len({r.label for r in rows}) == 11

    def test_all_toggles_off_is_the_entropy_baseline(self):
        rows = ablation_variants(AdaptationConfig())
        assert rows[0].toggles == (False, False, False, False)
        assert rows[0].plan == plan_for_method("tpt-entropy")

    def test_all_toggles_on_is_the_full_method(self):
        rows = ablation_variants(AdaptationConfig())
        full = [r for r in rows if r.toggles == (True, True, True, True)]
        assert len(full) == 1
        assert full[0].plan == plan_for_method("ours")

    def test_loss_rows_cover_the_two_by_two(self):
        rows = ablation_variants(AdaptationConfig())
        loss_rows = [r for r in rows if r.toggles is None]
        assert len(loss_rows) == 4
        pairs = {(r.plan.loss, r.plan.weighting) for r in loss_rows}
        assert pairs == {("em", "simple"), ("em", "conf"), ("kld", "simple"), ("kld", "conf")}

    def test_kld_simple_row_forces_uniform_weights(self):
        rows = ablation_variants(AdaptationConfig())
        row = [r for r in rows if r.label == "loss:kld-simple"][0]
        assert row.plan.weighting == "simple"

    def test_component_rows_without_sources_keep_entropy_loss(self):
        rows = ablation_variants(AdaptationConfig())
        for r in rows:
            if r.toggles is None:
                continue
            _, _, z_text, z_image = r.toggles
            if z_text or z_image:
                assert r.plan.loss == "kld" and r.plan.weighting == "conf"
            else:
                assert r.plan.loss == "em" and r.plan.weighting == "simple"
