import io
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from gricelab.enttest import (
    CONTRADICTORY,
    ENTAILS,
    INCOMPARABLE,
    LABEL_ENT_OR_NEAR,
    LABEL_ENTAILS,
    LABEL_NEAR,
    LABEL_NOT,
    STRICTLY_ENTAILS,
    build_verdict,
    classify,
    cost_recovery,
    information_balance,
    gricean_score,
    ground_truth,
    s_score,
    u_score,
    verdicts_to_csv,
)
from gricelab.enttest import test_independent as independent_residuals
from gricelab.enttest import test_nonredundant_strict as nonredundant_strict
from gricelab.enttest import test_uniform as uniform_residual
from gricelab.enttest import test_uniform_omega as uniform_omega_residual
from gricelab.marginal import NEG_INF, enumerate_texts, text_log_prob
from gricelab.semantics import mask_entails
from gricelab.speakers import (
    CostFunction,
    DynamicGriceanSpeaker,
    DynamicRsaListener,
    FactorizedTruthfulSpeaker,
    StaticRsaSpeaker,
)
from gricelab.experiments import build_sweep_language, run_counterexample_sweep, sweep_speaker
from gricelab.config import validate_config


@pytest.fixture(scope="module")
def udist(uniform3):
    return enumerate_texts(uniform3, 2)


@pytest.fixture(scope="module")
def gdist(gricean3):
    return enumerate_texts(gricean3, 2)


@pytest.fixture(scope="module")
def ndist(nonredundant3):
    return enumerate_texts(nonredundant3, 2)


def entailed(lang, x, y):
    return mask_entails(int(lang.masks[x]), int(lang.masks[y]))


class TestGroundTruth:
    def test_categories(self, synthetic3):
        _, lang = synthetic3
        i = lang.index
        assert ground_truth(lang, i("100"), i("110")) == STRICTLY_ENTAILS
        assert ground_truth(lang, i("100"), i("100")) == ENTAILS
        assert ground_truth(lang, i("100"), i("010")) == CONTRADICTORY
        assert ground_truth(lang, i("110"), i("011")) == INCOMPARABLE
        assert ground_truth(lang, i("110"), i("100")) == INCOMPARABLE


class TestUniformTest:
    def test_entailing_pair_zero(self, udist, synthetic3):
        _, lang = synthetic3
        assert abs(uniform_residual(udist, lang.index("100"), lang.index("110"))) < 1e-12

    def test_identity_zero(self, udist):
        for x in range(7):
            assert uniform_residual(udist, x, x) == 0.0

    def test_reverse_direction_log_two(self, udist, synthetic3):
        _, lang = synthetic3
        res = uniform_residual(udist, lang.index("110"), lang.index("100"))
        assert res == pytest.approx(-math.log(2))

    def test_contradiction_flagged(self, udist, synthetic3):
        _, lang = synthetic3
        assert uniform_residual(udist, lang.index("100"), lang.index("010")) == NEG_INF

    def test_exhaustive_dichotomy(self, udist, synthetic3):
        _, lang = synthetic3
        for x in range(7):
            for y in range(7):
                res = uniform_residual(udist, x, y)
                res_o = uniform_omega_residual(udist, x, y)
                if entailed(lang, x, y):
                    assert abs(res) < 1e-9 and abs(res_o) < 1e-9
                elif ground_truth(lang, x, y) == CONTRADICTORY:
                    assert res == NEG_INF and res_o == NEG_INF
                else:
                    assert abs(res) > 1e-6 and abs(res_o) > 1e-6


class TestIndependentTest:
    @pytest.mark.parametrize("depth", [0, 1, 2])
    def test_static_rsa_dichotomy(self, synthetic3, depth):
        ws, lang = synthetic3
        sp = StaticRsaSpeaker(lang, ws, depth, CostFunction.length_cost(lang, 0.1))
        dist = enumerate_texts(sp, 2)
        for x in range(7):
            for y in range(7):
                if ground_truth(lang, x, y) == CONTRADICTORY:
                    continue
                res = independent_residuals(dist, x, y)
                if entailed(lang, x, y):
                    assert abs(res.tau_form) < 1e-9
                    assert abs(res.marginal_form) < 1e-9
                else:
                    assert abs(res.tau_form) > 1e-6
                    assert abs(res.marginal_form) > 1e-6
                assert abs(res.tau_form - res.marginal_form) < 1e-9

    def test_factorized_tau_form_any_weights(self, synthetic3):
        ws, lang = synthetic3
        rng = np.random.default_rng(9)
        for _ in range(5):
            sp = FactorizedTruthfulSpeaker(lang, ws, rng.uniform(0.3, 3.0, size=7))
            dist = enumerate_texts(sp, 2)
            for x in range(7):
                for y in range(7):
                    if ground_truth(lang, x, y) == CONTRADICTORY:
                        continue
                    res = independent_residuals(dist, x, y).tau_form
                    assert (abs(res) < 1e-9) == entailed(lang, x, y)

    def test_marginal_form_needs_symmetric_per_world_factor(self, synthetic3):
        # The single-text ratio form holds only when the speaker's per-world
        # factor is world-uniform (so one-sentence prefixes are proportional
        # to their completions); asymmetric weights break it even for a true
        # entailment, while the tautology form is unaffected.
        ws, lang = synthetic3
        f = np.ones(7)
        f[lang.index("100")] = 4.0
        sp = FactorizedTruthfulSpeaker(lang, ws, f)
        dist = enumerate_texts(sp, 2)
        res = independent_residuals(dist, lang.index("100"), lang.index("110"))
        assert abs(res.tau_form) < 1e-12
        assert abs(res.marginal_form) > 1e-3

    def test_non_tautological_tau_rejected(self, udist, synthetic3):
        _, lang = synthetic3
        from gricelab.errors import ParameterError

        with pytest.raises(ParameterError):
            independent_residuals(udist, 0, 1, tau=lang.index("110"), lang=lang)


class TestGriceanScore:
    def test_identity_exact_zero(self, gdist):
        for x in range(7):
            assert gricean_score(gdist, x, x) == 0.0

    def test_entailing_pair(self, gdist, synthetic3):
        _, lang = synthetic3
        assert abs(gricean_score(gdist, lang.index("100"), lang.index("110"))) < 1e-9

    def test_contradiction_flagged_neg_inf(self, gdist, synthetic3):
        _, lang = synthetic3
        assert gricean_score(gdist, lang.index("100"), lang.index("010")) == NEG_INF

    def test_cost_identity_all_utterances(self, gdist, gricean3, synthetic3):
        # repeat ratio recovers the cost gap for every utterance including
        # the tautology
        _, lang = synthetic3
        c_omega = gricean3.cost.of(lang.eos)
        for x in range(7):
            recovered = cost_recovery(gdist, x, c_omega)
            assert recovered == pytest.approx(gricean3.cost.of(x), abs=1e-9)

    def test_cost_identity_other_configs(self, synthetic3):
        ws, lang = synthetic3
        for alpha, coeff in [(1.0, 0.65), (2.0, 0.3)]:
            cost = CostFunction.length_cost(lang, coeff)
            sp = DynamicGriceanSpeaker(
                lang, ws, alpha, cost, DynamicRsaListener(lang, ws, 0, cost)
            )
            dist = enumerate_texts(sp, 2)
            for x in range(7):
                got = dist.complete((x,)) - dist.prefix((x, x))
                assert got == pytest.approx(cost.of(x) - cost.of(lang.eos), abs=1e-9)

    def test_uniform_speaker_recovers_constant_cost(self, udist):
        for x in range(7):
            assert cost_recovery(udist, x, 0.3) == pytest.approx(0.3, abs=1e-12)

    def test_doubling_coefficient_doubles_recovery(self, synthetic3):
        ws, lang = synthetic3
        recovered = {}
        for coeff in (0.1, 0.2):
            cost = CostFunction.length_cost(lang, coeff)
            sp = DynamicGriceanSpeaker(
                lang, ws, 5.0, cost, DynamicRsaListener(lang, ws, 0, cost)
            )
            dist = enumerate_texts(sp, 2)
            recovered[coeff] = cost_recovery(dist, lang.index("100"), cost.of(lang.eos))
        assert recovered[0.2] == pytest.approx(2 * recovered[0.1], abs=1e-9)


class TestSAndUScores:
    def test_s_zero_on_entailment(self, gdist, gricean3, synthetic3):
        _, lang = synthetic3
        s = s_score(gdist, lang.index("100"), lang.index("110"), gricean3.cost)
        assert abs(s) < 1e-9

    def test_s_identity_zero_via_cost_identity(self, gdist, gricean3):
        for x in range(7):
            assert abs(s_score(gdist, x, x, gricean3.cost)) < 1e-9

    def test_s_contradiction_flagged_infinite(self, gdist, gricean3, synthetic3):
        _, lang = synthetic3
        s = s_score(gdist, lang.index("100"), lang.index("010"), gricean3.cost)
        assert math.isinf(s)

    def test_u_zero_on_entailment_uniform(self, udist, synthetic3):
        _, lang = synthetic3
        assert abs(u_score(udist, lang.index("100"), lang.index("110"))) < 1e-12
        for x in range(7):
            assert abs(u_score(udist, x, x)) < 1e-12

    def test_u_positive_otherwise(self, udist, synthetic3):
        _, lang = synthetic3
        assert u_score(udist, lang.index("110"), lang.index("100")) > 0


class TestNonredundantTest:
    def test_strict_pair(self, ndist, synthetic3):
        _, lang = synthetic3
        assert nonredundant_strict(ndist, lang.index("100"), lang.index("110"))

    def test_identity_false(self, ndist):
        for x in range(6):
            assert not nonredundant_strict(ndist, x, x)

    def test_contradiction_false(self, ndist, synthetic3):
        _, lang = synthetic3
        assert not nonredundant_strict(ndist, lang.index("100"), lang.index("010"))

    def test_exhaustive_matches_oracle(self, ndist, synthetic3):
        _, lang = synthetic3
        non_eos = [v for v in range(7) if v != lang.eos]
        for x in non_eos:
            for y in non_eos:
                expected = ground_truth(lang, x, y) == STRICTLY_ENTAILS
                assert nonredundant_strict(ndist, x, y) == expected


class TestInformationBalance:
    def test_entailment_balances(self, gricean3, synthetic3):
        _, lang = synthetic3
        check = information_balance(gricean3, lang.index("100"), lang.index("110"))
        assert abs(check.residual) < 1e-12 * check.i_const
        assert not check.y_empty

    def test_pure_contradiction(self, gricean3, synthetic3):
        _, lang = synthetic3
        check = information_balance(gricean3, lang.index("100"), lang.index("010"))
        assert check.y_empty
        assert check.residual == pytest.approx(-check.i_const)
        assert math.isnan(check.i_y)

    def test_matches_g_score_exactly(self, gricean3, gdist):
        # exp(g) equals the ratio of the balance terms wherever finite
        for x in range(7):
            for y in range(7):
                g = gricean_score(gdist, x, y)
                check = information_balance(gricean3, x, y)
                if math.isfinite(g):
                    assert math.exp(g) == pytest.approx(
                        (check.residual + check.i_const) / check.i_const, rel=1e-9
                    )
                else:
                    assert check.residual == pytest.approx(-check.i_const)

    def test_sweep_crossing_consistency(self):
        # the two zero characterizations agree pointwise along the sweep
        cfg = validate_config({"experiment": {"kind": "counterexample-sweep"}})
        result = run_counterexample_sweep(cfg)
        for p in result.points:
            g_zero = math.isfinite(p.g) and abs(p.g) < 1e-9
            resid_zero = abs(p.check.residual) < 1e-9 * p.check.i_const
            assert g_zero == resid_zero


def calibrated_near_contradiction(removed=8, lo=1e-4, hi=1e-3):
    """Tune the rare-world prior weight until the g score vanishes at a pair
    whose jointly-true worlds carry almost no prior mass.  Anchoring the
    plain worlds (instead of the rare ones) suppresses their weight in the
    balance, which is what lets a tiny surviving set compensate."""

    def build(rare_weight):
        ws, lang, x, y = build_sweep_language(
            removed, rare_weight=rare_weight, outside_weight=0.5, anchored_worlds="plain"
        )
        return ws, lang, sweep_speaker(ws, lang, alpha=5.0, cost_coefficient=0.1), x, y

    def g_at(rare_weight):
        ws, lang, speaker, x, y = build(rare_weight)
        return (
            text_log_prob(speaker, (x, y))
            - text_log_prob(speaker, (x, lang.eos))
            - text_log_prob(speaker, (y, y))
            + text_log_prob(speaker, (y, lang.eos))
        )

    weight = brentq(g_at, lo, hi, xtol=1e-18, rtol=8.9e-16)
    return build(weight)


class TestClassify:
    def test_entailing_pair(self, gdist, gricean3, synthetic3):
        ws, lang = synthetic3
        verdict = build_verdict(
            gdist, lang, ws, lang.index("100"), lang.index("110"),
            cost=gricean3.cost, speaker=gricean3,
        )
        assert verdict.ground_truth == STRICTLY_ENTAILS
        assert verdict.classification == LABEL_ENT_OR_NEAR
        assert verdict.refined == LABEL_ENTAILS

    def test_clearly_non_entailing(self, gdist, gricean3, synthetic3):
        ws, lang = synthetic3
        verdict = build_verdict(
            gdist, lang, ws, lang.index("110"), lang.index("100"),
            cost=gricean3.cost, speaker=gricean3,
        )
        assert verdict.classification == LABEL_NOT
        assert verdict.refined == LABEL_NOT

    def test_calibrated_near_contradiction(self):
        ws, lang, speaker, x, y = calibrated_near_contradiction()
        dist = enumerate_texts(speaker, 2, node_budget=10_000_000)
        verdict = build_verdict(dist, lang, ws, x, y, cost=speaker.cost, speaker=speaker)
        assert verdict.ground_truth == INCOMPARABLE
        assert abs(verdict.scores["g"]) < 1e-9
        assert verdict.classification == LABEL_ENT_OR_NEAR
        assert verdict.refined == LABEL_NEAR
        check = information_balance(speaker, x, y)
        assert abs(check.residual) < 1e-9 * check.i_const

    def test_threshold_default(self):
        label, refined, threshold = classify(0.0, p_joint=0.3, p_x=0.5, p_y=0.8, tolerance=1e-9)
        assert threshold == pytest.approx(0.25)
        assert (label, refined) == (LABEL_ENT_OR_NEAR, LABEL_ENTAILS)


class TestVerdictCsv:
    def test_columns_and_rows(self, gdist, gricean3, synthetic3):
        ws, lang = synthetic3
        verdicts = [
            build_verdict(gdist, lang, ws, x, y, cost=gricean3.cost, speaker=gricean3)
            for x in range(2)
            for y in range(2)
        ]
        buf = io.StringIO()
        verdicts_to_csv(verdicts, lang, buf)
        lines = buf.getvalue().strip().split("\n")
        assert lines[0] == (
            "x,y,ground_truth,g,s,u,uniform_residual,independent_residual,"
            "classification,refined,balance_residual"
        )
        assert len(lines) == 5
        assert lines[1].startswith("100,100,entails,0,")
