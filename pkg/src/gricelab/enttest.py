"""Distributional entailment tests computed from exact text tables.

Each test maps a pair of texts (x, y) to a residual that is zero (within
tolerance) exactly when the speaker family's characteristic equation holds.
The g score additionally admits a near-contradiction zero: ``information_balance``
computes the information-balance quantities whose product matching the
baseline is equivalent to g = 0, so the two characterizations can be
cross-validated.

Ratio conventions: inside a single log-ratio, (-inf) - (-inf) is taken as 0;
a zero numerator alone yields -inf.  Scores over impossible texts therefore
come out as infinities (flagged by the caller via ``math.isinf``), never as
exceptions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .marginal import TextDistribution, format_log_prob, text_log_prob_given_world
from .semantics import (
    Language,
    WorldSpace,
    full_mask,
    mask_contains,
    mask_entails,
    text_denotation,
    truth_probability,
)
from .speakers import NEG_INF, CostFunction, DynamicGriceanSpeaker, conditional_information

ENTAILS = "entails"
STRICTLY_ENTAILS = "strictly_entails"
INCOMPARABLE = "incomparable"
CONTRADICTORY = "contradictory"

LABEL_ENTAILS = "Entails"
LABEL_ENT_OR_NEAR = "EntailsOrNearContradiction"
LABEL_NEAR = "NearContradiction"
LABEL_NOT = "NotEntails"


def as_tokens(x) -> tuple[int, ...]:
    if isinstance(x, (int, np.integer)):
        return (int(x),)
    return tuple(int(t) for t in x)


def ground_truth(lang: Language, x, y) -> str:
    mx = text_denotation(as_tokens(x), lang)
    my = text_denotation(as_tokens(y), lang)
    if mx & my == 0:
        return CONTRADICTORY
    if mx == my:
        return ENTAILS
    if mask_entails(mx, my):
        return STRICTLY_ENTAILS
    return INCOMPARABLE


def pair_entailed(lang: Language, x, y) -> bool:
    mx = text_denotation(as_tokens(x), lang)
    my = text_denotation(as_tokens(y), lang)
    return mask_entails(mx, my)


def _pair_lp(dist: TextDistribution, x: tuple, y: tuple) -> float:
    """log p(x followed by y), using the completed-text entry when y is eos."""
    if y == (dist.eos,):
        return dist.complete(x)
    return dist.prefix(x + y)


def _log_ratio(num: float, den: float) -> float:
    if num == NEG_INF and den == NEG_INF:
        return 0.0
    if num == NEG_INF:
        return NEG_INF
    if den == NEG_INF:
        return math.inf
    return num - den


def test_uniform(dist: TextDistribution, x, y) -> float:
    """Residual log p(xy) - log p(xx); zero iff x entails y under a
    uniformly truthful speaker."""
    x, y = as_tokens(x), as_tokens(y)
    p_xx = _pair_lp(dist, x, x)
    if p_xx == NEG_INF:
        raise DegenerateInputError("p(xx) is zero; x is unsatisfiable")
    return _log_ratio(_pair_lp(dist, x, y), p_xx)


def test_uniform_omega(dist: TextDistribution, x, y) -> float:
    """Residual log p(xy) - log p(x eos); same dichotomy as ``test_uniform``."""
    x, y = as_tokens(x), as_tokens(y)
    p_xo = dist.complete(x)
    if p_xo == NEG_INF:
        raise DegenerateInputError("p(x eos) is zero; x is unsatisfiable")
    return _log_ratio(_pair_lp(dist, x, y), p_xo)


class IndependentResiduals(NamedTuple):
    tau_form: float
    marginal_form: float


def test_independent(
    dist: TextDistribution, x, y, tau: int | None = None, lang: Language | None = None
) -> IndependentResiduals:
    """Residuals of the repeat-ratio test for conditionally independent
    truthful speakers.

    tau form:      log p(xy)/p(x tau) - log p(yy)/p(y tau)
    marginal form: log p(xy)/p(x)     - log p(yy)/p(y)

    Both are zero exactly when x entails y.  ``tau`` defaults to eos; any
    full-denotation utterance is accepted.
    """
    x, y = as_tokens(x), as_tokens(y)
    if tau is None:
        tau = dist.eos
    if lang is not None and lang.utterances[tau].mask != full_mask(lang.n_worlds):
        raise ParameterError(f"tau={tau} is not a tautology")
    p_xt = _pair_lp(dist, x, (tau,))
    p_yt = _pair_lp(dist, y, (tau,))
    p_x = dist.prefix(x)
    p_y = dist.prefix(y)
    if NEG_INF in (p_xt, p_yt, p_x, p_y):
        raise DegenerateInputError("denominator probability is zero")
    p_xy = _pair_lp(dist, x, y)
    p_yy = _pair_lp(dist, y, y)
    tau_form = _log_ratio(p_xy, p_xt) - _log_ratio(p_yy, p_yt)
    marginal_form = _log_ratio(p_xy, p_x) - _log_ratio(p_yy, p_y)
    return IndependentResiduals(tau_form, marginal_form)


def gricean_score(dist: TextDistribution, x, y) -> float:
    """g(x, y) = log p(xy)/p(x eos) - log p(yy)/p(y eos).

    Zero iff x entails y OR x, y form a near contradiction balancing the
    information-weight condition (see ``information_balance``); infinities
    are returned, not raised."""
    x, y = as_tokens(x), as_tokens(y)
    left = _log_ratio(_pair_lp(dist, x, y), dist.complete(x))
    right = _log_ratio(_pair_lp(dist, y, y), dist.complete(y))
    if math.isinf(left) and math.isinf(right) and left == right:
        return left
    return left - right


def cost_recovery(dist: TextDistribution, x, c_omega: float) -> float:
    """Recover cost(x) = log p(x eos) - log p(xx) + cost(eos); a sentence is
    costly to the extent it is unlikely to be repeated."""
    x = as_tokens(x)
    p_xx = _pair_lp(dist, x, x)
    if p_xx == NEG_INF:
        raise DegenerateInputError("p(xx) is zero")
    return dist.complete(x) - p_xx + c_omega


def s_score(dist: TextDistribution, x, y, cost: CostFunction) -> float:
    """log p(x eos) - log p(xy) - cost(y) + cost(eos); zero iff x entails y
    under a Gricean speaker, given the true cost function."""
    x, y = as_tokens(x), as_tokens(y)
    ratio = _log_ratio(dist.complete(x), _pair_lp(dist, x, y))
    if math.isinf(ratio):
        return ratio
    return ratio - cost.of_text(y) + cost.of(dist.eos)


def u_score(dist: TextDistribution, x, y) -> float:
    """log p(x eos) - log p(xy); zero iff x entails y under a uniformly
    truthful speaker (corpus-facing form)."""
    x, y = as_tokens(x), as_tokens(y)
    return _log_ratio(dist.complete(x), _pair_lp(dist, x, y))


def test_nonredundant_strict(dist: TextDistribution, x, y) -> bool:
    """p(xy) = 0 and p(yx) != 0, with exact zero tests; true iff x strictly
    entails y under a nonredundantly truthful speaker."""
    x, y = as_tokens(x), as_tokens(y)
    return _pair_lp(dist, x, y) == NEG_INF and _pair_lp(dist, y, x) != NEG_INF


@dataclass(frozen=True)
class InformationBalance:
    """Quantities of the revised zero condition for the g score.

    ``i_const`` is the prior-weighted mean of the speaker's local-normalizer
    ratio g(x, w); ``p_y * i_y`` is the same mean restricted to the worlds
    where x and y are both true, reweighted by the exponentiated (alpha-
    scaled) information y carries there.  ``residual = p_y * i_y - i_const``
    vanishes exactly when g(x, y) = 0.
    """

    p_y: float
    i_y: float
    i_const: float
    residual: float
    y_empty: bool


def information_balance(speaker: DynamicGriceanSpeaker, x, y) -> InformationBalance:
    x = as_tokens(x)
    (y_tok,) = as_tokens(y)
    lang, ws = speaker.lang, speaker.ws
    mask_x = text_denotation(x, lang)
    if mask_x == 0:
        raise DegenerateInputError("x is unsatisfiable")
    mask_y = int(lang.masks[y_tok])
    mask_joint = mask_x & mask_y

    weight = np.zeros(ws.size)
    for w in range(ws.size):
        if not mask_contains(mask_x, w):
            continue
        lp = text_log_prob_given_world(speaker, x, w)
        if lp == NEG_INF:
            continue
        weight[w] = ws.prior[w] * math.exp(lp - speaker.log_step_normalizer(x, w))

    i_const = float(weight.sum())
    p_y = truth_probability(mask_joint, ws)
    boosted = 0.0
    for w in range(ws.size):
        if weight[w] == 0.0 or not mask_contains(mask_joint, w):
            continue
        info = conditional_information(speaker.listener, x, y_tok, w)
        boosted += weight[w] * math.exp(speaker.alpha * info)
    y_empty = mask_joint == 0
    i_y = float("nan") if p_y == 0 else boosted / p_y
    return InformationBalance(
        p_y=p_y, i_y=i_y, i_const=i_const, residual=boosted - i_const, y_empty=y_empty
    )


@dataclass
class EntailmentVerdict:
    """All test outputs for one ordered pair, plus the mask-level ground
    truth (computed from denotations only, never from scores)."""

    x: tuple[int, ...]
    y: tuple[int, ...]
    ground_truth: str
    scores: dict = field(default_factory=dict)
    classification: str = LABEL_NOT
    refined: str = LABEL_NOT
    tolerance_used: float = 1e-9
    truth_threshold_used: float = 0.0


def classify(
    g: float,
    p_joint: float,
    p_x: float,
    p_y: float,
    tolerance: float,
    truth_threshold: float | None = None,
) -> tuple[str, str, float]:
    """Two-way label from the g score plus a threshold-based refinement.

    Returns (classification, refined, threshold_used).  The two-way label is
    honest: a vanishing g cannot by itself separate entailment from near
    contradiction.  The refinement calls the pair an entailment when the
    joint truth probability is large enough relative to the marginals.
    """
    if truth_threshold is None:
        truth_threshold = 0.5 * min(p_x, p_y)
    if math.isfinite(g) and abs(g) <= tolerance:
        label = LABEL_ENT_OR_NEAR
        refined = LABEL_ENTAILS if p_joint >= truth_threshold else LABEL_NEAR
    else:
        label = LABEL_NOT
        refined = LABEL_NOT
    return label, refined, truth_threshold


def build_verdict(
    dist: TextDistribution,
    lang: Language,
    ws: WorldSpace,
    x,
    y,
    tolerance: float = 1e-9,
    truth_threshold: float | None = None,
    cost: CostFunction | None = None,
    speaker: DynamicGriceanSpeaker | None = None,
) -> EntailmentVerdict:
    """Assemble every applicable score for a pair into one verdict."""
    x, y = as_tokens(x), as_tokens(y)
    scores: dict = {}
    scores["uniform_residual"] = test_uniform(dist, x, y)
    scores["uniform_omega_residual"] = test_uniform_omega(dist, x, y)
    try:
        indep = test_independent(dist, x, y)
        scores["independent_residual"] = indep.tau_form
        scores["independent_residual_marginal"] = indep.marginal_form
    except DegenerateInputError:
        pass
    g = gricean_score(dist, x, y)
    scores["g"] = g
    scores["u"] = u_score(dist, x, y)
    if cost is not None:
        scores["s"] = s_score(dist, x, y, cost)
    if speaker is not None and len(y) == 1:
        check = information_balance(speaker, x, y[0])
        scores["balance_residual"] = check.residual
        scores["balance_baseline"] = check.i_const
    mx = text_denotation(x, lang)
    my = text_denotation(y, lang)
    label, refined, threshold = classify(
        g,
        truth_probability(mx & my, ws),
        truth_probability(mx, ws),
        truth_probability(my, ws),
        tolerance,
        truth_threshold,
    )
    return EntailmentVerdict(
        x=x,
        y=y,
        ground_truth=ground_truth(lang, x, y),
        scores=scores,
        classification=label,
        refined=refined,
        tolerance_used=tolerance,
        truth_threshold_used=threshold,
    )


VERDICT_COLUMNS = [
    "x",
    "y",
    "ground_truth",
    "g",
    "s",
    "u",
    "uniform_residual",
    "independent_residual",
    "classification",
    "refined",
    "balance_residual",
]


def verdicts_to_csv(verdicts, lang: Language, fileobj) -> None:
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(VERDICT_COLUMNS)
    for v in verdicts:
        row = [" ".join(lang.ids(v.x)), " ".join(lang.ids(v.y)), v.ground_truth]
        for name in ("g", "s", "u", "uniform_residual", "independent_residual"):
            val = v.scores.get(name)
            row.append("" if val is None else format_log_prob(val) if val != NEG_INF else "-inf")
        row.append(v.classification)
        row.append(v.refined)
        err = v.scores.get("balance_residual")
        row.append("" if err is None else f"{err:.17g}")
        writer.writerow(row)
