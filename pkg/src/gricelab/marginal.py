"""Exact conditional and marginal text probabilities by enumeration.

A text's conditional probability given a world is the product of per-step
speaker probabilities; its marginal probability averages that over the world
prior.  ``enumerate_texts`` tabulates every text up to a length cap, in log
space, and verifies that the completed-text mass plus the residual prefix
mass at the frontier sums to one.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetError, StructuralError
from .semantics import Language, mask_contains, text_denotation
from .speakers import NEG_INF, Speaker

MASS_TOL = 1e-9

DEFAULT_NODE_BUDGET = 5_000_000


def text_log_prob_given_world(speaker: Speaker, tokens, w: int) -> float:
    """log p(tokens | w): sum of step log-probabilities, -inf if any step
    is impossible.  The empty text has probability 1."""
    total = 0.0
    context: tuple[int, ...] = ()
    for t in tokens:
        if not 0 <= t < len(speaker.lang):
            raise StructuralError(f"token index {t} out of range")
        step = float(speaker.log_next(context, w)[t])
        if step == NEG_INF:
            return NEG_INF
        total += step
        context = context + (t,)
    return total


def text_log_prob(speaker: Speaker, tokens) -> float:
    """log p(tokens) = log E_w[p(tokens | w)], exact up to float rounding."""
    ws = speaker.ws
    terms = []
    mask = text_denotation(tokens, speaker.lang)
    for w in range(ws.size):
        if not mask_contains(mask, w):
            continue
        lp = text_log_prob_given_world(speaker, tokens, w)
        if lp != NEG_INF:
            terms.append(ws.log_prior[w] + lp)
    if not terms:
        return NEG_INF
    return float(logsumexp(terms))


@dataclass
class TextDistribution:
    """Exact log-probability table for texts up to ``max_len`` non-eos tokens.

    ``prefix_lp[tokens]`` is the probability that a sampled text begins with
    ``tokens``; ``complete_lp[tokens]`` is the probability of the completed
    text ``tokens + (eos,)``.  Keys containing the eos token are mechanical
    extensions used by pair scores (they are not well-formed texts and are
    excluded from exports and mass accounting).
    """

    max_len: int
    eos: int
    prefix_lp: dict = field(repr=False)
    complete_lp: dict = field(repr=False)

    def prefix(self, tokens) -> float:
        tokens = tuple(tokens)
        try:
            return self.prefix_lp[tokens]
        except KeyError:
            raise StructuralError(f"prefix {tokens} not tabulated") from None

    def complete(self, tokens) -> float:
        tokens = tuple(tokens)
        try:
            return self.complete_lp[tokens]
        except KeyError:
            raise StructuralError(f"completion of {tokens} not tabulated") from None

    def well_formed_items(self):
        """Yield (tokens, kind, logp) for genuine texts, deterministic order."""
        for tokens in sorted(k for k in self.prefix_lp if self.eos not in k):
            yield tokens, "prefix", self.prefix_lp[tokens]
        for tokens in sorted(k for k in self.complete_lp if self.eos not in k):
            yield tokens, "complete", self.complete_lp[tokens]


def enumerate_texts(
    speaker: Speaker,
    max_len: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
    check_mass: bool = True,
) -> TextDistribution:
    """Tabulate p(z) for every text of at most ``max_len`` non-eos tokens.

    Also tabulates the eos-initial two-token block so pair scores are defined
    for every ordered utterance pair including the tautology.
    """
    lang, ws = speaker.lang, speaker.ws
    n_children = len(lang) - 1
    node_count = ws.size * sum(n_children**k for k in range(max_len + 1))
    if node_count > node_budget:
        raise BudgetError(
            f"enumeration needs {node_count} (world, prefix) cells, budget is {node_budget}"
        )

    non_eos = [v for v in range(len(lang)) if v != lang.eos]
    prefix_lp: dict[tuple, float] = {}
    complete_lp: dict[tuple, float] = {}

    def marginal(perworld: np.ndarray) -> float:
        terms = ws.log_prior + perworld
        finite = terms[~np.isinf(terms)]
        if finite.size == 0:
            return NEG_INF
        return float(logsumexp(finite))

    # Depth-first over prefixes, carrying per-world log p(prefix | w).
    stack = [((), np.zeros(ws.size))]
    while stack:
        prefix, perworld = stack.pop()
        prefix_lp[prefix] = marginal(perworld)
        alive = [w for w in range(ws.size) if perworld[w] != NEG_INF]
        if not alive:
            dead = np.full(ws.size, NEG_INF)
            complete_lp[prefix] = NEG_INF
            if len(prefix) < max_len:
                stack.extend((prefix + (v,), dead) for v in non_eos)
            continue
        step_rows = {w: speaker.log_next(prefix, w) for w in alive}
        comp = np.full(ws.size, NEG_INF)
        for w in alive:
            comp[w] = perworld[w] + step_rows[w][lang.eos]
        complete_lp[prefix] = marginal(comp)
        if len(prefix) < max_len:
            for v in non_eos:
                child = np.full(ws.size, NEG_INF)
                for w in alive:
                    step = step_rows[w][v]
                    if step != NEG_INF:
                        child[w] = perworld[w] + step
                stack.append((prefix + (v,), child))

    # Mechanical eos-initial block: p(eos, b) for every utterance b, so
    # scores like the repeat ratio are defined when x is the tautology.
    eos = lang.eos
    prefix_lp[(eos,)] = complete_lp[()]
    for v in range(len(lang)):
        lp = text_log_prob(speaker, (eos, v))
        prefix_lp[(eos, v)] = lp
        if v == eos:
            complete_lp[(eos,)] = lp

    dist = TextDistribution(max_len=max_len, eos=eos, prefix_lp=prefix_lp, complete_lp=complete_lp)
    if check_mass:
        defect = total_mass_defect(dist, lang)
        if abs(defect) > MASS_TOL:
            raise StructuralError(f"text mass defect {defect:.3e} exceeds {MASS_TOL:.0e}")
    return dist


def total_mass_defect(dist: TextDistribution, lang: Language) -> float:
    """1 minus (completed mass up to the cap + residual prefix mass at the
    frontier); should vanish for a locally normalized speaker."""
    completed = [
        math.exp(lp)
        for tokens, kind, lp in dist.well_formed_items()
        if kind == "complete" and lp != NEG_INF
    ]
    frontier = []
    for tokens in dist.prefix_lp:
        if len(tokens) == dist.max_len and dist.eos not in tokens:
            lp = dist.prefix_lp[tokens]
            lc = dist.complete_lp[tokens]
            frontier.append((math.exp(lp) if lp != NEG_INF else 0.0) - (math.exp(lc) if lc != NEG_INF else 0.0))
    return 1.0 - (math.fsum(completed) + math.fsum(frontier))


def export_table_csv(dist: TextDistribution, lang: Language, fileobj) -> None:
    """Write (text, kind, log_prob) rows; 17 significant digits."""
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["text", "kind", "log_prob"])
    for tokens, kind, lp in dist.well_formed_items():
        writer.writerow([" ".join(lang.ids(tokens)), kind, format_log_prob(lp)])


def format_log_prob(lp: float) -> str:
    if lp == NEG_INF:
        return "-inf"
    return f"{lp:.17g}"
