"""Speaker models: conditional next-utterance distributions p(y | context, w).

Five families are implemented:

* uniformly truthful      -- uniform over the utterances true in w
* factorized truthful     -- p(y | w) proportional to truth(y, w) * f(y); the
                             context is ignored, so sentences are
                             conditionally independent given the world
* static RSA              -- alternating listener/speaker normalization with a
                             fixed prior; context-free, and provably of the
                             factorized-truthful form (see ``factorization``)
* dynamic Gricean         -- weights continuations by
                             exp(alpha * information - cost) against a
                             simulated listener that conditions on the context
* nonredundantly truthful -- uniform over true utterances that strictly
                             shrink the context denotation (eos exempted so
                             texts can terminate)

All probability arithmetic is done in log space with an explicit ``-inf``
sentinel for impossible events.  Models are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, InternalConsistencyError, ParameterError
from .semantics import Language, WorldSpace, mask_contains, text_denotation

NEG_INF = float("-inf")

FACTORIZATION_TOL = 1e-10


@dataclass(frozen=True)
class CostFunction:
    """Per-utterance production costs, additive over concatenation."""

    costs: np.ndarray

    def __post_init__(self):
        costs = np.asarray(self.costs, dtype=float)
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise ParameterError("costs must be finite and nonnegative")
        costs = costs.copy()
        costs.setflags(write=False)
        object.__setattr__(self, "costs", costs)

    @classmethod
    def length_cost(cls, lang: Language, coefficient: float) -> "CostFunction":
        """cost(x) = coefficient * len(label)."""
        if coefficient < 0:
            raise ParameterError("cost coefficient must be nonnegative")
        return cls(np.array([coefficient * len(u.uid) for u in lang.utterances]))

    @classmethod
    def zero(cls, lang: Language) -> "CostFunction":
        return cls(np.zeros(len(lang)))

    def of(self, token: int) -> float:
        return float(self.costs[token])

    def of_text(self, tokens) -> float:
        return float(sum(self.costs[t] for t in tokens))


def _log_colnorm(scores: np.ndarray) -> np.ndarray:
    """Normalize log scores over axis 0 (utterances), column by column; a
    fully impossible column stays at -inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        norm = logsumexp(scores, axis=0)
        out = scores - norm[None, :]
    dead = np.isinf(norm)
    if np.any(dead):
        out[:, dead] = NEG_INF
    return out


class Speaker:
    """Base class; subclasses fill in ``log_next``.

    ``log_next(context, w)`` returns the vector of log next-utterance
    probabilities given the context token tuple and world index.  Speakers
    whose next-step distribution depends on the context only through its
    denotation mask set ``context_local = True`` and implement
    ``mask_log_next``; this enables vectorized corpus sampling.
    """

    kind: str = "abstract"
    context_local: bool = False

    def __init__(self, lang: Language, ws: WorldSpace):
        self.lang = lang
        self.ws = ws

    def log_next(self, context: tuple, w: int) -> np.ndarray:
        raise NotImplementedError

    def mask_log_next(self, mask: int, w: int) -> np.ndarray:
        raise NotImplementedError(f"{self.kind} speaker has no mask-state form")

    def params(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"kind": self.kind, **self.params()}


class _ContextFreeSpeaker(Speaker):
    """Speaker defined by a fixed (V, W) log-probability matrix."""

    context_local = True

    def __init__(self, lang: Language, ws: WorldSpace, log_matrix: np.ndarray):
        super().__init__(lang, ws)
        log_matrix = np.asarray(log_matrix, dtype=float)
        log_matrix.setflags(write=False)
        self.log_matrix = log_matrix

    def log_next(self, context: tuple, w: int) -> np.ndarray:
        return self.log_matrix[:, w]

    def mask_log_next(self, mask: int, w: int) -> np.ndarray:
        return self.log_matrix[:, w]


class UniformTruthfulSpeaker(_ContextFreeSpeaker):
    """p(y | w) = truth(y, w) / n(w) with n(w) the number of true utterances."""

    kind = "uniform"

    def __init__(self, lang: Language, ws: WorldSpace):
        ind = lang.truth_table(ws)
        with np.errstate(divide="ignore"):
            log_matrix = _log_colnorm(np.log(ind))
        super().__init__(lang, ws, log_matrix)
        self.n_true = ind.sum(axis=0)


class FactorizedTruthfulSpeaker(_ContextFreeSpeaker):
    """p(y | w) proportional to truth(y, w) * f(y).

    The constructor renormalizes per world and records the effective
    per-world factor ``g`` (the reciprocal normalizer), so the distribution
    has the form truth * f * g exactly.
    """

    kind = "factorized"

    def __init__(self, lang: Language, ws: WorldSpace, f: np.ndarray):
        f = np.asarray(f, dtype=float)
        if f.shape != (len(lang),):
            raise ParameterError("f must have one weight per utterance")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ParameterError("f weights must be finite and strictly positive")
        ind = lang.truth_table(ws)
        with np.errstate(divide="ignore"):
            scores = np.log(ind) + np.log(f)[:, None]
        super().__init__(lang, ws, _log_colnorm(scores))
        self.f = f.copy()
        self.effective_g = 1.0 / (ind * f[:, None]).sum(axis=0)

    def params(self) -> dict:
        return {"f": self.f.tolist()}


class StaticRsaSpeaker(_ContextFreeSpeaker):
    """Alternating speaker/listener recursion with a fixed listener prior.

    Depth -1 is the (normalized) indicator speaker; depth 0 weights true
    utterances by exp(-cost); greater depths make increasingly specific
    utterances more likely.  The context is never consulted, so sentences
    are conditionally independent given the world.
    """

    kind = "static_rsa"

    def __init__(
        self,
        lang: Language,
        ws: WorldSpace,
        depth: int,
        cost: CostFunction,
        listener_prior: np.ndarray | None = None,
    ):
        if depth < -1:
            raise ParameterError("depth must be >= -1")
        prior = ws.prior if listener_prior is None else np.asarray(listener_prior, dtype=float)
        if prior.shape != (ws.size,) or np.any(prior <= 0):
            raise ParameterError("listener prior must be strictly positive per world")
        prior = prior / prior.sum()

        ind = lang.truth_table(ws)
        with np.errstate(divide="ignore"):
            log_ind = np.log(ind)
        neg_cost = -cost.costs[:, None]
        log_prior = np.log(prior)[None, :]

        # Speaker matrices S_d and listener matrices L_d, d >= -1.  L_{-1} is
        # the raw indicator; listeners normalize over worlds, speakers over
        # utterances.
        s_mats: dict[int, np.ndarray] = {-1: _log_colnorm(log_ind)}
        l_prev = log_ind  # L_{-1}
        listeners: dict[int, np.ndarray] = {-1: l_prev}
        for d in range(0, depth + 1):
            s_unnorm = l_prev + neg_cost
            s_mats[d] = _log_colnorm(s_unnorm)
            base = log_ind if d == 0 else s_mats[d - 1]
            scores = base + log_prior
            with np.errstate(divide="ignore"):
                l_prev = scores - logsumexp(scores, axis=1)[:, None]
            listeners[d] = l_prev

        super().__init__(lang, ws, s_mats[depth])
        self.depth = depth
        self.cost = cost
        self.listener_prior = prior
        self._s_mats = s_mats
        self._listeners = listeners
        self._f, self._g = self._build_factorization(ind, prior, cost)

    def _build_factorization(self, ind, prior, cost):
        """Constructive f, g tables with S_d = ind * f_d * g_d."""
        v, w = ind.shape
        exp_neg_c = np.exp(-cost.costs)
        tables = {-1: (np.ones(v), np.ones(w))}
        if self.depth >= 0:
            g0 = 1.0 / (ind * exp_neg_c[:, None]).sum(axis=0)
            tables[0] = (exp_neg_c.copy(), g0)
        d = -1 if self.depth % 2 else 0
        while d + 2 <= self.depth:
            f_d, g_d = tables[d]
            # The base of the chain is the raw indicator, not a distribution.
            s_d = ind if d == -1 else np.exp(self._s_mats[d])
            f_prime = f_d / (s_d * prior[None, :]).sum(axis=1)
            g_prime = g_d * prior
            l_next = np.exp(self._listeners[d + 1])
            g_new = g_prime / (l_next * exp_neg_c[:, None]).sum(axis=0)
            tables[d + 2] = (f_prime * exp_neg_c, g_new)
            d += 2
        return tables[self.depth]

    def factorization(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (f, g) with p(y|w) = truth(y, w) * f(y) * g(w), verified.

        Depth -1 factorizes the recursion's raw indicator base (unit f and
        g); every other depth factorizes the speaker distribution itself.
        Raises InternalConsistencyError if the relative residual at any true
        (utterance, world) cell exceeds tolerance; that would indicate a bug
        in the recursion, not bad input.
        """
        ind = self.lang.truth_table(self.ws)
        probs = ind if self.depth == -1 else np.exp(self.log_matrix)
        recon = ind * self._f[:, None] * self._g[None, :]
        mask = ind > 0
        residual = np.max(np.abs(probs[mask] - recon[mask]) / probs[mask])
        if residual > FACTORIZATION_TOL:
            raise InternalConsistencyError(
                f"factorization residual {residual:.3e} exceeds {FACTORIZATION_TOL:.0e}"
            )
        return self._f.copy(), self._g.copy()

    def params(self) -> dict:
        return {"depth": self.depth, "costs": self.cost.costs.tolist()}


class DynamicRsaListener:
    """Posterior over worlds given a context, at a fixed recursion depth.

    Depth 0 (or -1) is the literal listener: posterior proportional to the
    context denotation's indicator times the prior.  Depth n >= 1 updates the
    prior through the depth-(n-1) speaker one sentence at a time.  Posteriors
    for unsatisfiable contexts are not defined; querying one raises
    DomainError.
    """

    def __init__(
        self,
        lang: Language,
        ws: WorldSpace,
        depth: int,
        cost: CostFunction | None = None,
        prior: np.ndarray | None = None,
    ):
        if depth < -1:
            raise ParameterError("depth must be >= -1")
        if depth >= 1 and cost is None:
            raise ParameterError("depths >= 1 need a cost function")
        self.lang = lang
        self.ws = ws
        self.depth = depth
        self.cost = cost
        prior = ws.prior if prior is None else np.asarray(prior, dtype=float)
        if prior.shape != (ws.size,) or np.any(prior <= 0):
            raise ParameterError("listener prior must be strictly positive per world")
        self.prior = prior / prior.sum()
        self.log_prior = np.log(self.prior)
        self.context_local = depth <= 0
        self._mask_logmass: dict[int, float] = {}
        self._post_memo: dict[tuple, np.ndarray] = {}
        self._step_memo: dict[tuple, np.ndarray] = {}
        ind = lang.truth_table(ws)
        with np.errstate(divide="ignore"):
            self._log_ind = np.log(ind)

    def log_mask_mass(self, mask: int) -> float:
        got = self._mask_logmass.get(mask)
        if got is None:
            p = sum(self.prior[w] for w in range(self.ws.size) if mask_contains(mask, w))
            got = float(np.log(p)) if p > 0 else NEG_INF
            self._mask_logmass[mask] = got
        return got

    def log_posterior_mask(self, mask: int) -> np.ndarray:
        """Literal posterior for a denotation mask (depth <= 0 only)."""
        if not self.context_local:
            raise DomainError("posterior is not mask-determined at this depth")
        if mask == 0:
            raise DomainError("unsatisfiable context")
        out = np.full(self.ws.size, NEG_INF)
        norm = self.log_mask_mass(mask)
        for w in range(self.ws.size):
            if mask_contains(mask, w):
                out[w] = self.log_prior[w] - norm
        return out

    def log_posterior(self, context: tuple) -> np.ndarray:
        context = tuple(context)
        if self.context_local:
            return self.log_posterior_mask(text_denotation(context, self.lang))
        got = self._post_memo.get(context)
        if got is None:
            got = self._compute_posterior(context)
            self._post_memo[context] = got
        if np.all(np.isinf(got)):
            raise DomainError("unsatisfiable context")
        return got

    def _compute_posterior(self, context: tuple) -> np.ndarray:
        if not context:
            return self.log_prior.copy()
        head, last = context[:-1], context[-1]
        base = self._compute_posterior(head)
        self._post_memo[head] = base
        step = self._speaker_step(self.depth - 1, head)
        scores = step[last] + base
        with np.errstate(divide="ignore"):
            norm = logsumexp(scores)
        if np.isinf(norm):
            return scores  # all -inf: unsatisfiable, flagged on query
        return scores - norm

    def _speaker_step(self, d: int, context: tuple) -> np.ndarray:
        """Log s_d(y | context, w) as a (V, W) matrix; d = -1 is the raw
        (unnormalized) truth indicator."""
        if d == -1:
            return self._log_ind
        key = (d, context)
        got = self._step_memo.get(key)
        if got is None:
            if d == 0:
                scores = self._log_ind - self.cost.costs[:, None]
            else:
                rows = []
                for v in range(len(self.lang)):
                    if text_denotation(context + (v,), self.lang) == 0:
                        rows.append(np.full(self.ws.size, NEG_INF))
                    else:
                        rows.append(self._lower_posterior(d - 1, context + (v,)))
                scores = np.stack(rows) - self.cost.costs[:, None]
            got = _log_colnorm(scores)
            self._step_memo[key] = got
        return got

    def _lower_posterior(self, depth: int, context: tuple) -> np.ndarray:
        if depth <= 0:
            mask = text_denotation(context, self.lang)
            if mask == 0:
                return np.full(self.ws.size, NEG_INF)
            return self.log_posterior_mask_at(mask)
        sub = self._sub_listener(depth)
        got = sub._post_memo.get(context)
        if got is None:
            got = sub._compute_posterior(context)
            sub._post_memo[context] = got
        return got

    def log_posterior_mask_at(self, mask: int) -> np.ndarray:
        out = np.full(self.ws.size, NEG_INF)
        norm = self.log_mask_mass(mask)
        for w in range(self.ws.size):
            if mask_contains(mask, w):
                out[w] = self.log_prior[w] - norm
        return out

    def _sub_listener(self, depth: int) -> "DynamicRsaListener":
        if not hasattr(self, "_subs"):
            self._subs: dict[int, DynamicRsaListener] = {}
        if depth not in self._subs:
            self._subs[depth] = DynamicRsaListener(self.lang, self.ws, depth, self.cost, self.prior)
        return self._subs[depth]

    def describe(self) -> dict:
        return {"depth": self.depth, "context_local": self.context_local}


def conditional_information(listener: DynamicRsaListener, x: tuple, y: int, w: int) -> float:
    """log l(w | xy) - log l(w | x), with log 0 = -inf and (-inf) - (-inf) = 0."""
    lang = listener.lang
    mask_x = text_denotation(x, lang)
    if mask_x == 0:
        raise DomainError("context is unsatisfiable")
    mask_xy = mask_x & lang.utterances[y].mask
    lp_x = listener.log_posterior(tuple(x))[w]
    if mask_xy == 0:
        lp_xy = NEG_INF
    else:
        lp_xy = listener.log_posterior(tuple(x) + (y,))[w]
    if np.isinf(lp_x) and np.isinf(lp_xy):
        return 0.0
    if np.isinf(lp_xy):
        return NEG_INF
    return float(lp_xy - lp_x)


class DynamicGriceanSpeaker(Speaker):
    """p(y | x, w) proportional to exp(alpha * I(y | x; w) - cost(y)),
    locally normalized at each sentence.

    ``I`` is the conditional information of y given x to the simulated
    listener.  eos always carries zero information and finite cost, so the
    support is never empty.  Querying a (context, world) pair with the
    context false in that world raises DomainError: the speaker never
    reaches such states.
    """

    kind = "dynamic_gricean"

    def __init__(
        self,
        lang: Language,
        ws: WorldSpace,
        alpha: float,
        cost: CostFunction,
        listener: DynamicRsaListener,
    ):
        if not (alpha > 0 and np.isfinite(alpha)):
            raise ParameterError("alpha must be positive and finite")
        super().__init__(lang, ws)
        self.alpha = float(alpha)
        self.cost = cost
        self.listener = listener
        self.context_local = listener.context_local
        self._row_memo: dict = {}

    def log_next(self, context: tuple, w: int) -> np.ndarray:
        context = tuple(context)
        mask = text_denotation(context, self.lang)
        if self.context_local:
            return self.mask_log_next(mask, w)
        if not mask_contains(mask, w):
            raise DomainError("context is false in this world")
        key = (context, w)
        got = self._row_memo.get(key)
        if got is None:
            got = self._row_general(context, mask, w)
            self._row_memo[key] = got
        return got

    def mask_log_next(self, mask: int, w: int) -> np.ndarray:
        if not mask_contains(mask, w):
            raise DomainError("context is false in this world")
        key = (mask, w)
        got = self._row_memo.get(key)
        if got is None:
            got, _ = self._row_and_norm_mask(mask, w)
            self._row_memo[key] = got
        return got

    def _scores_mask(self, mask: int, w: int) -> np.ndarray:
        listener = self.listener
        lp_mask = listener.log_mask_mass(mask)
        scores = np.full(len(self.lang), NEG_INF)
        for v in range(len(self.lang)):
            m2 = mask & int(self.lang.masks[v])
            if mask_contains(m2, w):
                info = lp_mask - listener.log_mask_mass(m2)
                scores[v] = self.alpha * info - self.cost.costs[v]
        return scores

    def _row_and_norm_mask(self, mask: int, w: int) -> tuple[np.ndarray, float]:
        scores = self._scores_mask(mask, w)
        norm = float(logsumexp(scores))
        return scores - norm, norm

    def _row_general(self, context: tuple, mask: int, w: int) -> np.ndarray:
        scores, _ = self._scores_general(context, mask, w)
        return scores - logsumexp(scores)

    def _scores_general(self, context: tuple, mask: int, w: int) -> tuple[np.ndarray, float]:
        listener = self.listener
        lp_x = listener.log_posterior(context)[w]
        scores = np.full(len(self.lang), NEG_INF)
        for v in range(len(self.lang)):
            if mask & int(self.lang.masks[v]) == 0:
                continue
            lp_xy = listener.log_posterior(context + (v,))[w]
            if np.isinf(lp_xy):
                continue
            info = 0.0 if np.isinf(lp_x) else lp_xy - lp_x
            scores[v] = self.alpha * info - self.cost.costs[v]
        return scores, lp_x

    def log_step_normalizer(self, context: tuple, w: int) -> float:
        """Log of the local normalizer Z(context, w) = sum_y exp(alpha*I - c)."""
        context = tuple(context)
        mask = text_denotation(context, self.lang)
        if not mask_contains(mask, w):
            raise DomainError("context is false in this world")
        if self.context_local:
            scores = self._scores_mask(mask, w)
        else:
            scores, _ = self._scores_general(context, mask, w)
        return float(logsumexp(scores))

    def params(self) -> dict:
        return {
            "alpha": self.alpha,
            "costs": self.cost.costs.tolist(),
            "listener": self.listener.describe(),
        }


class NonredundantSpeaker(Speaker):
    """Uniform over true utterances that strictly shrink the context
    denotation.  The eos tautology never shrinks anything; it is exempted
    from the redundancy clause so complete texts exist (the zero pattern
    over all other utterances follows the definition exactly).
    """

    kind = "nonredundant"
    context_local = True
    omega_exempt = True

    def __init__(self, lang: Language, ws: WorldSpace):
        super().__init__(lang, ws)
        self._row_memo: dict = {}

    def log_next(self, context: tuple, w: int) -> np.ndarray:
        return self.mask_log_next(text_denotation(context, self.lang), w)

    def mask_log_next(self, mask: int, w: int) -> np.ndarray:
        key = (mask, w)
        got = self._row_memo.get(key)
        if got is not None:
            return got
        lang = self.lang
        support = np.zeros(len(lang), dtype=bool)
        for v in range(len(lang)):
            mv = int(lang.masks[v])
            if not mask_contains(mv, w):
                continue
            if v == lang.eos or (mask & mv) != mask:
                support[v] = True
        row = np.full(len(lang), NEG_INF)
        row[support] = -np.log(support.sum())
        self._row_memo[key] = row
        return row


class DynamicRsaSpeaker(Speaker):
    """Dynamic-recursion speaker at a fixed depth: the next utterance is
    weighted by the depth-(n-1) listener's posterior on the extended context
    times exp(-cost).  Depth 0 reduces to weighting true utterances by
    exp(-cost), i.e. a factorized-truthful speaker."""

    kind = "dynamic_rsa"

    def __init__(
        self,
        lang: Language,
        ws: WorldSpace,
        depth: int,
        cost: CostFunction,
        prior: np.ndarray | None = None,
    ):
        if depth < 0:
            raise ParameterError("depth must be >= 0")
        super().__init__(lang, ws)
        self.depth = depth
        self.cost = cost
        self.listener = None if depth == 0 else DynamicRsaListener(lang, ws, depth - 1, cost, prior)
        self.context_local = depth == 0 or self.listener.context_local
        ind = lang.truth_table(ws)
        with np.errstate(divide="ignore"):
            self._log_ind = np.log(ind)
        self._row_memo: dict = {}

    def log_next(self, context: tuple, w: int) -> np.ndarray:
        context = tuple(context)
        if self.depth == 0:
            scores = self._log_ind[:, w] - self.cost.costs
            return scores - logsumexp(scores)
        mask = text_denotation(context, self.lang)
        if not mask_contains(mask, w):
            raise DomainError("context is false in this world")
        key = (mask, w) if self.context_local else (context, w)
        got = self._row_memo.get(key)
        if got is None:
            scores = np.full(len(self.lang), NEG_INF)
            for v in range(len(self.lang)):
                if mask & int(self.lang.masks[v]) == 0:
                    continue
                lp = self.listener.log_posterior(context + (v,))[w]
                if not np.isinf(lp):
                    scores[v] = lp - self.cost.costs[v]
            got = scores - logsumexp(scores)
            self._row_memo[key] = got
        return got

    def mask_log_next(self, mask: int, w: int) -> np.ndarray:
        if self.depth == 0:
            scores = self._log_ind[:, w] - self.cost.costs
            return scores - logsumexp(scores)
        if not self.context_local:
            raise NotImplementedError("no mask-state form at this depth")
        if not mask_contains(mask, w):
            raise DomainError("context is false in this world")
        key = (mask, w)
        got = self._row_memo.get(key)
        if got is None:
            scores = np.full(len(self.lang), NEG_INF)
            for v in range(len(self.lang)):
                m2 = mask & int(self.lang.masks[v])
                if mask_contains(m2, w):
                    lp = self.listener.log_posterior_mask(m2)[w]
                    scores[v] = lp - self.cost.costs[v]
            got = scores - logsumexp(scores)
            self._row_memo[key] = got
        return got

    def params(self) -> dict:
        return {"depth": self.depth, "costs": self.cost.costs.tolist()}
