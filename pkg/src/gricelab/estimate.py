"""Corpus sampling, empirical estimators, and finite-sample bounds.

Sampling is ancestral: draw a world from the prior, then utterances until
the eos tautology.  Speakers whose next-step distribution depends on the
context only through its denotation mask get a fully vectorized sampler
(precomputed per-(mask, world) rows); everything else falls back to a
per-text loop.  Identical (config, seed) reproduces corpora bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, ParameterError, StructuralError
from .semantics import Language, WorldSpace, full_mask, mask_contains, text_denotation
from .speakers import NEG_INF, CostFunction, Speaker

UNSEEN_FLOOR = 1e-20

TRUNCATION_WARN_RATE = 0.01


@dataclass
class Corpus:
    """Sampled complete texts in a padded token matrix (pad value -1;
    every row ends with eos at column lengths[i] - 1)."""

    tokens: np.ndarray
    lengths: np.ndarray
    vocab_size: int
    eos: int
    seed: object
    truncated: int
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.tokens.shape[0])

    def texts(self):
        for i in range(self.n):
            yield tuple(int(t) for t in self.tokens[i, : self.lengths[i]])

    def truncation_rate(self) -> float:
        return self.truncated / self.n if self.n else 0.0


def _inverse_cdf(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = (cum < u[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


class _MaskTables:
    """Per-(reachable mask, world) next-token rows for vectorized sampling."""

    def __init__(self, speaker: Speaker):
        lang, ws = speaker.lang, speaker.ws
        start = full_mask(lang.n_worlds)
        masks = [start]
        index = {start: 0}
        queue = [start]
        while queue:
            mask = queue.pop()
            for v in range(len(lang)):
                child = mask & int(lang.masks[v])
                if child and child not in index:
                    index[child] = len(masks)
                    masks.append(child)
                    queue.append(child)
        v_count = len(lang)
        probs = np.zeros((len(masks), ws.size, v_count))
        trans = np.zeros((len(masks), v_count), dtype=np.int32)
        for mi, mask in enumerate(masks):
            for v in range(v_count):
                child = mask & int(lang.masks[v])
                trans[mi, v] = index.get(child, 0)
            for w in range(ws.size):
                if mask_contains(mask, w):
                    probs[mi, w] = np.exp(speaker.mask_log_next(mask, w))
                else:
                    probs[mi, w, lang.eos] = 1.0  # unreachable cell
        self.index = index
        self.start = index[start]
        self.cums = np.cumsum(probs, axis=2)
        self.trans = trans


def sample_corpus(
    speaker: Speaker, n: int, seed, max_len_guard: int = 50
) -> Corpus:
    """Draw ``n`` complete texts.  Texts hitting the guard are completed with
    eos and counted as truncated; a rate above 1% sets a metadata warning."""
    if n < 1:
        raise ParameterError("corpus size must be >= 1")
    lang, ws = speaker.lang, speaker.ws
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    cum_prior = np.cumsum(ws.prior)
    worlds = np.minimum((cum_prior < rng.random(n)[:, None]).sum(axis=1), ws.size - 1)

    out = np.full((n, max_len_guard + 1), -1, dtype=np.int16)
    lengths = np.zeros(n, dtype=np.int64)

    if speaker.context_local:
        tables = _MaskTables(speaker)
        state = np.full(n, tables.start, dtype=np.int32)
        active = np.arange(n)
        for t in range(max_len_guard):
            if active.size == 0:
                break
            rows = tables.cums[state[active], worlds[active]]
            tok = _inverse_cdf(rows, rng.random(active.size))
            out[active, t] = tok
            lengths[active] = t + 1
            state[active] = tables.trans[state[active], tok]
            active = active[tok != lang.eos]
    else:
        active = np.arange(n)
        for i in range(n):
            w = int(worlds[i])
            context: tuple[int, ...] = ()
            for t in range(max_len_guard):
                row = np.exp(speaker.log_next(context, w))
                cum = np.cumsum(row)
                tok = int(min((cum < rng.random()).sum(), len(cum) - 1))
                out[i, t] = tok
                lengths[i] = t + 1
                if tok == lang.eos:
                    break
                context = context + (tok,)
        active = np.flatnonzero(out[np.arange(n), lengths - 1] != lang.eos)

    truncated = int(active.size)
    if truncated:
        out[active, lengths[active]] = lang.eos
        lengths[active] += 1

    width = int(lengths.max())
    corpus = Corpus(
        tokens=out[:, :width],
        lengths=lengths,
        vocab_size=len(lang),
        eos=lang.eos,
        seed=seed,
        truncated=truncated,
        meta={"speaker": speaker.describe(), "max_len_guard": max_len_guard},
    )
    if corpus.truncation_rate() > TRUNCATION_WARN_RATE:
        corpus.meta["truncation_warning"] = (
            f"truncation rate {corpus.truncation_rate():.3%} exceeds {TRUNCATION_WARN_RATE:.0%}"
        )
    return corpus


def write_corpus(corpus: Corpus, lang: Language, fileobj) -> None:
    """One text per line, space-separated utterance ids, eos included."""
    for text in corpus.texts():
        fileobj.write(" ".join(lang.ids(text)) + "\n")


def read_corpus(fileobj, lang: Language) -> Corpus:
    rows = []
    for line in fileobj:
        line = line.strip()
        if line:
            rows.append(tuple(lang.index(tok) for tok in line.split(" ")))
    if not rows:
        raise DegenerateInputError("empty corpus file")
    width = max(len(r) for r in rows)
    tokens = np.full((len(rows), width), -1, dtype=np.int16)
    lengths = np.zeros(len(rows), dtype=np.int64)
    for i, r in enumerate(rows):
        tokens[i, : len(r)] = r
        lengths[i] = len(r)
    return Corpus(
        tokens=tokens,
        lengths=lengths,
        vocab_size=len(lang),
        eos=lang.eos,
        seed=None,
        truncated=0,
        meta={"source": "file"},
    )


class FrequencyModel:
    """Prefix-frequency estimator: p_hat(z) = (#texts with prefix z) / n.

    Unseen queries score the configured floor probability when LM-style
    scoring is requested; raw frequencies are exact rationals count/n.
    """

    def __init__(self, corpus: Corpus, max_prefix_len: int = 8, epsilon_unknown: float = UNSEEN_FLOOR):
        self.n = corpus.n
        self.vocab_size = corpus.vocab_size
        self.max_prefix_len = max_prefix_len
        self.epsilon_unknown = epsilon_unknown
        self._counts: dict[int, dict[int, int]] = {}
        top = min(max_prefix_len, corpus.tokens.shape[1])
        tokens = corpus.tokens[:, :top].astype(np.int64)
        lengths = corpus.lengths
        base = self.vocab_size
        for ell in range(1, top + 1):
            rows = tokens[lengths >= ell, :ell]
            if rows.shape[0] == 0:
                self._counts[ell] = {}
                continue
            powers = base ** np.arange(ell, dtype=np.int64)
            keys = rows @ powers
            uniq, cnt = np.unique(keys, return_counts=True)
            self._counts[ell] = dict(zip(uniq.tolist(), cnt.tolist()))

    def _encode(self, tokens) -> tuple[int, int]:
        tokens = tuple(tokens)
        ell = len(tokens)
        if ell == 0 or ell > self.max_prefix_len:
            raise StructuralError(f"prefix length {ell} outside the counted range")
        key = 0
        for i, t in enumerate(tokens):
            key += int(t) * self.vocab_size**i
        return ell, key

    def prefix_count(self, tokens) -> int:
        if len(tuple(tokens)) == 0:
            return self.n
        ell, key = self._encode(tokens)
        return self._counts.get(ell, {}).get(key, 0)

    def prefix_frequency(self, tokens) -> float:
        return self.prefix_count(tokens) / self.n

    def log_score(self, tokens, floor: bool = True) -> float:
        count = self.prefix_count(tokens)
        if count == 0:
            return math.log(self.epsilon_unknown) if floor else NEG_INF
        return math.log(count / self.n)


class NgramModel:
    """Unsmoothed maximum-likelihood n-gram model with start padding and the
    eos token as the stop symbol.  Unseen n-grams score zero (``-inf``),
    flagged to the caller, consistent with unsmoothed training."""

    def __init__(self, corpus: Corpus, order: int = 3):
        if order < 1:
            raise ParameterError("order must be >= 1")
        if corpus.n < 1:
            raise DegenerateInputError("empty corpus")
        self.order = order
        self.vocab_size = corpus.vocab_size
        self.start_id = corpus.vocab_size
        base = self.vocab_size + 1
        self._base = base
        n, width = corpus.tokens.shape
        pad = np.full((n, order - 1), self.start_id, dtype=np.int64)
        padded = np.concatenate([pad, np.where(corpus.tokens < 0, 0, corpus.tokens).astype(np.int64)], axis=1)
        key_chunks = []
        for t in range(width):
            valid = corpus.lengths > t
            if not np.any(valid):
                break
            window = padded[valid, t : t + order]
            powers = base ** np.arange(order - 1, -1, -1, dtype=np.int64)
            key_chunks.append(window @ powers)
        keys = np.concatenate(key_chunks)
        uniq, cnt = np.unique(keys, return_counts=True)
        self._gram_counts = dict(zip(uniq.tolist(), cnt.tolist()))
        uniq_ctx, cnt_ctx = np.unique(keys // base, return_counts=True)
        self._ctx_counts = dict(zip(uniq_ctx.tolist(), cnt_ctx.tolist()))

    def log_prob(self, tokens) -> float:
        """Padded chain log-probability of the given token sequence (include
        the eos token to score a completed text)."""
        tokens = tuple(int(t) for t in tokens)
        history = (self.start_id,) * (self.order - 1)
        total = 0.0
        for t in tokens:
            key = 0
            for sym in history + (t,):
                key = key * self._base + sym
            c = self._gram_counts.get(key, 0)
            if c == 0:
                return NEG_INF
            total += math.log(c / self._ctx_counts[key // self._base])
            history = (history + (t,))[1:] if self.order > 1 else ()
        return total

    def prob(self, tokens) -> float:
        lp = self.log_prob(tokens)
        return 0.0 if lp == NEG_INF else math.exp(lp)


def ngram_fit(corpus: Corpus, order: int = 3) -> NgramModel:
    return NgramModel(corpus, order)


def ngram_prob(model: NgramModel, tokens) -> float:
    return model.prob(tokens)


def prefix_frequency(model: FrequencyModel, tokens) -> float:
    return model.prefix_frequency(tokens)


# ---------------------------------------------------------------------------
# Finite-sample bounds


@dataclass(frozen=True)
class ChebyshevBound:
    bound: float
    failure_prob: float


def chebyshev_log_bound(complexity: float, delta: float, n: int) -> ChebyshevBound:
    """Deviation bound sqrt(K / (delta n)) for |log p - log p_hat|, failing
    with probability at most delta + (1 - 1/K)^n."""
    if complexity <= 0:
        raise ParameterError("complexity must be positive")
    if not 0 < delta < 1:
        raise ParameterError("delta must be in (0, 1)")
    if n < 1:
        raise ParameterError("n must be >= 1")
    bound = math.sqrt(complexity / (delta * n))
    failure = delta + (1.0 - 1.0 / complexity) ** n
    return ChebyshevBound(bound=bound, failure_prob=failure)


def hoeffding_bound(delta: float, n: int) -> float:
    """Two-sided deviation bound sqrt(log(2/delta) / (2n)) for |p - p_hat|."""
    if not 0 < delta < 1:
        raise ParameterError("delta must be in (0, 1)")
    if n < 1:
        raise ParameterError("n must be >= 1")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def complexity_uniform(lang: Language, tokens, ws: WorldSpace) -> float:
    """Upper bound |X|^len / P(denotation) on the inverse text probability
    under a uniformly truthful speaker (the exponent accounts for each
    sampling step; a single sentence gives the plain |X| / P form)."""
    from .semantics import truth_probability

    tokens = tuple(tokens)
    mask = text_denotation(tokens, lang)
    if mask == 0:
        raise DegenerateInputError("text is unsatisfiable")
    steps = max(len(tokens), 1)
    return len(lang) ** steps / truth_probability(mask, ws)


def complexity_gricean(cost: CostFunction, tokens, lang: Language, ws: WorldSpace) -> float:
    """Upper bound exp(cost(z)) / P(denotation) on the inverse text
    probability under a self-normalized Gricean speaker."""
    from .semantics import truth_probability

    tokens = tuple(tokens)
    mask = text_denotation(tokens, lang)
    if mask == 0:
        raise DegenerateInputError("text is unsatisfiable")
    return math.exp(cost.of_text(tokens)) / truth_probability(mask, ws)


@dataclass(frozen=True)
class GBound:
    g_bound: float
    g_guarantee: float
    s_bound: float
    s_guarantee: float


def g_bound(dist, x, y, cost: CostFunction, lang: Language, ws: WorldSpace, delta: float, n: int) -> GBound:
    """Finite-sample deviation bound for the g score (and the cost-aware s
    variant), with the probability the bound is guaranteed to hold."""
    from .enttest import as_tokens
    from .semantics import truth_probability

    if not 0 < delta < 1:
        raise ParameterError("delta must be in (0, 1)")
    x, y = as_tokens(x), as_tokens(y)
    mask_xy = text_denotation(x + y, lang)
    if mask_xy == 0:
        raise DegenerateInputError("x followed by y is unsatisfiable")
    p_den_xy = truth_probability(mask_xy, ws)
    c_xy = cost.of_text(x + y)
    c_yy = cost.of_text(y + y)
    gb = 8.0 * math.sqrt(math.exp(max(c_xy, c_yy)) / p_den_xy / (delta * n))
    sb = 2.0 * math.sqrt(math.exp(c_xy) / p_den_xy * 2.0 / (delta * n))
    p_xy = math.exp(dist.prefix(x + y)) if dist.prefix(x + y) != NEG_INF else 0.0
    p_yy = math.exp(dist.prefix(y + y)) if dist.prefix(y + y) != NEG_INF else 0.0
    q = 1.0 - min(p_xy, p_yy)
    return GBound(
        g_bound=gb,
        g_guarantee=1.0 - delta - 4.0 * q**n,
        s_bound=sb,
        s_guarantee=1.0 - delta - 2.0 * (1.0 - p_xy) ** n,
    )


def sample_complexity_curve(length: int, delta: float, eps: float, perplexity: float = 20.0) -> float:
    """Training sentences needed to approximate the g score for sentences of
    the given word length: 128 * (S+1)^(length+1) / (delta * eps^2)."""
    if length < 0:
        raise ParameterError("length must be >= 0")
    if delta <= 0 or eps <= 0:
        raise ParameterError("delta and eps must be positive")
    return 128.0 * (perplexity + 1.0) ** (length + 1) / (delta * eps**2)


@dataclass
class CorpusStats:
    n: int
    utterance_counts: np.ndarray
    length_counts: dict
    redundancy_rate: float
    truncated: int


def corpus_stats(corpus: Corpus, lang: Language) -> CorpusStats:
    """Utterance and text-length histograms plus the rate of adjacent
    denotation-equal utterance repeats."""
    if corpus.n < 1:
        raise DegenerateInputError("empty corpus")
    counts = np.zeros(len(lang), dtype=np.int64)
    valid = corpus.tokens >= 0
    flat = corpus.tokens[valid]
    binned = np.bincount(flat, minlength=len(lang))
    counts[: binned.size] = binned[: len(lang)]
    lengths, length_cnt = np.unique(corpus.lengths, return_counts=True)
    adjacent = 0
    redundant = 0
    masks = lang.masks
    left = corpus.tokens[:, :-1]
    right = corpus.tokens[:, 1:]
    pair_valid = (left >= 0) & (right >= 0)
    adjacent = int(pair_valid.sum())
    if adjacent:
        lm = masks[np.where(pair_valid, left, 0)]
        rm = masks[np.where(pair_valid, right, 0)]
        redundant = int(((lm == rm) & pair_valid).sum())
    return CorpusStats(
        n=corpus.n,
        utterance_counts=counts,
        length_counts=dict(zip(lengths.tolist(), length_cnt.tolist())),
        redundancy_rate=redundant / adjacent if adjacent else 0.0,
        truncated=corpus.truncated,
    )
