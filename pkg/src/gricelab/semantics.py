"""Finite world spaces, utterance denotations, and text semantics.

A denotation is a subset of worlds encoded as a bitmask (bit ``w`` set iff
the utterance is true in world ``w``).  World spaces are capped at 64 worlds
so denotations fit in a single machine word.  All objects here are immutable
after construction and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .errors import StructuralError

MAX_WORLDS = 64

PRIOR_TOL = 1e-12


def full_mask(n_worlds: int) -> int:
    return (1 << n_worlds) - 1


def mask_from_bits(bits: str) -> int:
    """Parse a denotation bitstring; leftmost character is world 0."""
    mask = 0
    for w, ch in enumerate(bits):
        if ch == "1":
            mask |= 1 << w
        elif ch != "0":
            raise StructuralError(f"invalid denotation bitstring {bits!r}")
    return mask


def bits_from_mask(mask: int, n_worlds: int) -> str:
    return "".join("1" if mask_contains(mask, w) else "0" for w in range(n_worlds))


def mask_contains(mask: int, world: int) -> bool:
    return bool((mask >> world) & 1)


def mask_worlds(mask: int) -> Iterator[int]:
    """Iterate the worlds in a mask in increasing order."""
    w = 0
    while mask:
        if mask & 1:
            yield w
        mask >>= 1
        w += 1


class WorldSpace:
    """A finite set of worlds with a strictly positive prior."""

    def __init__(self, prior):
        prior = np.asarray(prior, dtype=float)
        if prior.ndim != 1 or prior.size < 1:
            raise StructuralError("prior must be a nonempty vector")
        if prior.size > MAX_WORLDS:
            raise StructuralError(f"at most {MAX_WORLDS} worlds supported")
        if not np.all(prior > 0):
            raise StructuralError("world prior must be strictly positive")
        if abs(prior.sum() - 1.0) > PRIOR_TOL:
            raise StructuralError("world prior must sum to 1")
        prior = prior.copy()
        prior.setflags(write=False)
        self.prior = prior
        self.size = int(prior.size)
        self.log_prior = np.log(prior)
        self.log_prior.setflags(write=False)

    @classmethod
    def uniform(cls, n_worlds: int) -> "WorldSpace":
        if n_worlds < 1:
            raise StructuralError("need at least one world")
        return cls(np.full(n_worlds, 1.0 / n_worlds))

    def __repr__(self) -> str:
        return f"WorldSpace(size={self.size})"


@dataclass(frozen=True)
class Utterance:
    """A sentence symbol together with its denotation mask."""

    uid: str
    mask: int
    display: str = ""

    def __post_init__(self):
        if self.mask == 0:
            raise StructuralError(f"utterance {self.uid!r} has empty denotation")
        if not self.display:
            object.__setattr__(self, "display", self.uid)


@dataclass(frozen=True)
class Language:
    """An ordered utterance inventory with a designated end-of-sequence
    tautology (index ``eos``) whose denotation is the full world set."""

    utterances: tuple[Utterance, ...]
    eos: int
    n_worlds: int
    masks: np.ndarray = field(init=False, repr=False)
    index_of: dict = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.utterances) < 1:
            raise StructuralError("language needs at least one utterance")
        if not 0 <= self.eos < len(self.utterances):
            raise StructuralError("eos index out of range")
        ids = [u.uid for u in self.utterances]
        if len(set(ids)) != len(ids):
            raise StructuralError("utterance ids must be unique")
        fm = full_mask(self.n_worlds)
        for u in self.utterances:
            if u.mask & ~fm:
                raise StructuralError(f"utterance {u.uid!r} has bits beyond the world space")
        if self.utterances[self.eos].mask != fm:
            raise StructuralError("eos utterance must denote the full world set")
        masks = np.array([u.mask for u in self.utterances], dtype=np.int64)
        masks.setflags(write=False)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "index_of", {u.uid: i for i, u in enumerate(self.utterances)})

    def __len__(self) -> int:
        return len(self.utterances)

    def index(self, uid: str) -> int:
        try:
            return self.index_of[uid]
        except KeyError:
            raise StructuralError(f"unknown utterance id {uid!r}") from None

    def ids(self, tokens) -> tuple[str, ...]:
        return tuple(self.utterances[t].uid for t in tokens)

    def truth_table(self, ws: WorldSpace) -> np.ndarray:
        """Indicator matrix of shape (V, n_worlds)."""
        table = np.zeros((len(self.utterances), ws.size))
        for v, u in enumerate(self.utterances):
            for w in mask_worlds(u.mask):
                table[v, w] = 1.0
        table.setflags(write=False)
        return table


class Text(NamedTuple):
    """A token sequence; ``complete`` iff it ends with the single eos token."""

    tokens: tuple[int, ...]
    complete: bool


def validate_text(text: Text, lang: Language) -> None:
    for t in text.tokens:
        if not 0 <= t < len(lang):
            raise StructuralError(f"token index {t} out of range")
    eos_positions = [i for i, t in enumerate(text.tokens) if t == lang.eos]
    if text.complete:
        if eos_positions != [len(text.tokens) - 1]:
            raise StructuralError("complete text must end with its only eos token")
    elif eos_positions:
        raise StructuralError("incomplete text must not contain eos")


def text_denotation(tokens, lang: Language) -> int:
    """Intersection of token denotations; the empty text denotes all worlds."""
    mask = full_mask(lang.n_worlds)
    for t in tokens:
        if not 0 <= t < len(lang):
            raise StructuralError(f"token index {t} out of range")
        mask &= lang.utterances[t].mask
    return mask


def entails(x: Utterance, y: Utterance) -> bool:
    return mask_entails(x.mask, y.mask)


def strictly_entails(x: Utterance, y: Utterance) -> bool:
    return mask_entails(x.mask, y.mask) and x.mask != y.mask


def mask_entails(mx: int, my: int) -> bool:
    return mx & ~my == 0


def truth_probability(mask: int, ws: WorldSpace) -> float:
    """Prior mass of the worlds in ``mask``."""
    return float(sum(ws.prior[w] for w in mask_worlds(mask)))


def log_truth_probability(mask: int, ws: WorldSpace) -> float:
    p = truth_probability(mask, ws)
    return float(np.log(p)) if p > 0 else float("-inf")


def make_synthetic_language(n_worlds: int) -> tuple[WorldSpace, Language]:
    """Language with one utterance per nonempty world subset, labeled by its
    bitstring, the all-ones utterance doubling as eos; uniform prior."""
    if n_worlds < 1:
        raise StructuralError("need at least one world")
    if n_worlds > MAX_WORLDS:
        raise StructuralError(f"at most {MAX_WORLDS} worlds supported")
    ws = WorldSpace.uniform(n_worlds)
    utterances = []
    for mask in range(1, full_mask(n_worlds) + 1):
        utterances.append(Utterance(uid=bits_from_mask(mask, n_worlds), mask=mask))
    eos = len(utterances) - 1  # the all-ones mask
    return ws, Language(utterances=tuple(utterances), eos=eos, n_worlds=n_worlds)


def validate_language(ws: WorldSpace, lang: Language) -> None:
    """Cross-checks between a world space and a language."""
    if lang.n_worlds != ws.size:
        raise StructuralError("language and world space disagree on world count")
    for u in lang.utterances:
        if truth_probability(u.mask, ws) <= 0:
            raise StructuralError(f"utterance {u.uid!r} is true in no world")


def language_from_config(doc: dict) -> tuple[WorldSpace, Language]:
    """Build (WorldSpace, Language) from a parsed config mapping.

    Expected keys: ``worlds`` (count), ``prior`` (vector, optional; uniform
    if omitted), ``utterances`` (list of {id, denotation}), ``omega`` (id of
    the eos utterance).
    """
    from .errors import ConfigError

    known = {"worlds", "prior", "utterances", "omega"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown language fields: {sorted(unknown)}")
    try:
        n_worlds = int(doc["worlds"])
        raw_utts = doc["utterances"]
        omega_id = doc["omega"]
    except KeyError as exc:
        raise ConfigError(f"language config missing field {exc}") from None
    prior = doc.get("prior")
    ws = WorldSpace(prior) if prior is not None else WorldSpace.uniform(n_worlds)
    if ws.size != n_worlds:
        raise ConfigError("prior length does not match world count")
    utterances = []
    for item in raw_utts:
        extra = set(item) - {"id", "denotation", "display"}
        if extra:
            raise ConfigError(f"unknown utterance fields: {sorted(extra)}")
        bits = item["denotation"]
        if len(bits) != n_worlds:
            raise ConfigError(f"denotation {bits!r} has wrong width")
        utterances.append(
            Utterance(uid=item["id"], mask=mask_from_bits(bits), display=item.get("display", ""))
        )
    ids = [u.uid for u in utterances]
    if omega_id not in ids:
        raise ConfigError(f"omega id {omega_id!r} not among utterances")
    lang = Language(utterances=tuple(utterances), eos=ids.index(omega_id), n_worlds=n_worlds)
    validate_language(ws, lang)
    return ws, lang
