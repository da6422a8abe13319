"""Experiment configuration: validation, defaults, and model builders.

Config documents are JSON mappings with ``language``, ``speaker``, and
``experiment`` sections.  Validation fills defaults and rejects unknown
fields; the resolved document (defaults included) is what gets hashed and
embedded in output metadata, so outputs are self-describing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .semantics import Language, WorldSpace, language_from_config, make_synthetic_language
from .speakers import (
    CostFunction,
    DynamicGriceanSpeaker,
    DynamicRsaListener,
    DynamicRsaSpeaker,
    FactorizedTruthfulSpeaker,
    NonredundantSpeaker,
    Speaker,
    StaticRsaSpeaker,
    UniformTruthfulSpeaker,
)

SPEAKER_KINDS = (
    "uniform",
    "factorized",
    "static_rsa",
    "dynamic_gricean",
    "nonredundant",
    "dynamic_rsa",
)

EXPERIMENT_KINDS = (
    "exhaustive-test",
    "corpus-sweep",
    "counterexample-sweep",
    "complexity-curve",
    "corpus-stats",
    "sample",
)

DEFAULT_SWEEP_SIZES = [2**k for k in range(1, 20)] + [1_000_000]


@dataclass
class ExperimentConfig:
    """Fully resolved configuration; ``document()`` round-trips to JSON."""

    language: dict
    speaker: dict
    experiment: dict
    seeds: list[int]
    max_len: int
    tolerance: float
    out: str | None = None
    plot: bool = True

    def document(self) -> dict:
        return {
            "language": self.language,
            "speaker": self.speaker,
            "experiment": self.experiment,
            "seeds": self.seeds,
            "max_len": self.max_len,
            "tolerance": self.tolerance,
            "out": self.out,
            "plot": self.plot,
        }

    def config_hash(self) -> str:
        return config_hash(self.document())


def config_hash(document: dict) -> str:
    canon = json.dumps(document, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _require(cond: bool, message: str):
    if not cond:
        raise ConfigError(message)


def _check_fields(section: dict, allowed: set, where: str):
    unknown = set(section) - allowed
    _require(not unknown, f"unknown fields in {where}: {sorted(unknown)}")


def _validate_language(section: dict) -> dict:
    kind = section.get("kind", "synthetic")
    if kind == "synthetic":
        _check_fields(section, {"kind", "worlds"}, "language")
        worlds = section.get("worlds", 3)
        _require(isinstance(worlds, int) and worlds >= 1, "language.worlds must be a positive integer")
        return {"kind": "synthetic", "worlds": worlds}
    if kind == "explicit":
        _check_fields(section, {"kind", "worlds", "prior", "utterances", "omega"}, "language")
        resolved = dict(section)
        resolved["kind"] = "explicit"
        # Delegate structural checks to the language builder.
        language_from_config({k: v for k, v in resolved.items() if k != "kind"})
        return resolved
    raise ConfigError(f"unknown language kind {kind!r}")


def _validate_speaker(section: dict) -> dict:
    kind = section.get("kind", "dynamic_gricean")
    _require(kind in SPEAKER_KINDS, f"unknown speaker kind {kind!r}")
    allowed = {"kind", "cost_coefficient", "listener_prior"}
    resolved: dict = {"kind": kind, "cost_coefficient": section.get("cost_coefficient", 0.1)}
    _require(resolved["cost_coefficient"] >= 0, "speaker.cost_coefficient must be nonnegative")
    if kind == "dynamic_gricean":
        allowed |= {"alpha", "listener_depth"}
        alpha = section.get("alpha", 5.0)
        _require(
            isinstance(alpha, (int, float)) and alpha > 0,
            "speaker.alpha must be > 0 (an informative speaker needs a positive rationality weight)",
        )
        depth = section.get("listener_depth", 0)
        _require(isinstance(depth, int) and depth >= -1, "speaker.listener_depth must be an integer >= -1")
        resolved.update(alpha=float(alpha), listener_depth=depth)
    elif kind in ("static_rsa", "dynamic_rsa"):
        allowed |= {"depth"}
        depth = section.get("depth", 1)
        floor = -1 if kind == "static_rsa" else 0
        _require(isinstance(depth, int) and depth >= floor, f"speaker.depth must be an integer >= {floor}")
        resolved.update(depth=depth)
    elif kind == "factorized":
        allowed |= {"f"}
        f = section.get("f")
        _require(f is not None, "factorized speaker needs per-utterance weights 'f'")
        _require(all(isinstance(v, (int, float)) and v > 0 for v in f), "speaker.f must be strictly positive")
        resolved.update(f=list(f))
    if "listener_prior" in section:
        resolved["listener_prior"] = list(section["listener_prior"])
    _check_fields(section, allowed, "speaker")
    return resolved


def _validate_experiment(section: dict) -> dict:
    kind = section.get("kind", "exhaustive-test")
    _require(kind in EXPERIMENT_KINDS, f"unknown experiment kind {kind!r}")
    resolved: dict = {"kind": kind}
    if kind == "exhaustive-test":
        _check_fields(section, {"kind", "table_len"}, "experiment")
        resolved["table_len"] = section.get("table_len", 2)
        _require(resolved["table_len"] >= 2, "experiment.table_len must be >= 2")
    elif kind == "corpus-sweep":
        _check_fields(
            section,
            {
                "kind",
                "corpus_sizes",
                "estimators",
                "pair_max_len",
                "exclude_redundant_pairs",
                "ngram_order",
                "max_len_guard",
            },
            "experiment",
        )
        sizes = section.get("corpus_sizes", DEFAULT_SWEEP_SIZES)
        _require(
            all(isinstance(s, int) and s >= 1 for s in sizes),
            "experiment.corpus_sizes must be positive integers",
        )
        estimators = section.get("estimators", ["frequency", "trigram"])
        _require(
            all(e in ("frequency", "trigram") for e in estimators),
            "experiment.estimators must be drawn from {'frequency', 'trigram'}",
        )
        resolved.update(
            corpus_sizes=list(sizes),
            estimators=list(estimators),
            pair_max_len=section.get("pair_max_len", 4),
            exclude_redundant_pairs=section.get("exclude_redundant_pairs", True),
            ngram_order=section.get("ngram_order", 3),
            max_len_guard=section.get("max_len_guard", 50),
        )
        _require(resolved["pair_max_len"] >= 1, "experiment.pair_max_len must be >= 1")
        _require(resolved["ngram_order"] >= 1, "experiment.ngram_order must be >= 1")
    elif kind == "counterexample-sweep":
        _check_fields(
            section,
            {
                "kind",
                "worlds",
                "plain_worlds",
                "rare_worlds",
                "plain_weight",
                "rare_weight",
                "outside_weight",
                "alpha",
                "cost_coefficient",
            },
            "experiment",
        )
        resolved.update(
            worlds=section.get("worlds", 12),
            plain_worlds=section.get("plain_worlds", 8),
            rare_worlds=section.get("rare_worlds", 2),
            plain_weight=section.get("plain_weight", 1.0),
            rare_weight=section.get("rare_weight", 0.002),
            outside_weight=section.get("outside_weight", 0.05),
            alpha=section.get("alpha", 5.0),
            cost_coefficient=section.get("cost_coefficient", 0.1),
        )
        _require(resolved["alpha"] > 0, "experiment.alpha must be > 0")
        n_inside = resolved["plain_worlds"] + resolved["rare_worlds"]
        _require(
            resolved["worlds"] > n_inside,
            "need at least one world outside the swept utterance's denotation",
        )
        _require(
            min(resolved["plain_weight"], resolved["rare_weight"], resolved["outside_weight"]) > 0,
            "prior weights must be positive",
        )
    elif kind == "complexity-curve":
        _check_fields(section, {"kind", "lengths", "delta", "eps", "perplexity"}, "experiment")
        resolved.update(
            lengths=section.get("lengths", list(range(0, 13))),
            delta=section.get("delta", 0.1),
            eps=section.get("eps", 1.0),
            perplexity=section.get("perplexity", 20.0),
        )
        _require(resolved["delta"] > 0 and resolved["eps"] > 0, "delta and eps must be positive")
    elif kind in ("corpus-stats", "sample"):
        _check_fields(section, {"kind", "corpus_size", "max_len_guard"}, "experiment")
        size = section.get("corpus_size", 100_000 if kind == "corpus-stats" else 1000)
        _require(isinstance(size, int) and size >= 1, "experiment.corpus_size must be >= 1")
        resolved.update(corpus_size=size, max_len_guard=section.get("max_len_guard", 50))
    return resolved


def validate_config(document: dict) -> ExperimentConfig:
    """Validate a raw config mapping; returns the resolved config or raises
    ConfigError describing the first problem found."""
    if not isinstance(document, dict):
        raise ConfigError("config document must be a mapping")
    _check_fields(
        document,
        {"language", "speaker", "experiment", "seed", "seeds", "max_len", "tolerance", "out", "plot"},
        "config",
    )
    language = _validate_language(document.get("language", {}))
    speaker = _validate_speaker(document.get("speaker", {}))
    experiment = _validate_experiment(document.get("experiment", {}))
    if "seeds" in document:
        seeds = document["seeds"]
        _require(
            isinstance(seeds, list) and all(isinstance(s, int) and s >= 0 for s in seeds) and seeds,
            "seeds must be a nonempty list of nonnegative integers",
        )
        _require("seed" not in document, "give either 'seed' or 'seeds', not both")
        seeds = list(seeds)
    else:
        seed = document.get("seed", 0)
        _require(isinstance(seed, int) and seed >= 0, "seed must be a nonnegative integer")
        seeds = [seed]
    max_len = document.get("max_len", 6)
    _require(isinstance(max_len, int) and max_len >= 0, "max_len must be a nonnegative integer")
    tolerance = document.get("tolerance", 1e-9)
    _require(
        isinstance(tolerance, (int, float)) and tolerance > 0, "tolerance must be a positive number"
    )
    out = document.get("out")
    _require(out is None or isinstance(out, str), "out must be a path string")
    plot = document.get("plot", True)
    _require(isinstance(plot, bool), "plot must be a boolean")
    return ExperimentConfig(
        language=language,
        speaker=speaker,
        experiment=experiment,
        seeds=seeds,
        max_len=max_len,
        tolerance=float(tolerance),
        out=out,
        plot=plot,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            document = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    return validate_config(document)


def build_language(config: ExperimentConfig) -> tuple[WorldSpace, Language]:
    section = config.language
    if section["kind"] == "synthetic":
        return make_synthetic_language(section["worlds"])
    return language_from_config({k: v for k, v in section.items() if k != "kind"})


def build_speaker(config: ExperimentConfig, lang: Language, ws: WorldSpace) -> Speaker:
    section = config.speaker
    kind = section["kind"]
    cost = CostFunction.length_cost(lang, section["cost_coefficient"])
    prior = section.get("listener_prior")
    prior = np.asarray(prior, dtype=float) if prior is not None else None
    if kind == "uniform":
        return UniformTruthfulSpeaker(lang, ws)
    if kind == "factorized":
        return FactorizedTruthfulSpeaker(lang, ws, np.asarray(section["f"], dtype=float))
    if kind == "static_rsa":
        return StaticRsaSpeaker(lang, ws, section["depth"], cost, prior)
    if kind == "dynamic_rsa":
        return DynamicRsaSpeaker(lang, ws, section["depth"], cost, prior)
    if kind == "nonredundant":
        return NonredundantSpeaker(lang, ws)
    listener = DynamicRsaListener(lang, ws, section["listener_depth"], cost, prior)
    return DynamicGriceanSpeaker(lang, ws, section["alpha"], cost, listener)
