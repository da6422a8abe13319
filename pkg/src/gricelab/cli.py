"""Command-line experiment runner.

Subcommands map one-to-one onto the experiment kinds; a JSON config selects
language, speaker, and experiment parameters, with sensible defaults when
omitted.  Exit codes: 0 on success, 2 when an exhaustive check found
invariant violations, 3 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config, validate_config
from .errors import ConfigError, GricelabError, InvariantViolation
from .experiments import (
    base_meta,
    build_language,
    build_speaker,
    run_complexity_curve,
    run_corpus_stats,
    run_corpus_sweep,
    run_counterexample_sweep,
    run_exhaustive_test,
    write_csv,
    write_exhaustive_csv,
)

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_CONFIG = 3

KIND_BY_COMMAND = {
    "test": "exhaustive-test",
    "sweep": "corpus-sweep",
    "counterexample": "counterexample-sweep",
    "complexity": "complexity-curve",
    "stats": "corpus-stats",
    "sample": "sample",
}


def _resolve_config(args) -> ExperimentConfig:
    kind = KIND_BY_COMMAND[args.command]
    if args.config:
        config = load_config(args.config)
        if config.experiment["kind"] != kind:
            raise ConfigError(
                f"config is for experiment {config.experiment['kind']!r}, "
                f"but the {args.command!r} subcommand runs {kind!r}"
            )
    else:
        config = validate_config({"experiment": {"kind": kind}})
    if args.seed is not None:
        config.seeds = [args.seed]
    if args.tolerance is not None:
        config.tolerance = args.tolerance
    if args.out is not None:
        config.out = args.out
    if args.plot is not None:
        config.plot = args.plot
    if config.out is None:
        suffix = "txt" if args.command == "sample" else "csv"
        config.out = f"gricelab-{args.command}.{suffix}"
    return config


def _maybe_plot(config: ExperimentConfig, result, renderer) -> str | None:
    if not config.plot:
        return None
    png = str(Path(config.out).with_suffix(".png"))
    renderer(result, png)
    return png


def _cmd_test(args) -> int:
    config = _resolve_config(args)
    _, lang = build_language(config)
    report = run_exhaustive_test(config)
    write_exhaustive_csv(report, lang, config.out)
    for check in sorted(report.summary):
        cell = report.summary[check]
        print(f"{check}: {cell['pass']} pass, {cell['fail']} fail")
    print(f"wrote {config.out}")
    if report.violations:
        print(f"{report.violations} invariant violations", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _resolve_config(args)
    result = run_corpus_sweep(config, budget_seconds=args.budget_seconds)
    write_csv(config.out, result.meta, result.fieldnames, result.rows)
    png = _maybe_plot(config, result, _render_sweep)
    print(f"wrote {config.out}" + (f" and {png}" if png else ""))
    return EXIT_OK


def _cmd_counterexample(args) -> int:
    config = _resolve_config(args)
    result = run_counterexample_sweep(config)
    write_csv(config.out, result.meta, result.fieldnames, result.rows())
    png = _maybe_plot(config, result, _render_counterexample)
    print(f"sign changes before the contradiction endpoint: {result.sign_changes}")
    print(f"wrote {config.out}" + (f" and {png}" if png else ""))
    return EXIT_OK


def _cmd_complexity(args) -> int:
    config = _resolve_config(args)
    result = run_complexity_curve(config)
    write_csv(config.out, result.meta, result.fieldnames, result.rows)
    png = _maybe_plot(config, result, _render_complexity)
    print(f"wrote {config.out}" + (f" and {png}" if png else ""))
    return EXIT_OK


def _cmd_stats(args) -> int:
    config = _resolve_config(args)
    result = run_corpus_stats(config)
    write_csv(config.out, result.meta, result.fieldnames, result.rows)
    png = _maybe_plot(config, result, _render_stats)
    print(f"wrote {config.out}" + (f" and {png}" if png else ""))
    return EXIT_OK


def _cmd_sample(args) -> int:
    from .estimate import sample_corpus, write_corpus

    config = _resolve_config(args)
    ws, lang = build_language(config)
    speaker = build_speaker(config, lang, ws)
    exp = config.experiment
    corpus = sample_corpus(
        speaker, exp["corpus_size"], seed=config.seeds[0], max_len_guard=exp["max_len_guard"]
    )
    with open(config.out, "w", encoding="utf-8") as fh:
        write_corpus(corpus, lang, fh)
    meta = base_meta(config, truncated_texts=corpus.truncated)
    print(json.dumps(meta, sort_keys=True, default=str))
    print(f"wrote {config.out}")
    return EXIT_OK


def _render_sweep(result, path):
    from .plots import plot_sweep

    plot_sweep(result, path)


def _render_counterexample(result, path):
    from .plots import plot_counterexample

    plot_counterexample(result, path)


def _render_complexity(result, path):
    from .plots import plot_complexity

    plot_complexity(result, path)


def _render_stats(result, path):
    from .plots import plot_stats

    plot_stats(result, path)


COMMANDS = {
    "test": _cmd_test,
    "sweep": _cmd_sweep,
    "counterexample": _cmd_counterexample,
    "complexity": _cmd_complexity,
    "stats": _cmd_stats,
    "sample": _cmd_sample,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gricelab",
        description="Pragmatic-speaker simulation lab: exact entailment tests and corpus experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "test": "exhaustive entailment-test validation on exact tables",
        "sweep": "estimated g scores vs corpus size (frequency and trigram models)",
        "counterexample": "near-contradiction sweep of the g score",
        "complexity": "sample-complexity curve",
        "stats": "corpus statistics from a sampled corpus",
        "sample": "sample a corpus to a text file",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", type=str, default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=str, default=None, help="output path")
        p.add_argument("--tolerance", type=float, default=None, help="override the zero tolerance")
        p.add_argument("--plot", dest="plot", action="store_true", default=None,
                       help="render a PNG figure next to the CSV (default)")
        p.add_argument("--no-plot", dest="plot", action="store_false", help="skip figure rendering")
        if name == "sweep":
            p.add_argument("--budget-seconds", type=float, default=None,
                           help="trim remaining grid points past this wall-clock budget")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except GricelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
