"""Command-line entry point: score, train, extract, sweep, synth."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
import time
from pathlib import Path

from .core import (Corpus, TemplexError, _read_json, default_ontology_path, load_corpus,
                   load_predictions, parse_corpus, save_corpus, save_predictions)
from .learn import (BETA_SETTINGS, TrainConfig, load_checkpoint, loss_trace_csv, parse_beta,
                    predict_corpus, save_checkpoint, train)
from .metrics import score_corpus
from .model import HEADS
from .synth import SynthConfig, generate

log = logging.getLogger("templex")

VARIANT_CHOICES = ("rme", "rme-relaxed", "ree-def", "ree-impl", "granular")
PHI_CHOICES = ("phi3", "phi4", "phi-subset")
SWEEP_COLUMNS = ("setting", "p", "r", "f1", "seed", "runtime_s")


class InputError(Exception):
    pass


# ------------------------------------------------------------ arg types

def unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1]")
    return v


def discount(text: str) -> float:
    v = float(text)
    if not 0.0 < v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside (0, 1]")
    return v


def positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return v


def positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"{text} is not a positive integer")
    return v


def non_negative_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"{text} is negative")
    return v


def beta_type(text: str):
    try:
        return parse_beta(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(
            f"{e}; use a positive temperature or one of {', '.join(BETA_SETTINGS)}") from None


def distractor_rate(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is outside [0, 1)")
    return v


def _variant(name: str) -> str:
    return {"rme": "rme_relaxed", "rme-relaxed": "rme_relaxed", "ree-def": "ree_def",
            "ree-impl": "ree_impl", "granular": "granular"}[name]


def _phi(name: str) -> str:
    return name.replace("-", "_")


# ------------------------------------------------------------ helpers

def _ontology_path(args) -> str:
    path = args.ontology or default_ontology_path()
    if not path:
        raise InputError("no ontology given: pass --ontology or set TEMPLEX_ONTOLOGY")
    return path


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _train_config(args, **override) -> TrainConfig:
    fields = dict(alpha=args.alpha, beta=args.beta, gamma=args.gamma,
                  learning_rate=args.learning_rate, epochs=args.epochs, seed=args.seed,
                  head=args.head, max_iter=args.max_iter, d=args.d, layers=args.layers,
                  heads=args.heads)
    fields.update(override)
    return TrainConfig(**fields)


def format_report(report, fmt: str) -> str:
    data = report.to_json()
    if fmt == "json":
        return json.dumps(data, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    if data["variant"] == "granular":
        rows = [("type_f1", data["type_f1"]), ("slot_f1", data["slot_f1"]),
                ("combined_score", data["combined_score"])]
        if fmt == "csv":
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["metric", "value"])
            w.writerows((k, repr(v)) for k, v in rows)
        else:
            for k, v in rows:
                buf.write(f"{k:<16}{v:.4f}\n")
        return buf.getvalue()
    table = [(r["slot"], r["p"], r["r"], r["f1"], r["n_ref"], r["n_pred"]) for r in data["slots"]]
    table.append(("micro", data["micro"]["p"], data["micro"]["r"], data["micro"]["f1"], "", ""))
    table.append(("macro", data["macro"]["p"], data["macro"]["r"], data["macro"]["f1"], "", ""))
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slot", "p", "r", "f1", "n_ref", "n_pred"])
        for name, p, r, f, nr, npred in table:
            w.writerow([name, repr(p), repr(r), repr(f), nr, npred])
        return buf.getvalue()
    width = max(len(t[0]) for t in table) + 2
    buf.write(f"{data['variant']} / {data['phi']}\n")
    buf.write(f"{'slot':<{width}}{'p':>8}{'r':>8}{'f1':>8}{'n_ref':>7}{'n_pred':>7}\n")
    for name, p, r, f, nr, npred in table:
        buf.write(f"{name:<{width}}{p:8.4f}{r:8.4f}{f:8.4f}{nr!s:>7}{npred!s:>7}\n")
    return buf.getvalue()


# ------------------------------------------------------------ subcommands

def cmd_score(args) -> int:
    corpus = load_corpus(args.gold, _ontology_path(args))
    preds = load_predictions(args.pred, corpus)
    report = score_corpus(corpus, preds, _variant(args.variant), _phi(args.phi))
    _write(format_report(report, args.format), args.out)
    return 0


def cmd_train(args) -> int:
    cfg = _train_config(args)
    corpus = load_corpus(args.corpus, _ontology_path(args))
    model, trace = train(corpus, cfg)
    save_checkpoint(model, args.out, cfg)
    trace_path = args.loss_trace or str(Path(args.out).with_suffix(".loss.csv"))
    Path(trace_path).write_text(loss_trace_csv(trace), encoding="utf-8")
    log.info("wrote %s and %s", args.out, trace_path)
    return 0


def cmd_extract(args) -> int:
    ontology_path = args.ontology or default_ontology_path()
    if ontology_path:
        corpus = load_corpus(args.corpus, ontology_path)
        model, _ = load_checkpoint(args.checkpoint, corpus.ontology)
    else:
        model, _ = load_checkpoint(args.checkpoint)
        corpus = parse_corpus(_read_json(args.corpus), model.ontology)
    preds = predict_corpus(model, corpus, args.max_iter)
    save_predictions(preds, args.out, corpus)
    return 0


def _holdout(corpus: Corpus, fraction: float = 0.2) -> tuple[Corpus, Corpus]:
    n_test = max(1, int(round(len(corpus.documents) * fraction)))
    ids = [d.id for d in corpus.documents]
    return corpus.subset(ids[:-n_test]), corpus.subset(ids[-n_test:])


def sweep_grid(alphas, betas, base: TrainConfig) -> list[tuple[str, TrainConfig]]:
    """Grid points as (label, config); the cross product when both lists are given."""
    alphas = list(alphas or [])
    betas = list(betas or [])
    if not alphas and not betas:
        raise InputError("empty sweep grid: give --alpha and/or --beta values")
    points = []
    for a in alphas or [None]:
        for b in betas or [None]:
            parts, over = [], {}
            if a is not None:
                parts.append(f"alpha={a:g}")
                over["alpha"] = a
            if b is not None:
                parts.append(f"beta={b:g}" if isinstance(b, float) else f"beta={b}")
                over["beta"] = b
            points.append((";".join(parts), dataclasses.replace(base, **over)))
    return points


def cmd_sweep(args) -> int:
    ontology_path = _ontology_path(args)
    corpus = load_corpus(args.corpus, ontology_path)
    if args.test:
        train_corpus, test_corpus = corpus, load_corpus(args.test, ontology_path)
    else:
        train_corpus, test_corpus = _holdout(corpus)
    grid = sweep_grid(args.alpha, args.beta, _train_config(args, alpha=0.5, beta="xent"))
    variant, phi = _variant(args.variant), _phi(args.phi)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for label, cfg in grid:
        for seed in args.seeds:
            run_cfg = dataclasses.replace(cfg, seed=seed)
            t0 = time.perf_counter()
            model, _ = train(train_corpus, run_cfg)
            report = score_corpus(test_corpus, predict_corpus(model, test_corpus, cfg.max_iter),
                                  variant, phi)
            elapsed = time.perf_counter() - t0
            if variant == "granular":
                p, r, f = (float(report.slot_precision), float(report.slot_recall),
                           float(report.combined_score))
            else:
                p, r, f = report.micro
            runtime = f"{elapsed:.3f}" if args.runtime == "wall" else ""
            w.writerow([label, repr(p), repr(r), repr(f), seed, runtime])
            log.info("%s seed=%d f1=%.4f (%.1fs)", label, seed, f, elapsed)
    _write(buf.getvalue(), args.out)
    return 0


def cmd_synth(args) -> int:
    cfg = SynthConfig(seed=args.seed, n_docs=args.n_docs,
                      templates_per_doc_range=(args.min_templates, args.max_templates),
                      n_template_types=args.types, slots_per_type=args.slots,
                      filler_vocab=args.filler_vocab, noise_vocab=args.noise_vocab,
                      distractor_rate=args.distractor_rate)
    corpus = generate(cfg)
    save_corpus(corpus, args.out, args.ontology_out)
    return 0


# ------------------------------------------------------------ parser

def _add_train_options(p: argparse.ArgumentParser, sweep: bool = False) -> None:
    g = p.add_argument_group("training")
    if not sweep:
        g.add_argument("--alpha", type=unit_interval, default=0.5,
                       help="agent roll-out rate in [0, 1] (default 0.5)")
        g.add_argument("--beta", type=beta_type, default="xent",
                       help="oracle temperature: fixed, argmax, xent, uniform or a positive number")
    g.add_argument("--gamma", type=discount, default=1.0, help="per-step discount in (0, 1]")
    g.add_argument("--learning-rate", "--lr", dest="learning_rate", type=positive_float,
                   default=0.05, help="gradient-descent step size")
    g.add_argument("--epochs", type=non_negative_int, default=30)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--head", choices=HEADS, default="joint", help="policy head")
    g.add_argument("--max-iter", dest="max_iter", type=positive_int, default=10,
                   help="maximum templates per type per document")
    g.add_argument("--d", type=positive_int, default=32, help="hidden width (even)")
    g.add_argument("--layers", type=positive_int, default=2, help="joint-head transformer layers")
    g.add_argument("--heads", type=positive_int, default=4, help="attention heads")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="templex",
        description="Iterative template extraction and CEAF-family / Granular scoring.")
    parser.add_argument("--config", help="JSON file of option defaults (flat, or keyed by subcommand)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score predictions against a gold corpus")
    p.add_argument("--gold", required=True, help="gold corpus JSON")
    p.add_argument("--pred", required=True, help="predictions JSON")
    p.add_argument("--ontology", help="ontology JSON (default: $TEMPLEX_ONTOLOGY)")
    p.add_argument("--variant", choices=VARIANT_CHOICES, default="rme",
                   help="CEAF variant or granular (default rme)")
    p.add_argument("--phi", choices=PHI_CHOICES, default="phi3", help="entity similarity")
    p.add_argument("--format", choices=("json", "csv", "pretty"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="train a policy and write a checkpoint")
    p.add_argument("--corpus", required=True, help="training corpus JSON")
    p.add_argument("--ontology", help="ontology JSON (default: $TEMPLEX_ONTOLOGY)")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-trace", dest="loss_trace",
                   help="loss trace CSV (default: checkpoint path with .loss.csv)")
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="decode a corpus with a trained checkpoint")
    p.add_argument("--corpus", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--ontology", help="ontology JSON; must match the checkpoint's")
    p.add_argument("--out", required=True, help="predictions JSON path")
    p.add_argument("--max-iter", dest="max_iter", type=positive_int, default=10)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("sweep", help="retrain per grid point and score held-out data")
    p.add_argument("--corpus", required=True, help="training corpus JSON")
    p.add_argument("--test", help="held-out corpus JSON (default: last 20%% of --corpus)")
    p.add_argument("--ontology", help="ontology JSON (default: $TEMPLEX_ONTOLOGY)")
    p.add_argument("--alpha", type=unit_interval, nargs="+", help="alpha values to sweep")
    p.add_argument("--beta", type=beta_type, nargs="+", help="beta settings to sweep")
    p.add_argument("--seeds", type=int, nargs="+", default=[0], help="training seeds per point")
    p.add_argument("--variant", choices=VARIANT_CHOICES, default="rme")
    p.add_argument("--phi", choices=PHI_CHOICES, default="phi3")
    p.add_argument("--runtime", choices=("wall", "omit"), default="wall",
                   help="fill runtime_s with wall-clock seconds, or leave it blank")
    p.add_argument("--out", help="CSV path (default stdout)")
    _add_train_options(p, sweep=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True, help="corpus JSON path")
    p.add_argument("--ontology-out", dest="ontology_out", help="also write the ontology here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-docs", dest="n_docs", type=non_negative_int, default=100)
    p.add_argument("--min-templates", dest="min_templates", type=non_negative_int, default=1)
    p.add_argument("--max-templates", dest="max_templates", type=non_negative_int, default=3)
    p.add_argument("--types", type=positive_int, default=2, help="number of template types")
    p.add_argument("--slots", type=positive_int, default=3, help="slots per template type")
    p.add_argument("--filler-vocab", dest="filler_vocab", type=positive_int, default=50)
    p.add_argument("--noise-vocab", dest="noise_vocab", type=positive_int, default=50)
    p.add_argument("--distractor-rate", dest="distractor_rate", type=distractor_rate, default=0.3)
    p.set_defaults(func=cmd_synth)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    """Install JSON config values as parser defaults so explicit flags still win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    raw = _read_json(known.config)
    if not isinstance(raw, dict):
        raise InputError(f"{known.config}: config must be a JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in subparsers.choices.items():
        values = dict((k, v) for k, v in raw.items() if not isinstance(v, dict))
        values.update(raw.get(name, {}) if isinstance(raw.get(name), dict) else {})
        dests = {a.dest: a for a in sp._actions}
        for key, value in values.items():
            key = key.replace("-", "_")
            if key not in dests:
                continue
            action = dests[key]
            if action.type is not None and value is not None:
                conv = action.type
                value = [conv(str(v)) for v in value] if isinstance(value, list) else conv(str(value))
            sp.set_defaults(**{key: value})
            if action.required:
                action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (InputError, TemplexError, OSError, argparse.ArgumentTypeError) as e:
        parser.error(str(e))
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except InputError as e:
        print(f"templex {args.command}: error: {e}", file=sys.stderr)
        return 2
    except (TemplexError, OSError, ValueError) as e:
        print(f"templex {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
