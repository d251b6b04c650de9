"""Command-line entry point.

One binary, six subcommands: ingest, generate, format, mask, stats,
evaluate.  Options resolve as CLI flag, then config-file value, then
environment (RCRC_FORGE_SEED for the seed), then built-in default.  Every
run that writes an output also writes a manifest beside it (inputs, seed,
resolved config, counts) with no timestamps, so identical invocations
produce identical bytes.

Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from typing import Optional

from . import __version__
from .corpus import (CorpusError, load_qa_pairs, load_rcrc_dialogues,
                     load_reviews, save_qa_pairs, save_rcrc_dialogues,
                     save_reviews)
from .finetune import (ContextWindow, format_dialogues,
                       load_predictions_as_context, write_examples)
from .masking import MaskPolicy, collect_vocab, mask_record_dict
from .metrics import evaluate, load_predictions
from .pretune import (DisjointCorporaError, GenConfig, dumps_canonical,
                      write_dataset)
from .rng import Rng, derive_seed
from .stats import compute_stats, render_stats

log = logging.getLogger("rcrc_forge")

_SEED_ENV = "RCRC_FORGE_SEED"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcrc-forge",
        description="Build, mask, measure, and score conversational "
                    "reading-comprehension data from reviews and QA pairs.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")

    p = sub.add_parser("ingest", help="validate and normalize input corpora")
    add_common(p)
    p.add_argument("--qa", help="QA pairs JSONL")
    p.add_argument("--reviews", help="reviews JSONL")
    p.add_argument("--dialogues", help="annotated dialogues JSON")
    p.add_argument("--out", help="directory for normalized copies")
    p.add_argument("--report", help="validation report JSON path")

    p = sub.add_parser("generate", help="synthesize span-labeled examples")
    add_common(p)
    p.add_argument("--qa", help="QA pairs JSONL")
    p.add_argument("--reviews", help="reviews JSONL")
    p.add_argument("--h-max", type=int, dest="h_max")
    p.add_argument("--k", type=int, dest="k_repeats")
    p.add_argument("--neg-prob", type=float, dest="neg_prob")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--max-left", type=int, dest="max_left")
    p.add_argument("--seed", type=int)
    p.add_argument("--tokenizer", choices=["whitespace", "wordpiece"])
    p.add_argument("--vocab", help="vocabulary file for the wordpiece scheme")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="output JSONL")
    p.add_argument("--report", help="generation report JSON path")

    p = sub.add_parser("format", help="format annotated dialogues for training")
    add_common(p)
    p.add_argument("--dialogues", help="annotated dialogues JSON")
    p.add_argument("--max-turns", type=int, dest="max_turns")
    p.add_argument("--max-len", type=int, dest="max_len")
    p.add_argument("--max-left", type=int, dest="max_left")
    p.add_argument("--tokenizer", choices=["whitespace", "wordpiece"])
    p.add_argument("--vocab")
    p.add_argument("--context-from", dest="context_from",
                   help="predictions JSONL whose answers replace gold context")
    p.add_argument("--out", help="output JSONL")
    p.add_argument("--report", help="format report JSON path")

    p = sub.add_parser("mask", help="apply MLM masking to generated examples")
    add_common(p)
    p.add_argument("--in", dest="in_path", help="generated JSONL")
    p.add_argument("--rate", type=float, dest="mask_rate")
    p.add_argument("--protect-span", action="store_const", const=True,
                   default=None, dest="protect_span")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output JSONL")

    p = sub.add_parser("stats", help="report dialogue corpus statistics")
    add_common(p)
    p.add_argument("--dialogues", help="annotated dialogues JSON")
    p.add_argument("--format", dest="fmt", choices=["json", "table"])
    p.add_argument("--out", help="also write the rendered stats here")

    p = sub.add_parser("evaluate", help="score predictions against golds")
    add_common(p)
    p.add_argument("--gold", help="annotated dialogues JSON")
    p.add_argument("--pred", help="predictions JSONL")
    p.add_argument("--out-report", dest="out_report", help="report JSON path")

    return parser


class UsageError(Exception):
    pass


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    with open(path, encoding="utf-8") as f:
        cfg = json.load(f)
    if not isinstance(cfg, dict):
        raise CorpusError(f"{path}: config must be a JSON object")
    return cfg


def _opt(args, config: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        return config[name]
    return default


def _seed(args, config: dict) -> int:
    value = _opt(args, config, "seed")
    if value is None:
        value = os.environ.get(_SEED_ENV)
    return int(value) if value is not None else 0


def _require(args, config: dict, name: str, flag: str):
    value = _opt(args, config, name)
    if value is None:
        raise UsageError(f"missing required option {flag}")
    return value


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True, ensure_ascii=False)
        f.write("\n")


def _write_manifest(args, config: dict, subcommand: str, inputs: dict,
                    resolved: dict, counts: dict, out: Optional[str]) -> None:
    path = _opt(args, config, "manifest")
    if path is None:
        if not out:
            return
        path = out + ".manifest.json"
    _write_json(path, {
        "tool": "rcrc-forge",
        "version": __version__,
        "subcommand": subcommand,
        "inputs": {k: v for k, v in inputs.items() if v},
        "config": resolved,
        "counts": counts,
    })


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_ingest(args, config: dict) -> int:
    if not (args.qa or args.reviews or config.get("qa") or config.get("reviews")
            or args.dialogues or config.get("dialogues")):
        raise UsageError("ingest needs at least one of --qa/--reviews/--dialogues")
    qa_path = _opt(args, config, "qa")
    reviews_path = _opt(args, config, "reviews")
    dialogues_path = _opt(args, config, "dialogues")
    out_dir = _opt(args, config, "out")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    report = {}
    counts = {}
    if qa_path:
        qa, errors = load_qa_pairs(qa_path)
        log.info("loaded %d QA pairs from %s (%d rejected)",
                 len(qa), qa_path, len(errors))
        report["qa"] = {"loaded": len(qa), "rejected": len(errors),
                        "errors": [str(e) for e in errors]}
        counts["qa_loaded"] = len(qa)
        if out_dir:
            save_qa_pairs(qa, os.path.join(out_dir, "qa.jsonl"))
    if reviews_path:
        reviews, errors = load_reviews(reviews_path)
        log.info("loaded %d reviews from %s (%d rejected)",
                 len(reviews), reviews_path, len(errors))
        report["reviews"] = {"loaded": len(reviews), "rejected": len(errors),
                             "errors": [str(e) for e in errors]}
        counts["reviews_loaded"] = len(reviews)
        if out_dir:
            save_reviews(reviews, os.path.join(out_dir, "reviews.jsonl"))
    if dialogues_path:
        dialogues, errors, modes = load_rcrc_dialogues(dialogues_path)
        log.info("loaded %d dialogues from %s (%d problems)",
                 len(dialogues), dialogues_path, len(errors))
        report["dialogues"] = {"loaded": len(dialogues), "rejected": len(errors),
                               "errors": [str(e) for e in errors],
                               "span_match_modes": modes}
        counts["dialogues_loaded"] = len(dialogues)
        if out_dir:
            save_rcrc_dialogues(dialogues, os.path.join(out_dir, "dialogues.json"))

    report_path = _opt(args, config, "report")
    if report_path:
        _write_json(report_path, report)
    resolved = {"qa": qa_path, "reviews": reviews_path,
                "dialogues": dialogues_path, "out": out_dir}
    _write_manifest(args, config, "ingest",
                    {"qa": qa_path, "reviews": reviews_path,
                     "dialogues": dialogues_path},
                    resolved, counts, out_dir and os.path.join(out_dir, "ingest"))
    return 0


def _cmd_generate(args, config: dict) -> int:
    qa_path = _require(args, config, "qa", "--qa")
    reviews_path = _require(args, config, "reviews", "--reviews")
    out_path = _require(args, config, "out", "--out")

    cfg = GenConfig(
        seed=_seed(args, config),
        k_repeats=int(_opt(args, config, "k_repeats", 1)),
        h_max=int(_opt(args, config, "h_max", 9)),
        neg_prob=float(_opt(args, config, "neg_prob", 0.5)),
        max_len=int(_opt(args, config, "max_len", 256)),
        max_left=int(_opt(args, config, "max_left", 96)),
        tokenizer=_opt(args, config, "tokenizer", "whitespace"),
        vocab=_opt(args, config, "vocab"),
        lowercase=bool(_opt(args, config, "lowercase", True)))

    qa, qa_errors = load_qa_pairs(qa_path)
    log.info("loaded %d QA pairs (%d rejected)", len(qa), len(qa_errors))
    reviews, review_errors = load_reviews(reviews_path)
    log.info("loaded %d reviews (%d rejected)", len(reviews), len(review_errors))

    jobs = int(_opt(args, config, "jobs", 1))
    try:
        report = write_dataset(qa, reviews, cfg, out_path, jobs=jobs)
    except DisjointCorporaError as exc:
        raise CorpusError(f"{qa_path} and {reviews_path}: {exc}") from exc
    log.info("generated %d examples (%d attempts, %d skipped) -> %s",
             report.emitted, report.attempts, report.skipped, out_path)

    report_path = _opt(args, config, "report")
    if report_path:
        _write_json(report_path, report.to_dict())
    _write_manifest(args, config, "generate",
                    {"qa": qa_path, "reviews": reviews_path},
                    cfg.to_dict(), report.to_dict(), out_path)
    return 0


def _cmd_format(args, config: dict) -> int:
    dialogues_path = _require(args, config, "dialogues", "--dialogues")
    out_path = _require(args, config, "out", "--out")
    window = ContextWindow(max_turns=int(_opt(args, config, "max_turns", 6)))
    max_len = int(_opt(args, config, "max_len", 256))
    max_left = int(_opt(args, config, "max_left", 96))
    scheme = _opt(args, config, "tokenizer", "whitespace")
    vocab = _opt(args, config, "vocab")

    dialogues, errors, _ = load_rcrc_dialogues(dialogues_path)
    log.info("loaded %d dialogues (%d problems)", len(dialogues), len(errors))

    answers = None
    context_from = _opt(args, config, "context_from")
    if context_from:
        answers = load_predictions_as_context(context_from)
        log.info("context answers from %s (%d predictions)",
                 context_from, len(answers))

    examples, report = format_dialogues(
        dialogues, window, max_len=max_len, max_left=max_left,
        tokenizer_scheme=scheme, vocab=vocab, answers=answers)
    resolved = {"max_turns": window.max_turns, "max_len": max_len,
                "max_left": max_left, "tokenizer": scheme, "vocab": vocab,
                "context_from": context_from}
    write_examples(examples, out_path,
                   header={"kind": "format", "config": resolved})
    log.info("formatted %d turns -> %s (%d alignment errors)",
             report.emitted, out_path, len(report.alignment_errors))

    report_path = _opt(args, config, "report")
    if report_path:
        _write_json(report_path, report.to_dict())
    _write_manifest(args, config, "format", {"dialogues": dialogues_path},
                    resolved, report.to_dict(), out_path)
    return 0


def _cmd_mask(args, config: dict) -> int:
    in_path = _require(args, config, "in_path", "--in")
    out_path = _require(args, config, "out", "--out")
    policy = MaskPolicy(
        mask_rate=float(_opt(args, config, "mask_rate", 0.15)),
        replace_with_mask=float(_opt(args, config, "replace_with_mask", 0.8)),
        replace_with_random=float(_opt(args, config, "replace_with_random", 0.1)),
        keep_original=float(_opt(args, config, "keep_original", 0.1)),
        protect_span=bool(_opt(args, config, "protect_span", False)))
    seed = _seed(args, config)

    # pass 1: corpus vocabulary for random replacements
    def lines():
        with open(in_path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    yield json.loads(line)

    vocab = collect_vocab(rec["tokens"] for rec in lines() if "_header" not in rec)
    log.info("collected %d vocabulary types from %s", len(vocab), in_path)

    policy_dict = dataclasses.asdict(policy)
    n_records = 0
    n_masked = 0
    with open(out_path, "w", encoding="utf-8") as out:
        index = 0
        for rec in lines():
            if "_header" in rec:
                header = dict(rec["_header"])
                header["mask_policy"] = policy_dict
                header["mask_seed"] = seed
                out.write(dumps_canonical({"_header": header}) + "\n")
                continue
            rng = Rng(derive_seed(seed, index))
            masked = mask_record_dict(rec, policy, rng, vocab)
            out.write(dumps_canonical(masked) + "\n")
            n_records += 1
            n_masked += len(masked["mask_records"])
            index += 1
    log.info("masked %d records (%d tokens) -> %s", n_records, n_masked, out_path)

    counts = {"records": n_records, "masked_tokens": n_masked}
    _write_manifest(args, config, "mask", {"in": in_path},
                    {**policy_dict, "seed": seed}, counts, out_path)
    return 0


def _cmd_stats(args, config: dict) -> int:
    dialogues_path = _require(args, config, "dialogues", "--dialogues")
    fmt = _opt(args, config, "fmt", "table")
    dialogues, errors, _ = load_rcrc_dialogues(dialogues_path)
    if errors:
        log.info("%d dialogues rejected during load", len(errors))
    table = compute_stats(dialogues)
    rendered = render_stats(table, fmt)
    print(rendered)
    out_path = _opt(args, config, "out")
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            f.write(rendered + "\n")
    _write_manifest(args, config, "stats", {"dialogues": dialogues_path},
                    {"format": fmt}, table.to_dict(), out_path)
    return 0


def _cmd_evaluate(args, config: dict) -> int:
    gold_path = _require(args, config, "gold", "--gold")
    pred_path = _require(args, config, "pred", "--pred")
    golds, errors, _ = load_rcrc_dialogues(gold_path)
    if errors:
        log.info("%d gold dialogues rejected during load", len(errors))
    preds = load_predictions(pred_path)
    report = evaluate(preds, golds)
    print(report.render())
    out_path = _opt(args, config, "out_report")
    if out_path:
        _write_json(out_path, report.to_dict())
    _write_manifest(args, config, "evaluate",
                    {"gold": gold_path, "pred": pred_path}, {},
                    report.to_dict(include_turns=False), out_path)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "generate": _cmd_generate,
    "format": _cmd_format,
    "mask": _cmd_mask,
    "stats": _cmd_stats,
    "evaluate": _cmd_evaluate,
}


def _error_json(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def main(argv=None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.handlers = [handler]
    log.setLevel(logging.INFO)
    log.propagate = False
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config", None))
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        _error_json("usage", str(exc))
        return 2
    except (CorpusError, ValueError) as exc:
        _error_json("data", str(exc))
        return 1
    except OSError as exc:
        _error_json("io", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
