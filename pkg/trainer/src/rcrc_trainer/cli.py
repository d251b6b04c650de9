"""Command-line entry point: train and predict.

Exit codes match the data tool's convention: 0 success, 1 data error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__
from .data import ReadReport, read_examples
from .model import SpanModelConfig
from .predict import PredictReport, predict_examples, write_predictions
from .train import load_artifact, train

log = logging.getLogger("rcrc_trainer")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rcrc-trainer",
        description="Train a tiny span-extraction encoder on emitted JSONL "
                    "examples and write predictions the evaluator can score.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="fit the encoder and persist an artifact")
    p.add_argument("--data", required=True, help="examples JSONL")
    p.add_argument("--out", required=True, help="artifact directory")
    p.add_argument("--epochs", type=int, default=4)
    p.add_argument("--batch-size", type=int, default=16, dest="batch_size")
    p.add_argument("--lr", type=float, default=3e-3)
    p.add_argument("--max-steps", type=int, dest="max_steps",
                   help="stop after this many optimizer steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=64, dest="d_model")
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--ffn", type=int, default=128)
    p.add_argument("--max-len", type=int, default=256, dest="max_len")

    p = sub.add_parser("predict", help="write predictions for a JSONL file")
    p.add_argument("--model", required=True, help="artifact directory")
    p.add_argument("--data", required=True, help="examples JSONL")
    p.add_argument("--out", required=True, help="predictions JSONL")

    return parser


def _cmd_train(args) -> int:
    cfg = SpanModelConfig(
        d_model=args.d_model, n_heads=args.heads, n_layers=args.layers,
        d_ffn=args.ffn, max_len=args.max_len, lr=args.lr,
        epochs=args.epochs, batch_size=args.batch_size,
        max_steps=args.max_steps, seed=args.seed)
    report = ReadReport()
    examples = read_examples(args.data, report)
    log.info("read %d records from %s (%d kept, %d skipped)",
             report.read, args.data, report.kept, report.skipped)
    result = train(examples, cfg, args.out, read_report=report)
    log.info("trained %d steps over %d epochs, final loss %.4f -> %s",
             result.steps, result.epochs_run, result.final_loss,
             result.artifact_dir)
    if result.skipped_records:
        log.info("%d records were unusable and skipped", result.skipped_records)
    return 0


def _cmd_predict(args) -> int:
    model, vocab, cfg = load_artifact(args.model)
    report = ReadReport()
    examples = read_examples(args.data, report)
    log.info("read %d records from %s (%d kept, %d skipped)",
             report.read, args.data, report.kept, report.skipped)
    pred_report = PredictReport()
    preds = predict_examples(model, vocab, cfg, examples, pred_report)
    count = write_predictions(preds, args.out)
    log.info("wrote %d predictions -> %s (%d no-answer, %d truncated)",
             count, args.out, pred_report.no_answer, pred_report.truncated)
    return 0


def main(argv=None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    log.handlers = [handler]
    log.setLevel(logging.INFO)
    log.propagate = False
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return _cmd_train(args)
        return _cmd_predict(args)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": "data", "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
