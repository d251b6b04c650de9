"""Single-process seeded training with a persisted loss trace."""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass
from typing import List, Optional, Sequence

import torch

from .data import ReadReport, SpanExample, Vocabulary, pad_batch
from .model import SpanModelConfig, TinySpanEncoder, span_loss

CHECKPOINT_NAME = "model.pt"
TRACE_NAME = "loss_trace.jsonl"


@dataclass
class TrainResult:
    steps: int
    epochs_run: int
    final_loss: float
    artifact_dir: str
    skipped_records: int = 0


def _batches(examples: List[SpanExample], batch_size: int,
             shuffle: random.Random) -> List[List[SpanExample]]:
    order = list(examples)
    shuffle.shuffle(order)
    return [order[i:i + batch_size] for i in range(0, len(order), batch_size)]


def train(examples: Sequence[SpanExample], cfg: SpanModelConfig,
          out_dir: str, read_report: Optional[ReadReport] = None) -> TrainResult:
    """Fit the tiny encoder on the given examples and persist an artifact.

    The artifact directory receives the checkpoint (weights, vocabulary,
    config) and a step-by-step loss trace.  Examples longer than the model
    length are skipped and counted, like any other unusable record; raises
    ValueError when nothing trainable remains.
    """
    usable = []
    dropped_long = 0
    for ex in examples:
        if len(ex.tokens) > cfg.max_len:
            dropped_long += 1
        else:
            usable.append(ex)
    examples = usable
    if not examples:
        raise ValueError("no trainable examples")

    torch.manual_seed(cfg.seed)
    shuffle = random.Random(cfg.seed)
    vocab = Vocabulary.build(examples)
    model = TinySpanEncoder(len(vocab), cfg)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    os.makedirs(out_dir, exist_ok=True)
    step = 0
    epochs_run = 0
    loss_value = float("nan")
    with open(os.path.join(out_dir, TRACE_NAME), "w", encoding="utf-8") as trace:
        for _ in range(cfg.epochs):
            if cfg.max_steps is not None and step >= cfg.max_steps:
                break
            epochs_run += 1
            for batch in _batches(examples, cfg.batch_size, shuffle):
                if cfg.max_steps is not None and step >= cfg.max_steps:
                    break
                ids, mask, starts, ends = pad_batch(batch, vocab)
                start_logits, end_logits = model(
                    torch.tensor(ids), torch.tensor(mask))
                loss = span_loss(start_logits, end_logits,
                                 torch.tensor(starts), torch.tensor(ends))
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
                step += 1
                loss_value = loss.item()
                trace.write(json.dumps({"step": step, "loss": loss_value}) + "\n")

    torch.save({
        "state_dict": model.state_dict(),
        "vocab": vocab.tokens,
        "config": cfg.to_dict(),
    }, os.path.join(out_dir, CHECKPOINT_NAME))
    skipped = dropped_long + (read_report.skipped if read_report else 0)
    return TrainResult(
        steps=step, epochs_run=epochs_run, final_loss=loss_value,
        artifact_dir=out_dir, skipped_records=skipped)


def load_artifact(artifact_dir: str):
    """Load (model, vocab, cfg) from a training artifact directory."""
    path = os.path.join(artifact_dir, CHECKPOINT_NAME)
    payload = torch.load(path, map_location="cpu", weights_only=True)
    cfg = SpanModelConfig(**payload["config"])
    vocab = Vocabulary(payload["vocab"])
    model = TinySpanEncoder(len(vocab), cfg)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, vocab, cfg
