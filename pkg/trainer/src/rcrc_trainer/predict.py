"""Batch inference writing the evaluator's predictions schema."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import torch

from .data import SpanExample, Vocabulary, pad_batch
from .model import SpanModelConfig, TinySpanEncoder, decode_span


@dataclass(frozen=True)
class SpanPrediction:
    dialogue_id: str
    turn_id: int
    span: Tuple[int, int]
    answer_text: str

    @property
    def is_no_answer(self) -> bool:
        return self.span == (0, 0)


@dataclass
class PredictReport:
    predicted: int = 0
    truncated: int = 0
    no_answer: int = 0


def _truncate(ex: SpanExample, max_len: int) -> SpanExample:
    """Drop right-side tail tokens so the example fits the model, keeping
    the closing separator."""
    tokens = ex.tokens[:max_len - 1] + (ex.tokens[-1],)
    return SpanExample(tokens=tokens, left_len=min(ex.left_len, max_len - 2),
                       span=(0, 0), is_negative=ex.is_negative,
                       dialogue_id=ex.dialogue_id, turn_id=ex.turn_id)


def predict_examples(model: TinySpanEncoder, vocab: Vocabulary,
                     cfg: SpanModelConfig, examples: Sequence[SpanExample],
                     report: Optional[PredictReport] = None) -> List[SpanPrediction]:
    """One prediction per example, in input order.

    Decoding considers right-side spans only and falls back to no answer
    (an empty answer_text) when the [CLS] score wins.  Examples longer than
    the model length are tail-truncated and counted.
    """
    if report is None:
        report = PredictReport()
    out: List[SpanPrediction] = []
    model.eval()
    with torch.no_grad():
        for i in range(0, len(examples), cfg.batch_size):
            batch = []
            for ex in examples[i:i + cfg.batch_size]:
                if len(ex.tokens) > cfg.max_len:
                    report.truncated += 1
                    ex = _truncate(ex, cfg.max_len)
                batch.append(ex)
            ids, mask, _, _ = pad_batch(batch, vocab)
            start_logits, end_logits = model(torch.tensor(ids), torch.tensor(mask))
            for j, ex in enumerate(batch):
                span = decode_span(start_logits[j], end_logits[j],
                                   ex.left_len, len(ex.tokens))
                u, v = span
                text = "" if span == (0, 0) else " ".join(ex.tokens[u:v + 1])
                if span == (0, 0):
                    report.no_answer += 1
                out.append(SpanPrediction(ex.dialogue_id, ex.turn_id, span, text))
                report.predicted += 1
    return out


def write_predictions(preds: Iterable[SpanPrediction], path: str) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for p in preds:
            f.write(json.dumps({
                "dialogue_id": p.dialogue_id,
                "turn_id": p.turn_id,
                "answer_text": p.answer_text,
            }, ensure_ascii=False, sort_keys=True) + "\n")
            count += 1
    return count
