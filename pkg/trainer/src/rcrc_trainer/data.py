"""Reading, validating, and encoding emitted JSONL examples.

Both emitted schemas are accepted: synthetic generation records carry a
pair_id, formatted dialogue records carry dialogue_id/turn_id.  Generation
records get a synthetic identity (the pair_id as dialogue, the occurrence
number as turn) so every example can be scored by the evaluator without
key collisions when a pair was emitted several times.

Records are handled as plain dicts read from the file; nothing here
imports the data-building package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

PAD = "[PAD]"
UNK = "[UNK]"


@dataclass(frozen=True)
class SpanExample:
    tokens: Tuple[str, ...]
    left_len: int
    span: Tuple[int, int]          # inclusive token indices; (0, 0) = no answer
    is_negative: bool
    dialogue_id: str
    turn_id: int


@dataclass
class ReadReport:
    read: int = 0
    kept: int = 0
    skipped: int = 0
    reasons: Dict[str, int] = field(default_factory=dict)

    def skip(self, reason: str) -> None:
        self.skipped += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1


def _problem(rec: dict) -> Optional[str]:
    tokens = rec.get("tokens")
    if not isinstance(tokens, list) or not tokens \
            or not all(isinstance(t, str) for t in tokens):
        return "bad_tokens"
    left_len = rec.get("left_len")
    if not isinstance(left_len, int) or not 1 <= left_len < len(tokens):
        return "bad_left_len"
    u, v = rec.get("span_u"), rec.get("span_v")
    if not (isinstance(u, int) and isinstance(v, int)):
        return "bad_span"
    if (u, v) != (0, 0) and not left_len <= u <= v < len(tokens) - 1:
        return "bad_span"
    has_dialogue = "dialogue_id" in rec and isinstance(rec.get("turn_id"), int)
    if not has_dialogue and "pair_id" not in rec:
        return "no_identity"
    return None


def iter_records(path: str) -> Iterator[dict]:
    """Raw records in file order, header lines dropped."""
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_header" in rec:
                continue
            yield rec


def read_examples(path: str, report: Optional[ReadReport] = None) -> List[SpanExample]:
    """Load a JSONL file into validated examples; malformed records are
    counted and skipped, never propagated."""
    if report is None:
        report = ReadReport()
    occurrences: Dict[str, int] = {}
    out: List[SpanExample] = []
    for rec in iter_records(path):
        report.read += 1
        problem = _problem(rec)
        if problem:
            report.skip(problem)
            continue
        if "dialogue_id" in rec and isinstance(rec.get("turn_id"), int):
            dialogue_id = str(rec["dialogue_id"])
            turn_id = rec["turn_id"]
        else:
            pair_id = str(rec["pair_id"])
            occurrences[pair_id] = occurrences.get(pair_id, 0) + 1
            dialogue_id = pair_id
            turn_id = occurrences[pair_id]
        span = (rec["span_u"], rec["span_v"])
        out.append(SpanExample(
            tokens=tuple(rec["tokens"]), left_len=rec["left_len"], span=span,
            is_negative=bool(rec.get("is_negative", span == (0, 0))),
            dialogue_id=dialogue_id, turn_id=turn_id))
        report.kept += 1
    return out


class Vocabulary:
    """Token type to id, with PAD at 0 and UNK at 1."""

    def __init__(self, tokens: Sequence[str]):
        if tokens[:2] != [PAD, UNK] and tuple(tokens[:2]) != (PAD, UNK):
            raise ValueError(f"vocabulary must start with {PAD}, {UNK}")
        self.tokens = list(tokens)
        self.ids = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.ids) != len(self.tokens):
            raise ValueError("vocabulary has duplicate tokens")

    @classmethod
    def build(cls, examples: Sequence[SpanExample]) -> "Vocabulary":
        types = sorted({tok for ex in examples for tok in ex.tokens})
        return cls([PAD, UNK] + types)

    def encode(self, tokens: Sequence[str]) -> List[int]:
        unk = self.ids[UNK]
        return [self.ids.get(tok, unk) for tok in tokens]

    def __len__(self) -> int:
        return len(self.tokens)


def pad_batch(examples: Sequence[SpanExample], vocab: Vocabulary
              ) -> Tuple[List[List[int]], List[List[bool]], List[int], List[int]]:
    """Encode and right-pad one batch.

    Returns (input_ids, attention_mask, starts, ends) as plain lists, ready
    to become tensors.  The mask is True on real tokens.
    """
    width = max(len(ex.tokens) for ex in examples)
    input_ids = []
    mask = []
    starts = []
    ends = []
    for ex in examples:
        ids = vocab.encode(ex.tokens)
        pad = width - len(ids)
        input_ids.append(ids + [0] * pad)
        mask.append([True] * len(ids) + [False] * pad)
        starts.append(ex.span[0])
        ends.append(ex.span[1])
    return input_ids, mask, starts, ends
