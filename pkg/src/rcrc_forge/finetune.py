"""Turn annotated dialogues into span-labeled training examples.

Each question turn becomes one example: the most recent turns of
conversation history on the left, the review on the right, and the gold
character span projected into token space.  The sequence layout and budget
policies are shared with the synthetic-generation module, so a model can
consume both outputs interchangeably.

Prior turns whose gold label is no-answer appear in the context with the
literal answer text "NO ANSWER"; every prior turn keeps its answer slot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .corpus import Dialogue, RecordError, Turn
from .pretune import assemble_left_side, dumps_canonical
from .tokenizer import (AlignmentError, SEP, TokenSeq, char_span_to_token_span,
                        get_tokenizer)

NO_ANSWER_TEXT = "NO ANSWER"


@dataclass(frozen=True)
class ContextWindow:
    max_turns: int = 6

    def __post_init__(self):
        if self.max_turns < 0:
            raise ValueError("max_turns must not be negative")


@dataclass(frozen=True)
class RCRCExample:
    tokens: Tuple[str, ...]
    left_len: int
    span: Tuple[int, int]          # token indices, inclusive; (0, 0) = no answer
    is_negative: bool              # true for no-answer turns
    dialogue_id: str
    turn_id: int
    review_id: str
    h_used: int                    # prior turns present in the left side
    window_start: int              # review-token offset where the right side begins

    def to_record(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "left_len": self.left_len,
            "span_u": self.span[0],
            "span_v": self.span[1],
            "is_negative": self.is_negative,
            "dialogue_id": self.dialogue_id,
            "turn_id": self.turn_id,
            "review_id": self.review_id,
            "h_used": self.h_used,
            "window_start": self.window_start,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RCRCExample":
        return cls(tokens=tuple(rec["tokens"]), left_len=rec["left_len"],
                   span=(rec["span_u"], rec["span_v"]),
                   is_negative=rec["is_negative"],
                   dialogue_id=rec["dialogue_id"], turn_id=rec["turn_id"],
                   review_id=rec["review_id"], h_used=rec["h_used"],
                   window_start=rec.get("window_start", 0))


@dataclass
class FormatReport:
    total_turns: int = 0
    emitted: int = 0
    alignment_errors: List[RecordError] = None
    windows_shifted: int = 0
    reviews_truncated: int = 0
    questions_truncated: int = 0
    context_turns_dropped: int = 0

    def __post_init__(self):
        if self.alignment_errors is None:
            self.alignment_errors = []

    def to_dict(self) -> dict:
        return {
            "total_turns": self.total_turns,
            "emitted": self.emitted,
            "alignment_errors": [str(e) for e in self.alignment_errors],
            "windows_shifted": self.windows_shifted,
            "reviews_truncated": self.reviews_truncated,
            "questions_truncated": self.questions_truncated,
            "context_turns_dropped": self.context_turns_dropped,
        }


def window_context(turns: Sequence[Turn], w: ContextWindow,
                   answers: Optional[Mapping[int, str]] = None) -> List[Tuple[str, str]]:
    """Select the most recent ``max_turns`` prior turns as (question, answer).

    ``answers`` optionally overrides the answer text per turn_id (to feed a
    model's own predictions back in); turns without an override use the gold
    text.  No-answer turns, and overrides that amount to no answer,
    verbalize as "NO ANSWER".
    """
    if w.max_turns == 0:
        return []
    out = []
    for t in turns[-w.max_turns:]:
        text = None
        if answers is not None:
            text = answers.get(t.turn_id)
        if text is None:
            text = "" if t.is_no_answer else t.gold_answer_text
        if not text.strip() or text.strip().lower() == "no answer":
            text = NO_ANSWER_TEXT
        out.append((t.question, text))
    return out


def build_rcrc_input(dialogue: Dialogue, turn_id: int, w: ContextWindow,
                     tokenizer, review_seq: TokenSeq,
                     max_len: int = 256, max_left: int = 96,
                     answers: Optional[Mapping[int, str]] = None):
    """Build the example for one turn.

    Returns (RCRCExample, stats dict).  Raises AlignmentError when the gold
    span cannot be projected onto review tokens.  ``review_seq`` is the
    pre-tokenized review so callers amortize tokenization across turns.
    """
    turn = dialogue.turns[turn_id - 1]
    assert turn.turn_id == turn_id, "turns must be contiguous from 1"
    prior = dialogue.turns[:turn_id - 1]

    context = window_context(prior, w, answers)
    context_tokens = [(tokenizer.tokenize(q).tokens, tokenizer.tokenize(a).tokens)
                      for q, a in context]
    q_tokens = tokenizer.tokenize(turn.question).tokens
    left_tokens, dropped, q_truncated = assemble_left_side(
        context_tokens, q_tokens, max_left)
    left_len = len(left_tokens)
    budget_right = max_len - left_len - 1

    n = len(review_seq.tokens)
    window_start = 0
    shifted = False
    if turn.is_no_answer:
        span = (0, 0)
        ru = rv = None
    else:
        cs, ce = turn.gold_char_span
        ru, rv = char_span_to_token_span(review_seq, cs, ce)
        if rv - ru + 1 > budget_right:
            raise AlignmentError(
                f"gold span covers {rv - ru + 1} tokens but only "
                f"{budget_right} fit beside the conversation")
        if rv >= budget_right:
            # single window holding the span, roughly centered on it
            center = (ru + rv) // 2
            window_start = min(max(0, center - budget_right // 2),
                               max(0, n - budget_right))
            window_start = max(window_start, rv + 1 - budget_right)
            window_start = min(window_start, ru)
            shifted = True
        span = (left_len + ru - window_start, left_len + rv - window_start)

    right = list(review_seq.tokens[window_start:window_start + budget_right])
    truncated = window_start + len(right) < n or window_start > 0
    tokens = tuple(left_tokens) + tuple(right) + (SEP,)

    example = RCRCExample(
        tokens=tokens, left_len=left_len, span=span,
        is_negative=turn.is_no_answer, dialogue_id=dialogue.dialogue_id,
        turn_id=turn_id, review_id=dialogue.review_id,
        h_used=len(context) - dropped, window_start=window_start)
    stats = {"dropped": dropped, "q_truncated": q_truncated,
             "truncated": truncated, "shifted": shifted}
    return example, stats


def format_dialogues(dialogues: Iterable[Dialogue], w: ContextWindow,
                     max_len: int = 256, max_left: int = 96,
                     tokenizer_scheme: str = "whitespace",
                     vocab: Optional[str] = None, lowercase: bool = True,
                     answers: Optional[Mapping[Tuple[str, int], str]] = None
                     ) -> Tuple[List[RCRCExample], FormatReport]:
    """Format every turn of every dialogue, ordered by (dialogue_id, turn_id).

    Turns whose gold span cannot be aligned are dropped and accounted for in
    the report; everything else is emitted.
    """
    tokenizer = get_tokenizer(tokenizer_scheme, vocab, lowercase)
    report = FormatReport()
    examples = []
    for dialogue in sorted(dialogues, key=lambda d: d.dialogue_id):
        review_seq = tokenizer.tokenize(dialogue.review_text)
        per_dialogue = None
        if answers is not None:
            per_dialogue = {tid: text for (did, tid), text in answers.items()
                            if did == dialogue.dialogue_id}
        for turn in dialogue.turns:
            report.total_turns += 1
            try:
                example, stats = build_rcrc_input(
                    dialogue, turn.turn_id, w, tokenizer, review_seq,
                    max_len=max_len, max_left=max_left, answers=per_dialogue)
            except AlignmentError as exc:
                report.alignment_errors.append(RecordError(
                    turn.turn_id, f"{dialogue.dialogue_id}/turn {turn.turn_id}",
                    str(exc)))
                continue
            report.emitted += 1
            report.context_turns_dropped += stats["dropped"]
            if stats["q_truncated"]:
                report.questions_truncated += 1
            if stats["truncated"]:
                report.reviews_truncated += 1
            if stats["shifted"]:
                report.windows_shifted += 1
            examples.append(example)
    return examples, report


def write_examples(examples: Iterable[RCRCExample], path: str,
                   header: Optional[dict] = None) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as out:
        if header is not None:
            out.write(dumps_canonical({"_header": header}) + "\n")
        for ex in examples:
            out.write(dumps_canonical(ex.to_record()) + "\n")
            count += 1
    return count


def read_examples(path: str):
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_header" in rec:
                continue
            yield RCRCExample.from_record(rec)


def load_predictions_as_context(path: str) -> Dict[Tuple[str, int], str]:
    """Read a predictions JSONL file into a context-override mapping."""
    out: Dict[Tuple[str, int], str] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_header" in rec:
                continue
            out[(str(rec["dialogue_id"]), int(rec["turn_id"]))] = str(rec["answer_text"])
    return out
