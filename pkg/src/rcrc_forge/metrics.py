"""Turn-level Exact Match and F1 for conversational span answers.

Scoring follows the usual conversational-QA conventions: answers are
normalized (case, punctuation, articles, whitespace), F1 is bag-of-tokens
overlap, and a no-answer gold is matched only by a no-answer prediction.
A prediction says "no answer" with an empty string or the literal
"NO ANSWER" (any case).  Golds are scored single-reference: one annotated
span per turn.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .corpus import Dialogue

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")


def normalize_answer(text: str) -> str:
    """Lowercase, drop punctuation, drop articles, collapse whitespace."""
    text = text.lower()
    text = text.translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def is_no_answer_text(text: str) -> bool:
    stripped = text.strip()
    return not stripped or stripped.lower() == "no answer"


def exact_match(pred: str, gold: Optional[str]) -> int:
    """1 iff the answers agree after normalization.

    ``gold`` is None for a no-answer turn; such a turn is matched only by a
    no-answer prediction.
    """
    pred_empty = is_no_answer_text(pred)
    if gold is None:
        return int(pred_empty)
    if pred_empty:
        return 0
    return int(normalize_answer(pred) == normalize_answer(gold))


def token_f1(pred: str, gold: Optional[str]) -> float:
    """Bag-of-tokens F1 on normalized answers; no answer is an empty bag."""
    pred_tokens = [] if is_no_answer_text(pred) else normalize_answer(pred).split()
    gold_tokens = [] if gold is None else normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class Prediction:
    dialogue_id: str
    turn_id: int
    answer_text: str


@dataclass
class TurnScore:
    dialogue_id: str
    turn_id: int
    em: int
    f1: float
    gold_no_answer: bool
    pred_no_answer: bool
    missing: bool


@dataclass
class EvalReport:
    em: float
    f1: float
    n_turns: int
    n_missing: int
    n_gold_no_answer: int
    n_pred_no_answer: int
    turns: List[TurnScore] = field(default_factory=list)

    def to_dict(self, include_turns: bool = True) -> dict:
        d = {
            "em": self.em,
            "f1": self.f1,
            "n_turns": self.n_turns,
            "n_missing": self.n_missing,
            "n_gold_no_answer": self.n_gold_no_answer,
            "n_pred_no_answer": self.n_pred_no_answer,
        }
        if include_turns:
            d["turns"] = [
                {"dialogue_id": t.dialogue_id, "turn_id": t.turn_id,
                 "em": t.em, "f1": round(t.f1, 6),
                 "gold_no_answer": t.gold_no_answer,
                 "pred_no_answer": t.pred_no_answer, "missing": t.missing}
                for t in self.turns
            ]
        return d

    def render(self) -> str:
        """Two-decimal summary on the 0-100 scale."""
        lines = [
            f"turns        {self.n_turns}",
            f"missing      {self.n_missing}",
            f"EM           {100.0 * self.em:.2f}",
            f"F1           {100.0 * self.f1:.2f}",
        ]
        return "\n".join(lines)


def evaluate(preds: Iterable[Prediction], golds: Iterable[Dialogue]) -> EvalReport:
    """Macro-average EM and F1 over every turn of every dialogue.

    A turn with no prediction at all scores 0 on both metrics (distinct from
    an empty-string prediction, which means "no answer" and can be right).
    Duplicate predictions for one turn are an error.
    """
    by_turn: Dict[Tuple[str, int], str] = {}
    dupes = []
    for p in preds:
        key = (p.dialogue_id, p.turn_id)
        if key in by_turn:
            dupes.append(key)
        by_turn[key] = p.answer_text
    if dupes:
        shown = ", ".join(f"{d}/{t}" for d, t in dupes[:5])
        raise ValueError(f"duplicate predictions for {len(dupes)} turn(s): {shown}")

    turns: List[TurnScore] = []
    em_sum = 0.0
    f1_sum = 0.0
    n_missing = 0
    n_gold_na = 0
    n_pred_na = 0
    for d in golds:
        for t in d.turns:
            gold = None if t.is_no_answer else t.gold_answer_text
            if gold is None:
                n_gold_na += 1
            key = (d.dialogue_id, t.turn_id)
            if key not in by_turn:
                n_missing += 1
                turns.append(TurnScore(d.dialogue_id, t.turn_id, 0, 0.0,
                                       gold is None, False, True))
                continue
            pred = by_turn[key]
            if is_no_answer_text(pred):
                n_pred_na += 1
            em = exact_match(pred, gold)
            f1 = token_f1(pred, gold)
            em_sum += em
            f1_sum += f1
            turns.append(TurnScore(d.dialogue_id, t.turn_id, em, f1,
                                   gold is None, is_no_answer_text(pred), False))
    n = len(turns)
    return EvalReport(
        em=em_sum / n if n else 0.0,
        f1=f1_sum / n if n else 0.0,
        n_turns=n, n_missing=n_missing,
        n_gold_no_answer=n_gold_na, n_pred_no_answer=n_pred_na,
        turns=turns)


def load_predictions(path: str) -> List[Prediction]:
    preds = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_header" in rec:
                continue
            preds.append(Prediction(str(rec["dialogue_id"]), int(rec["turn_id"]),
                                    str(rec["answer_text"])))
    return preds
