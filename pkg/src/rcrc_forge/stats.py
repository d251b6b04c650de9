"""Corpus statistics over annotated dialogues.

One table row per dialogue collection: distinct reviews, dialogues,
dialogues with at least three question turns, questions, and the share of
no-answer questions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable

from .corpus import Dialogue


@dataclass(frozen=True)
class StatsTable:
    n_reviews: int
    n_dialogues: int
    n_dialogues_3plus_turns: int
    n_questions: int
    n_no_answer: int

    @property
    def pct_no_answer(self) -> float:
        if self.n_questions == 0:
            return 0.0
        return 100.0 * self.n_no_answer / self.n_questions

    def to_dict(self) -> dict:
        return {
            "n_reviews": self.n_reviews,
            "n_dialogues": self.n_dialogues,
            "n_dialogues_3plus_turns": self.n_dialogues_3plus_turns,
            "n_questions": self.n_questions,
            "n_no_answer": self.n_no_answer,
            "pct_no_answer": round(self.pct_no_answer, 1),
        }

    def render(self) -> str:
        rows = [
            ("# of reviews", str(self.n_reviews)),
            ("# of dialogues", str(self.n_dialogues)),
            ("# of dialogues w/ 3+ turns", str(self.n_dialogues_3plus_turns)),
            ("# of questions", str(self.n_questions)),
            ("% of NO ANSWER", f"{self.pct_no_answer:.1f}"),
        ]
        width = max(len(label) for label, _ in rows)
        return "\n".join(f"{label:<{width}}  {value}" for label, value in rows)


def compute_stats(dialogues: Iterable[Dialogue]) -> StatsTable:
    review_ids = set()
    n_dialogues = 0
    n_3plus = 0
    n_questions = 0
    n_no_answer = 0
    for d in dialogues:
        n_dialogues += 1
        review_ids.add(d.review_id)
        n_questions += len(d.turns)
        if len(d.turns) >= 3:
            n_3plus += 1
        n_no_answer += sum(1 for t in d.turns if t.is_no_answer)
    return StatsTable(
        n_reviews=len(review_ids),
        n_dialogues=n_dialogues,
        n_dialogues_3plus_turns=n_3plus,
        n_questions=n_questions,
        n_no_answer=n_no_answer)


def render_stats(table: StatsTable, fmt: str = "table") -> str:
    if fmt == "json":
        return json.dumps(table.to_dict(), indent=2, sort_keys=True)
    if fmt == "table":
        return table.render()
    raise ValueError(f"unknown format: {fmt}")
