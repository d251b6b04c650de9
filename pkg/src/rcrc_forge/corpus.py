"""Corpus ingestion: QA pairs, reviews, and annotated dialogues.

QA pairs and reviews arrive as JSONL (one record per line); dialogues arrive
as a single JSON document in the conversational-QA layout (top-level "data"
array of {story, questions, answers}).  Loaders validate aggressively,
reject bad records with line numbers, and never raise for data problems
short of an unreadable or structurally broken file.

All offsets are Unicode scalar-value indices into UTF-8 decoded text.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

NO_ANSWER_SPAN_SENTINEL = -1
NO_ANSWER_SPAN_TEXT = "unknown"


class CorpusError(Exception):
    """Fatal problem with an input file (unreadable, wrong top-level shape)."""


@dataclass(frozen=True)
class RecordError:
    """One rejected record: where it came from and why."""

    line: int                 # 1-based line (JSONL) or item index (JSON array)
    record_id: str
    message: str

    def __str__(self) -> str:
        return f"line {self.line} [{self.record_id}]: {self.message}"


@dataclass(frozen=True)
class QAPair:
    pair_id: str
    entity_id: str
    question: str
    answer: str


@dataclass(frozen=True)
class Review:
    review_id: str
    entity_id: str
    sentences: Tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass(frozen=True)
class Turn:
    """One question turn; gold_char_span is None for NO ANSWER."""

    turn_id: int
    question: str
    gold_answer_text: str
    gold_char_span: Optional[Tuple[int, int]]

    @property
    def is_no_answer(self) -> bool:
        return self.gold_char_span is None


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    review_id: str
    review_text: str
    turns: Tuple[Turn, ...]


class _EntityIndexed:
    """Immutable entity-indexed collection shared by both corpora."""

    def __init__(self, items, entity_key):
        self._items = tuple(items)
        self._by_entity: Dict[str, list] = {}
        for item in self._items:
            self._by_entity.setdefault(entity_key(item), []).append(item)

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    @property
    def entities(self):
        return frozenset(self._by_entity)

    def by_entity(self, entity_id: str) -> list:
        return list(self._by_entity.get(entity_id, ()))


class QACorpus(_EntityIndexed):
    def __init__(self, pairs: Iterable[QAPair]):
        super().__init__(pairs, lambda p: p.entity_id)

    @property
    def pairs(self) -> Tuple[QAPair, ...]:
        return self._items


class ReviewCorpus(_EntityIndexed):
    def __init__(self, reviews: Iterable[Review]):
        super().__init__(reviews, lambda r: r.entity_id)

    @property
    def reviews(self) -> Tuple[Review, ...]:
        return self._items


# ---------------------------------------------------------------------------
# sentence segmentation
# ---------------------------------------------------------------------------

# common abbreviations that end in a period but do not end a sentence
ABBREVIATIONS = frozenset({
    "mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.", "vs.", "etc.",
    "e.g.", "i.e.", "inc.", "ltd.", "co.", "corp.", "fig.", "no.", "dept.",
    "approx.", "a.m.", "p.m.", "u.s.", "u.k.",
})

_TERMINALS = ".?!"


def segment_sentences(text: str) -> List[str]:
    """Split text into sentences on ./?/! followed by whitespace + capital.

    A terminal punctuation run ends a sentence when the next non-whitespace
    character is uppercase or the text ends.  Periods closing a known
    abbreviation never split.  Returned sentences are stripped and non-empty;
    joining them with single spaces reproduces the input up to
    inter-sentence whitespace.
    """
    if not text.strip():
        raise ValueError("cannot segment empty text")
    sentences = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        if text[i] not in _TERMINALS:
            i += 1
            continue
        run_end = i + 1
        while run_end < n and text[run_end] in _TERMINALS:
            run_end += 1
        is_boundary = False
        look = run_end
        while look < n and text[look].isspace():
            look += 1
        if look >= n:
            is_boundary = True
        elif look > run_end and text[look].isupper():
            is_boundary = True
        if is_boundary and text[run_end - 1] == ".":
            # the word carrying the final period may be an abbreviation
            w = run_end - 1
            while w > 0 and not text[w - 1].isspace():
                w -= 1
            if text[w:run_end].lower() in ABBREVIATIONS:
                is_boundary = False
        if is_boundary:
            piece = text[start:run_end].strip()
            if piece:
                sentences.append(piece)
            start = look
        i = run_end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


# ---------------------------------------------------------------------------
# JSONL loaders
# ---------------------------------------------------------------------------

def _iter_jsonl(path: str):
    try:
        f = open(path, encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    with f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if line:
                yield line_no, line


def load_qa_pairs(path: str) -> Tuple[QACorpus, List[RecordError]]:
    """Load a JSONL QA-pair corpus; invalid records are rejected, not fatal."""
    pairs = []
    errors = []
    seen = set()
    for line_no, line in _iter_jsonl(path):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(RecordError(line_no, "?", f"invalid JSON: {exc.msg}"))
            continue
        rid = str(rec.get("pair_id", "?"))
        problem = _check_fields(rec, ("pair_id", "entity_id", "question", "answer"))
        if problem:
            errors.append(RecordError(line_no, rid, problem))
            continue
        question = str(rec["question"]).strip()
        answer = str(rec["answer"]).strip()
        if not question or not answer:
            errors.append(RecordError(line_no, rid, "empty question or answer"))
            continue
        if rid in seen:
            errors.append(RecordError(line_no, rid, "duplicate pair_id"))
            continue
        seen.add(rid)
        pairs.append(QAPair(rid, str(rec["entity_id"]), question, answer))
    return QACorpus(pairs), errors


def load_reviews(path: str) -> Tuple[ReviewCorpus, List[RecordError]]:
    """Load a JSONL review corpus; raw `text` is sentence-segmented."""
    reviews = []
    errors = []
    seen = set()
    for line_no, line in _iter_jsonl(path):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            errors.append(RecordError(line_no, "?", f"invalid JSON: {exc.msg}"))
            continue
        rid = str(rec.get("review_id", "?"))
        problem = _check_fields(rec, ("review_id", "entity_id"))
        if problem:
            errors.append(RecordError(line_no, rid, problem))
            continue
        if "sentences" in rec:
            raw = rec["sentences"]
            if not isinstance(raw, list):
                errors.append(RecordError(line_no, rid, "sentences must be a list"))
                continue
            sentences = [str(s).strip() for s in raw]
            sentences = [s for s in sentences if s]
        elif "text" in rec:
            text = str(rec["text"])
            sentences = segment_sentences(text) if text.strip() else []
        else:
            errors.append(RecordError(line_no, rid, "missing field: text or sentences"))
            continue
        if not sentences:
            errors.append(RecordError(line_no, rid, "review has no content"))
            continue
        if rid in seen:
            errors.append(RecordError(line_no, rid, "duplicate review_id"))
            continue
        seen.add(rid)
        reviews.append(Review(rid, str(rec["entity_id"]), tuple(sentences)))
    return ReviewCorpus(reviews), errors


def _check_fields(rec, names) -> Optional[str]:
    if not isinstance(rec, dict):
        return "record is not an object"
    missing = [n for n in names if n not in rec or rec[n] is None]
    if missing:
        return f"missing field: {', '.join(missing)}"
    return None


# ---------------------------------------------------------------------------
# dialogue (conversational-QA JSON) loader
# ---------------------------------------------------------------------------

def _collapse_ws(s: str) -> str:
    return " ".join(s.split())


def _review_fingerprint(story: str) -> str:
    return hashlib.blake2b(story.encode("utf-8"), digest_size=8).hexdigest()


def load_rcrc_dialogues(path: str) -> Tuple[List[Dialogue], List[RecordError], Dict[str, int]]:
    """Load an annotated dialogue file.

    Returns (dialogues, errors, span_match_modes).  A dialogue is rejected
    whole if any turn is malformed (span text not matching the story slice,
    non-contiguous turn ids, question/answer mismatch), with one error entry
    per problem.  span_match_modes counts how gold spans matched their story
    slice: "exact", "whitespace" (equal after collapsing whitespace), or
    "normalized" (equal after lowercasing too) -- annotation offsets may have
    been produced on either raw or normalized text, so both are accepted and
    reported.

    Reviews are identified by an explicit `review_id` on the item when
    present, otherwise by a fingerprint of the story text, so several
    dialogues over one review count as one review.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path} is not valid JSON: {exc.msg} (line {exc.lineno})") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("data"), list):
        raise CorpusError(f"{path}: expected a top-level object with a 'data' array")

    dialogues = []
    errors = []
    match_modes = {"exact": 0, "whitespace": 0, "normalized": 0}
    for idx, item in enumerate(doc["data"]):
        did = str(item.get("id", f"item{idx}"))
        if not isinstance(item, dict):
            errors.append(RecordError(idx, did, "item is not an object"))
            continue
        story = item.get("story")
        questions = item.get("questions")
        answers = item.get("answers")
        if not isinstance(story, str) or not isinstance(questions, list) or not isinstance(answers, list):
            errors.append(RecordError(idx, did, "missing story/questions/answers"))
            continue
        if len(questions) != len(answers):
            errors.append(RecordError(idx, did,
                                      f"{len(questions)} questions vs {len(answers)} answers"))
            continue
        turns, turn_errors = _build_turns(did, idx, story, questions, answers, match_modes)
        if turn_errors:
            errors.extend(turn_errors)
            continue
        if not turns:
            errors.append(RecordError(idx, did, "dialogue has no turns"))
            continue
        review_id = str(item["review_id"]) if "review_id" in item else _review_fingerprint(story)
        dialogues.append(Dialogue(did, review_id, story, tuple(turns)))
    return dialogues, errors, match_modes


def _build_turns(did, idx, story, questions, answers, match_modes):
    turns = []
    errors = []
    for pos, (q, a) in enumerate(zip(questions, answers), start=1):
        q_turn = q.get("turn_id")
        a_turn = a.get("turn_id")
        if q_turn != pos or a_turn != pos:
            errors.append(RecordError(
                idx, f"{did}/turn {pos}",
                f"turn ids not contiguous from 1 (question {q_turn}, answer {a_turn})"))
            continue
        question = str(q.get("input_text", "")).strip()
        if not question:
            errors.append(RecordError(idx, f"{did}/turn {pos}", "empty question"))
            continue
        start = a.get("span_start")
        end = a.get("span_end")
        if start == NO_ANSWER_SPAN_SENTINEL and end == NO_ANSWER_SPAN_SENTINEL:
            turns.append(Turn(pos, question, "", None))
            continue
        if not (isinstance(start, int) and isinstance(end, int)
                and 0 <= start < end <= len(story)):
            errors.append(RecordError(
                idx, f"{did}/turn {pos}", f"bad span ({start}, {end}) for story of length {len(story)}"))
            continue
        span_text = str(a.get("span_text", ""))
        slice_ = story[start:end]
        if slice_ == span_text:
            match_modes["exact"] += 1
        elif _collapse_ws(slice_) == _collapse_ws(span_text):
            match_modes["whitespace"] += 1
        elif _collapse_ws(slice_).lower() == _collapse_ws(span_text).lower():
            match_modes["normalized"] += 1
        else:
            errors.append(RecordError(
                idx, f"{did}/turn {pos}",
                f"span_text {span_text!r} does not match story slice {slice_!r}"))
            continue
        turns.append(Turn(pos, question, span_text, (start, end)))
    return turns, errors


# ---------------------------------------------------------------------------
# serializers (round-trip partners of the loaders)
# ---------------------------------------------------------------------------

def save_qa_pairs(pairs: Iterable[QAPair], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps({"pair_id": p.pair_id, "entity_id": p.entity_id,
                                "question": p.question, "answer": p.answer},
                               ensure_ascii=False, sort_keys=True) + "\n")


def save_reviews(reviews: Iterable[Review], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in reviews:
            f.write(json.dumps({"review_id": r.review_id, "entity_id": r.entity_id,
                                "sentences": list(r.sentences)},
                               ensure_ascii=False, sort_keys=True) + "\n")


def save_rcrc_dialogues(dialogues: Iterable[Dialogue], path: str) -> None:
    data = []
    for d in dialogues:
        questions = []
        answers = []
        for t in d.turns:
            questions.append({"input_text": t.question, "turn_id": t.turn_id})
            if t.is_no_answer:
                answers.append({"span_start": NO_ANSWER_SPAN_SENTINEL,
                                "span_end": NO_ANSWER_SPAN_SENTINEL,
                                "span_text": NO_ANSWER_SPAN_TEXT,
                                "input_text": NO_ANSWER_SPAN_TEXT,
                                "turn_id": t.turn_id})
            else:
                cs, ce = t.gold_char_span
                answers.append({"span_start": cs, "span_end": ce,
                                "span_text": t.gold_answer_text,
                                "input_text": t.gold_answer_text,
                                "turn_id": t.turn_id})
        data.append({"id": d.dialogue_id, "review_id": d.review_id,
                     "story": d.review_text, "questions": questions,
                     "answers": answers})
    with open(path, "w", encoding="utf-8") as f:
        json.dump({"version": "1.0", "data": data}, f, ensure_ascii=False, sort_keys=True)
        f.write("\n")
