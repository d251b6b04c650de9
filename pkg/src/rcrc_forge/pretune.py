"""Synthesis of span-labeled conversational examples from QA pairs and reviews.

Each QA pair yields, per repeat pass, one example: a simulated conversation
(a handful of other QA turns from the same entity, then the current
question) paired with a review from that entity into which an answer has
been spliced.  Positives splice the pair's own answer and label its token
span; negatives splice a different answer from the same entity and carry
the no-answer label (0, 0), which points at [CLS].

Sequence layout::

    [CLS] [Q] q1 [A] a1 ... [Q] q_cur [SEP]  review-with-answer  [SEP]

The left side is capped at ``max_left`` tokens, the whole sequence at
``max_len``.  Generation is deterministic: every (pair, repeat) gets its own
seed derived from the run seed, so output is byte-identical for a given
config regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import json
import multiprocessing
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from .corpus import QACorpus, QAPair, Review, ReviewCorpus
from .rng import Rng, derive_seed
from .tokenizer import A, CLS, Q, SEP, get_tokenizer

SCHEMA_VERSION = 1

# left side needs room for [CLS] [Q] <one question token> [SEP]
_MIN_MAX_LEFT = 4


class DisjointCorporaError(ValueError):
    """The QA pairs and the reviews share no entity, so nothing can pair up."""


@dataclass(frozen=True)
class GenConfig:
    seed: int
    k_repeats: int = 1
    h_max: int = 9
    neg_prob: float = 0.5
    max_len: int = 256
    max_left: int = 96
    tokenizer: str = "whitespace"
    vocab: Optional[str] = None
    lowercase: bool = True

    def __post_init__(self):
        if self.k_repeats < 1:
            raise ValueError("k_repeats must be at least 1")
        if self.h_max < 0:
            raise ValueError("h_max must not be negative")
        if not 0.0 <= self.neg_prob <= 1.0:
            raise ValueError("neg_prob must lie in [0, 1]")
        if self.max_left < _MIN_MAX_LEFT:
            raise ValueError(f"max_left must be at least {_MIN_MAX_LEFT}")
        if self.max_len <= self.max_left:
            raise ValueError("max_len must exceed max_left")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PretuneExample:
    tokens: Tuple[str, ...]
    left_len: int
    span: Tuple[int, int]          # token indices, inclusive; (0, 0) = no answer
    is_negative: bool
    pair_id: str
    review_id: str
    h_used: int                    # context turns actually included
    slot: int                      # sentence boundary the answer went into
    negative_fallback: bool = False   # wanted a negative, entity had no distractor
    answer_leaked: bool = False       # negative whose review still contains the true answer

    def to_record(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "left_len": self.left_len,
            "span_u": self.span[0],
            "span_v": self.span[1],
            "is_negative": self.is_negative,
            "pair_id": self.pair_id,
            "review_id": self.review_id,
            "h_used": self.h_used,
            "l": self.slot,
            "negative_fallback": self.negative_fallback,
            "answer_leaked": self.answer_leaked,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "PretuneExample":
        return cls(tokens=tuple(rec["tokens"]), left_len=rec["left_len"],
                   span=(rec["span_u"], rec["span_v"]),
                   is_negative=rec["is_negative"], pair_id=rec["pair_id"],
                   review_id=rec["review_id"], h_used=rec["h_used"],
                   slot=rec["l"],
                   negative_fallback=rec.get("negative_fallback", False),
                   answer_leaked=rec.get("answer_leaked", False))


@dataclass(frozen=True)
class Skip:
    pair_id: str
    reason: str


@dataclass
class GenReport:
    attempts: int = 0
    emitted: int = 0
    skipped: int = 0
    skip_reasons: Counter = field(default_factory=Counter)
    positives: int = 0
    negatives: int = 0
    negative_fallbacks: int = 0
    answer_leaks: int = 0
    h_histogram: Counter = field(default_factory=Counter)
    context_turns_dropped: int = 0
    questions_truncated: int = 0
    reviews_truncated: int = 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["skip_reasons"] = dict(self.skip_reasons)
        d["h_histogram"] = {str(k): v for k, v in sorted(self.h_histogram.items())}
        return d


class TokenCache:
    """Memoized token lists for questions, answers, and review sentences.

    Generation touches the same texts many times (k repeat passes, plus every
    appearance as a context turn or distractor), so tokenize each one once.
    """

    def __init__(self, tokenizer):
        self._tokenizer = tokenizer
        self._q: Dict[str, Tuple[str, ...]] = {}
        self._a: Dict[str, Tuple[str, ...]] = {}
        self._r: Dict[str, Tuple[Tuple[str, ...], ...]] = {}

    def question(self, pair: QAPair) -> Tuple[str, ...]:
        got = self._q.get(pair.pair_id)
        if got is None:
            got = self._q[pair.pair_id] = self._tokenizer.tokenize(pair.question).tokens
        return got

    def answer(self, pair: QAPair) -> Tuple[str, ...]:
        got = self._a.get(pair.pair_id)
        if got is None:
            got = self._a[pair.pair_id] = self._tokenizer.tokenize(pair.answer).tokens
        return got

    def review_sentences(self, review: Review) -> Tuple[Tuple[str, ...], ...]:
        got = self._r.get(review.review_id)
        if got is None:
            got = self._r[review.review_id] = tuple(
                self._tokenizer.tokenize(s).tokens for s in review.sentences)
        return got


def assemble_left_side(context: Sequence[Tuple[Tuple[str, ...], Tuple[str, ...]]],
                       q_tokens: Sequence[str], max_left: int):
    """Build the conversation side, trimming to at most ``max_left`` tokens.

    ``context`` holds (question_tokens, answer_tokens) pairs, oldest first;
    ``q_tokens`` is the current question.  When over budget, whole oldest
    turns go first; if the current question alone still does not fit, its
    tail is cut.  Returns (tokens, turns_dropped, q_truncated).
    """
    kept = list(context)
    dropped = 0
    q_tokens = list(q_tokens)
    if not q_tokens:
        raise ValueError("current question is empty")

    def total_len(turns):
        n = 3 + len(q_tokens)      # [CLS] ... [Q] q [SEP]
        for qt, at in turns:
            n += 2 + len(qt) + len(at)
        return n

    while kept and total_len(kept) > max_left:
        kept.pop(0)
        dropped += 1
    q_truncated = False
    if total_len(kept) > max_left:
        q_tokens = q_tokens[:max_left - 3]
        q_truncated = True
    tokens: List[str] = [CLS]
    for qt, at in kept:
        tokens.append(Q)
        tokens.extend(qt)
        tokens.append(A)
        tokens.extend(at)
    tokens.append(Q)
    tokens.extend(q_tokens)
    tokens.append(SEP)
    return tokens, dropped, q_truncated


def sample_context(pool: Sequence[QAPair], exclude: QAPair, h: int,
                   rng: Rng) -> Tuple[List[QAPair], int]:
    """Draw up to ``h`` context turns from the pool, never the current pair.

    When the pool is smaller than ``h`` the whole pool is used; the second
    return value is the count actually drawn.
    """
    avail = [p for p in pool if p.pair_id != exclude.pair_id]
    h_used = min(h, len(avail))
    drawn = rng.sample(avail, h_used) if h_used else []
    return drawn, h_used


def insert_answer(sent_tokens: Sequence[Tuple[str, ...]],
                  answer_tokens: Sequence[str], slot: int
                  ) -> Tuple[List[str], int]:
    """Splice the answer between review sentences at boundary ``slot``.

    Returns the combined right-side tokens and the token count of the
    sentences preceding the answer.
    """
    if not 0 <= slot <= len(sent_tokens):
        raise ValueError(f"slot {slot} outside [0, {len(sent_tokens)}]")
    right: List[str] = []
    for toks in sent_tokens[:slot]:
        right.extend(toks)
    prefix_len = len(right)
    right.extend(answer_tokens)
    for toks in sent_tokens[slot:]:
        right.extend(toks)
    return right, prefix_len


def _contains_subsequence(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0 or n > len(haystack):
        return False
    first = needle[0]
    probe = list(needle)
    for i in range(len(haystack) - n + 1):
        if haystack[i] == first and list(haystack[i:i + n]) == probe:
            return True
    return False


def generate_example(pair: QAPair, qa: QACorpus, reviews: ReviewCorpus,
                     cache: TokenCache, cfg: GenConfig, rng: Rng):
    """Run one synthesis attempt for one QA pair.

    Returns a PretuneExample or a Skip.  Draws happen in a fixed order
    (context size, context turns, review, polarity coin, distractor if
    negative, insertion slot) so a given seed always produces the same
    example.
    """
    pool = [p for p in qa.by_entity(pair.entity_id) if p.pair_id != pair.pair_id]

    h = rng.randint(0, cfg.h_max)
    context, _ = sample_context(pool, pair, h, rng)

    entity_reviews = reviews.by_entity(pair.entity_id)
    if not entity_reviews:
        return Skip(pair.pair_id, "no_review_for_entity")
    review = rng.choice(entity_reviews)

    coin = rng.random()
    is_negative = coin > 1.0 - cfg.neg_prob
    negative_fallback = False
    if is_negative:
        if pool:
            inserted = rng.choice(pool)
        else:
            is_negative = False
            negative_fallback = True
            inserted = pair
    else:
        inserted = pair

    sent_tokens = cache.review_sentences(review)
    m = len(sent_tokens)
    slot = rng.randint(0, m)

    context_tokens = [(cache.question(t), cache.answer(t)) for t in context]
    left_tokens, dropped, q_truncated = assemble_left_side(
        context_tokens, cache.question(pair), cfg.max_left)
    left_len = len(left_tokens)
    h_used = len(context) - dropped
    budget_right = cfg.max_len - left_len - 1

    ans_tokens = cache.answer(inserted)
    if len(ans_tokens) > budget_right:
        return Skip(pair.pair_id, "answer_exceeds_budget")

    prefix_lens = [0]
    for toks in sent_tokens:
        prefix_lens.append(prefix_lens[-1] + len(toks))
    while prefix_lens[slot] + len(ans_tokens) > budget_right:
        slot -= 1

    right, prefix_len = insert_answer(sent_tokens, ans_tokens, slot)
    u = left_len + prefix_len
    v = u + len(ans_tokens) - 1
    review_truncated = len(right) > budget_right
    if review_truncated:
        right = right[:budget_right]

    answer_leaked = False
    if is_negative:
        true_ans = cache.answer(pair)
        answer_leaked = _contains_subsequence(right, true_ans)
        span = (0, 0)
    else:
        span = (u, v)

    tokens = tuple(left_tokens) + tuple(right) + (SEP,)
    example = PretuneExample(
        tokens=tokens, left_len=left_len, span=span,
        is_negative=is_negative, pair_id=pair.pair_id,
        review_id=review.review_id, h_used=h_used, slot=slot,
        negative_fallback=negative_fallback, answer_leaked=answer_leaked)
    return example, dropped, q_truncated, review_truncated


def _record_outcome(report: GenReport, outcome) -> Optional[PretuneExample]:
    report.attempts += 1
    if isinstance(outcome, Skip):
        report.skipped += 1
        report.skip_reasons[outcome.reason] += 1
        return None
    example, dropped, q_truncated, review_truncated = outcome
    report.emitted += 1
    report.h_histogram[example.h_used] += 1
    report.context_turns_dropped += dropped
    if q_truncated:
        report.questions_truncated += 1
    if review_truncated:
        report.reviews_truncated += 1
    if example.is_negative:
        report.negatives += 1
        if example.answer_leaked:
            report.answer_leaks += 1
    else:
        report.positives += 1
        if example.negative_fallback:
            report.negative_fallbacks += 1
    return example


def _task_order(qa: QACorpus, cfg: GenConfig) -> List[Tuple[int, QAPair]]:
    in_order = sorted(qa.pairs, key=lambda p: p.pair_id)
    return [(rep, pair) for rep in range(cfg.k_repeats) for pair in in_order]


def _require_entity_overlap(qa: QACorpus, reviews: ReviewCorpus) -> None:
    if not qa.entities & reviews.entities:
        raise DisjointCorporaError(
            f"QA corpus ({len(qa.entities)} entities) and review corpus "
            f"({len(reviews.entities)} entities) share no entity_id")


def generate_dataset(qa: QACorpus, reviews: ReviewCorpus,
                     cfg: GenConfig) -> Tuple[Iterator[PretuneExample], GenReport]:
    """Generate all examples in deterministic order.

    Returns an iterator plus a report; the report's counters are complete
    only once the iterator is exhausted.  Order is (repeat pass, pair_id).
    """
    _require_entity_overlap(qa, reviews)
    tokenizer = get_tokenizer(cfg.tokenizer, cfg.vocab, cfg.lowercase)
    cache = TokenCache(tokenizer)
    report = GenReport()

    def gen():
        for rep, pair in _task_order(qa, cfg):
            rng = Rng(derive_seed(cfg.seed, pair.pair_id, rep))
            example = _record_outcome(
                report, generate_example(pair, qa, reviews, cache, cfg, rng))
            if example is not None:
                yield example

    return gen(), report


# ---------------------------------------------------------------------------
# JSONL serialization
# ---------------------------------------------------------------------------

def dumps_canonical(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def header_record(cfg: GenConfig, kind: str) -> dict:
    return {"_header": {"kind": kind, "schema_version": SCHEMA_VERSION,
                        "config": cfg.to_dict()}}


def read_examples(path: str) -> Iterator[PretuneExample]:
    """Read back a generated JSONL file, skipping the header line."""
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if "_header" in rec:
                continue
            yield PretuneExample.from_record(rec)


# worker state for fork-based parallel generation; populated in the parent
# right before the pool is created so children inherit it
_WORKER: dict = {}


def _run_task(task: Tuple[int, str]):
    rep, pair_id = task
    qa = _WORKER["qa"]
    cfg = _WORKER["cfg"]
    pair = _WORKER["pairs_by_id"][pair_id]
    rng = Rng(derive_seed(cfg.seed, pair_id, rep))
    return generate_example(pair, qa, _WORKER["reviews"], _WORKER["cache"], cfg, rng)


def write_dataset(qa: QACorpus, reviews: ReviewCorpus, cfg: GenConfig,
                  out_path: str, jobs: int = 1) -> GenReport:
    """Generate to a JSONL file, optionally across processes.

    Output bytes do not depend on ``jobs``: tasks carry their own seeds and
    results are consumed in task order.
    """
    _require_entity_overlap(qa, reviews)
    report = GenReport()
    with open(out_path, "w", encoding="utf-8") as out:
        out.write(dumps_canonical(header_record(cfg, "generate")) + "\n")
        if jobs <= 1:
            examples, report = generate_dataset(qa, reviews, cfg)
            for ex in examples:
                out.write(dumps_canonical(ex.to_record()) + "\n")
            return report

        tokenizer = get_tokenizer(cfg.tokenizer, cfg.vocab, cfg.lowercase)
        _WORKER["qa"] = qa
        _WORKER["reviews"] = reviews
        _WORKER["cfg"] = cfg
        _WORKER["cache"] = TokenCache(tokenizer)
        _WORKER["pairs_by_id"] = {p.pair_id: p for p in qa.pairs}
        tasks = [(rep, pair.pair_id) for rep, pair in _task_order(qa, cfg)]
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=jobs) as pool:
            for outcome in pool.imap(_run_task, tasks, chunksize=256):
                example = _record_outcome(report, outcome)
                if example is not None:
                    out.write(dumps_canonical(example.to_record()) + "\n")
        _WORKER.clear()
    return report
