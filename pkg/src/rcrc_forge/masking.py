"""BERT-style token masking over generated examples.

Every non-special token is independently selected with probability
``mask_rate``; a selected token is usually replaced by [MASK], sometimes by
a random vocabulary token, and sometimes left in place, while its original
surface is recorded so the corruption is reversible.  Special tokens are
never touched.  Span labels are not moved: masking changes token surfaces,
not positions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .rng import Rng
from .tokenizer import MASK, SPECIAL_TOKEN_SET

ACTION_MASK = "mask"
ACTION_RANDOM = "random"
ACTION_KEEP = "keep"


@dataclass(frozen=True)
class MaskPolicy:
    mask_rate: float = 0.15
    replace_with_mask: float = 0.8
    replace_with_random: float = 0.1
    keep_original: float = 0.1
    protect_span: bool = False

    def __post_init__(self):
        if not 0.0 <= self.mask_rate <= 1.0:
            raise ValueError("mask_rate must lie in [0, 1]")
        probs = (self.replace_with_mask, self.replace_with_random, self.keep_original)
        if any(p < 0 for p in probs):
            raise ValueError("sub-policy probabilities must not be negative")
        if not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            raise ValueError("sub-policy probabilities must sum to 1")


@dataclass(frozen=True)
class MaskRecord:
    position: int
    original: str
    action: str


@dataclass(frozen=True)
class MaskedExample:
    tokens: Tuple[str, ...]
    mask_records: Tuple[MaskRecord, ...]


def eligible_positions(tokens: Sequence[str],
                       span: Optional[Tuple[int, int]] = None,
                       protect_span: bool = False) -> List[int]:
    """Positions that may be masked: non-special tokens, minus the answer
    span when ``protect_span`` is set."""
    protected = set()
    if protect_span and span is not None and span != (0, 0):
        protected = set(range(span[0], span[1] + 1))
    return [i for i, tok in enumerate(tokens)
            if tok not in SPECIAL_TOKEN_SET and i not in protected]


def mask_tokens(tokens: Sequence[str], policy: MaskPolicy, rng: Rng,
                vocab: Optional[Sequence[str]] = None,
                span: Optional[Tuple[int, int]] = None
                ) -> Tuple[List[str], List[MaskRecord]]:
    """Apply the policy to one token sequence.

    Random replacements draw from ``vocab`` when given, otherwise from the
    sequence's own non-special token types, so a replacement is always an
    ordinary token.  Decisions are drawn in position order, one selection
    draw per eligible token plus one sub-policy draw (and possibly one
    vocabulary draw) per selected token.
    """
    out = list(tokens)
    records: List[MaskRecord] = []
    pool = vocab
    if not pool:
        pool = sorted({t for t in tokens if t not in SPECIAL_TOKEN_SET})
    for pos in eligible_positions(tokens, span, policy.protect_span):
        if rng.random() >= policy.mask_rate:
            continue
        original = out[pos]
        roll = rng.random()
        if roll < policy.replace_with_mask:
            action = ACTION_MASK
            out[pos] = MASK
        elif roll < policy.replace_with_mask + policy.replace_with_random:
            action = ACTION_RANDOM
            out[pos] = rng.choice(pool) if pool else original
        else:
            action = ACTION_KEEP
        records.append(MaskRecord(pos, original, action))
    return out, records


def apply_masking(example, policy: MaskPolicy, rng: Rng,
                  vocab: Optional[Sequence[str]] = None) -> MaskedExample:
    """Mask one generated example (anything with .tokens and .span)."""
    tokens, records = mask_tokens(example.tokens, policy, rng, vocab,
                                  span=example.span)
    return MaskedExample(tokens=tuple(tokens), mask_records=tuple(records))


def reconstruct_tokens(masked_tokens: Sequence[str],
                       records: Iterable[MaskRecord]) -> List[str]:
    """Undo masking by writing each record's original surface back."""
    out = list(masked_tokens)
    for rec in records:
        out[rec.position] = rec.original
    return out


def records_to_json(records: Iterable[MaskRecord]) -> List[list]:
    return [[r.position, r.original, r.action] for r in records]


def records_from_json(raw: Iterable[Sequence]) -> Tuple[MaskRecord, ...]:
    return tuple(MaskRecord(int(p), str(o), str(a)) for p, o, a in raw)


def mask_record_dict(rec: dict, policy: MaskPolicy, rng: Rng,
                     vocab: Optional[Sequence[str]] = None) -> dict:
    """Fill the mask fields of one generation/format JSONL record."""
    span = (rec.get("span_u", 0), rec.get("span_v", 0))
    tokens, records = mask_tokens(rec["tokens"], policy, rng, vocab, span=span)
    out = dict(rec)
    out["tokens"] = tokens
    out["mask_records"] = records_to_json(records)
    return out


def collect_vocab(token_seqs: Iterable[Sequence[str]]) -> List[str]:
    """Sorted non-special token types across a corpus, for random replacement."""
    seen = set()
    for tokens in token_seqs:
        seen.update(tokens)
    return sorted(seen - SPECIAL_TOKEN_SET)
