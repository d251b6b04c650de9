"""Tokenization with exact character offsets, plus the special-token inventory.

All sequence formats downstream are built from plain token strings, so the
only hard requirements on a tokenizer are (a) per-token character offsets
into the source text and (b) that it can never emit one of the reserved
special surface forms for ordinary text.  The default scheme lowercases,
splits on whitespace, and peels leading/trailing punctuation characters into
their own tokens; an optional vocab-driven greedy longest-match subword
scheme is available for trainer compatibility.

Reserved surface forms cannot collide with tokenizer output: punctuation
peeling always separates "[" and "]" from the inner word, so text containing
the literal string "[CLS]" tokenizes to ("[", "cls", "]").
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

CLS = "[CLS]"
SEP = "[SEP]"
Q = "[Q]"
A = "[A]"
MASK = "[MASK]"

#: Reserved special tokens, in vocab-file id order (ids 0..4).
SPECIAL_TOKENS = (CLS, SEP, Q, A, MASK)
SPECIAL_TOKEN_SET = frozenset(SPECIAL_TOKENS)


class AlignmentError(ValueError):
    """A character span cannot be mapped onto the token sequence."""


@dataclass(frozen=True)
class TokenSeq:
    """Tokens with per-token (char_start, char_end) offsets into `source`.

    Offsets are Unicode scalar-value indices, strictly increasing and
    non-overlapping.  `source[start:end]` reconstructs each token's surface
    form before lowercasing ("##" continuation markers of the subword scheme
    are not part of the surface form).  Synthetic sequences assembled from
    parts carry `source=None` and no offsets.
    """

    tokens: Tuple[str, ...]
    offsets: Optional[Tuple[Tuple[int, int], ...]] = None
    source: Optional[str] = None

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    @classmethod
    def from_tokens(cls, tokens: Sequence[str]) -> "TokenSeq":
        """A synthetic sequence with no backing source text."""
        return cls(tokens=tuple(tokens))


def _is_separable_punct(ch: str) -> bool:
    # punctuation and symbols peel off word edges; letters/digits/marks stay
    return unicodedata.category(ch)[0] in ("P", "S")


class WhitespaceTokenizer:
    """Default scheme: lowercase, whitespace split, peel edge punctuation."""

    def __init__(self, lowercase: bool = True):
        self.lowercase = lowercase

    def tokenize(self, text: str) -> TokenSeq:
        tokens = []
        offsets = []

        def emit(start: int, end: int):
            surface = text[start:end]
            tokens.append(surface.lower() if self.lowercase else surface)
            offsets.append((start, end))

        i, n = 0, len(text)
        while i < n:
            if text[i].isspace():
                i += 1
                continue
            j = i
            while j < n and not text[j].isspace():
                j += 1
            # word is text[i:j]; peel punctuation char-by-char off both edges
            lead = i
            while lead < j and _is_separable_punct(text[lead]):
                emit(lead, lead + 1)
                lead += 1
            trail = j
            while trail > lead and _is_separable_punct(text[trail - 1]):
                trail -= 1
            if lead < trail:
                emit(lead, trail)
            for k in range(trail, j):
                emit(k, k + 1)
            i = j
        return TokenSeq(tuple(tokens), tuple(offsets), text)


class WordpieceTokenizer:
    """Greedy longest-match subword scheme driven by a vocabulary file.

    The vocab file holds one token per line; the line number is the token id
    and the five special tokens must occupy ids 0-4.  Pre-tokenization is the
    same as the default scheme; each word is then split into the longest
    vocabulary prefixes, continuations carrying a "##" marker.  A character
    with no vocabulary match passes through as a single-character token so
    offsets stay total (there is no [UNK] in the inventory).
    """

    def __init__(self, vocab_path: str, lowercase: bool = True):
        self.lowercase = lowercase
        self.vocab = {}
        with open(vocab_path, encoding="utf-8") as f:
            for idx, line in enumerate(f):
                token = line.rstrip("\n")
                if token:
                    self.vocab.setdefault(token, idx)
        head = [t for t, i in sorted(self.vocab.items(), key=lambda kv: kv[1])][:5]
        if tuple(head) != SPECIAL_TOKENS:
            raise ValueError(
                f"vocab file must start with {list(SPECIAL_TOKENS)}, got {head}"
            )
        self._pre = WhitespaceTokenizer(lowercase=lowercase)

    def token_id(self, token: str) -> Optional[int]:
        return self.vocab.get(token)

    def tokenize(self, text: str) -> TokenSeq:
        base = self._pre.tokenize(text)
        tokens = []
        offsets = []
        for word, (ws, we) in zip(base.tokens, base.offsets):
            if len(word) != we - ws:
                # lowercasing changed the length (e.g. ß -> ss); intra-word
                # offsets would drift, so keep the word whole
                tokens.append(word)
                offsets.append((ws, we))
                continue
            start = 0
            while start < len(word):
                end = len(word)
                piece = None
                while end > start:
                    candidate = word[start:end]
                    if start > 0:
                        candidate = "##" + candidate
                    if candidate in self.vocab:
                        piece = candidate
                        break
                    end -= 1
                if piece is None:
                    # unmatched character falls through unchanged
                    piece = word[start] if start == 0 else "##" + word[start]
                    end = start + 1
                tokens.append(piece)
                offsets.append((ws + start, ws + end))
                start = end
        return TokenSeq(tuple(tokens), tuple(offsets), text)


def get_tokenizer(scheme: str = "whitespace", vocab: Optional[str] = None,
                  lowercase: bool = True):
    if scheme == "whitespace":
        return WhitespaceTokenizer(lowercase=lowercase)
    if scheme == "wordpiece":
        if not vocab:
            raise ValueError("wordpiece scheme requires a vocab file")
        return WordpieceTokenizer(vocab, lowercase=lowercase)
    raise ValueError(f"unknown tokenizer scheme: {scheme!r}")


def char_span_to_token_span(seq: TokenSeq, cs: int, ce: int) -> Tuple[int, int]:
    """Minimal inclusive token range (u, v) covering the char range [cs, ce).

    Partial overlaps expand to the covering tokens.  Raises AlignmentError if
    the char range touches no token (it lies entirely in whitespace).
    """
    if seq.offsets is None:
        raise AlignmentError("sequence has no offsets")
    if not (0 <= cs < ce <= len(seq.source)):
        raise AlignmentError(
            f"char span [{cs}, {ce}) out of range for source of length {len(seq.source)}"
        )
    first = last = None
    for i, (ts, te) in enumerate(seq.offsets):
        if ts < ce and te > cs:
            if first is None:
                first = i
            last = i
        elif ts >= ce:
            break
    if first is None:
        raise AlignmentError(f"char span [{cs}, {ce}) covers no token")
    return first, last


def detokenize(seq: TokenSeq, u: int, v: int) -> str:
    """Surface text of tokens u..v inclusive.

    Slices the source text when the sequence has one; synthetic sequences
    fall back to joining tokens with single spaces.
    """
    if not (0 <= u <= v < len(seq.tokens)):
        raise IndexError(f"token span ({u}, {v}) out of range for {len(seq.tokens)} tokens")
    if seq.source is not None:
        return seq.source[seq.offsets[u][0]: seq.offsets[v][1]]
    return " ".join(seq.tokens[u: v + 1])


def reconstruct(seq: TokenSeq) -> str:
    """Join surface forms by offset: a space where the source had a gap.

    For the default scheme this equals the source text with whitespace runs
    collapsed to single spaces and edges stripped.
    """
    if seq.source is None:
        return " ".join(seq.tokens)
    parts = []
    prev_end = None
    for (ts, te) in seq.offsets:
        if prev_end is not None:
            parts.append(" " if ts > prev_end else "")
        parts.append(seq.source[ts:te])
        prev_end = te
    return "".join(parts)
