"""Tiny from-scratch transformer encoder with a start/end span head.

The head is the usual extractive-QA arrangement: two linear projections
score every position as a span start or end, and the score at position 0
(the [CLS] slot) stands in for "no answer".  Decoding picks the best valid
right-side span and compares it against that no-answer score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
from torch import nn

NEG_INF = -1e9


@dataclass(frozen=True)
class SpanModelConfig:
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ffn: int = 128
    dropout: float = 0.0
    max_len: int = 256
    lr: float = 3e-3
    epochs: int = 4
    batch_size: int = 16
    max_steps: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError("d_model must divide evenly into n_heads")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be at least 1 when set")

    def to_dict(self) -> dict:
        import dataclasses
        return dataclasses.asdict(self)


class TinySpanEncoder(nn.Module):
    def __init__(self, vocab_size: int, cfg: SpanModelConfig):
        super().__init__()
        self.cfg = cfg
        self.token_embed = nn.Embedding(vocab_size, cfg.d_model, padding_idx=0)
        self.pos_embed = nn.Embedding(cfg.max_len, cfg.d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=cfg.d_model, nhead=cfg.n_heads,
            dim_feedforward=cfg.d_ffn, dropout=cfg.dropout,
            batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, num_layers=cfg.n_layers,
                                             enable_nested_tensor=False)
        self.start_head = nn.Linear(cfg.d_model, 1)
        self.end_head = nn.Linear(cfg.d_model, 1)

    def forward(self, input_ids: torch.Tensor, attention_mask: torch.Tensor
                ) -> Tuple[torch.Tensor, torch.Tensor]:
        """(B, L) ids and boolean mask -> (B, L) start and end logits.

        Padding positions come back at NEG_INF so they can never win an
        argmax or absorb probability mass in the loss.
        """
        length = input_ids.shape[1]
        positions = torch.arange(length, device=input_ids.device)
        x = self.token_embed(input_ids) + self.pos_embed(positions)
        hidden = self.encoder(x, src_key_padding_mask=~attention_mask)
        start = self.start_head(hidden).squeeze(-1)
        end = self.end_head(hidden).squeeze(-1)
        start = start.masked_fill(~attention_mask, NEG_INF)
        end = end.masked_fill(~attention_mask, NEG_INF)
        return start, end


def span_loss(start_logits: torch.Tensor, end_logits: torch.Tensor,
              starts: torch.Tensor, ends: torch.Tensor) -> torch.Tensor:
    loss = nn.functional.cross_entropy(start_logits, starts) \
        + nn.functional.cross_entropy(end_logits, ends)
    return loss / 2


def decode_span(start_logits: torch.Tensor, end_logits: torch.Tensor,
                left_len: int, length: int) -> Tuple[int, int]:
    """Best valid span for one example, or (0, 0) for no answer.

    Valid spans live entirely on the right side, between the first [SEP]
    and the final one: left_len <= u <= v <= length - 2.  The span's score
    start[u] + end[v] must beat the no-answer score start[0] + end[0].
    """
    start = start_logits.tolist()
    end = end_logits.tolist()
    no_answer = start[0] + end[0]
    best = None
    best_u = best_v = 0
    running_u = left_len
    for v in range(left_len, length - 1):
        if start[v] > start[running_u]:
            running_u = v
        score = start[running_u] + end[v]
        if best is None or score > best:
            best, best_u, best_v = score, running_u, v
    if best is None or best <= no_answer:
        return (0, 0)
    return (best_u, best_v)
