import math
import random

import pytest
import torch

from rcrc_trainer.data import SpanExample, Vocabulary, pad_batch
from rcrc_trainer.model import (SpanModelConfig, TinySpanEncoder, decode_span,
                                span_loss)
from rcrc_trainer.predict import PredictReport, predict_examples

CFG = SpanModelConfig(d_model=32, n_heads=2, n_layers=1, d_ffn=64, max_len=64)


def _examples(n, rng, min_len=6, max_len=20):
    out = []
    for i in range(n):
        body = [f"w{rng.randint(0, 30)}" for _ in range(rng.randint(min_len, max_len))]
        left_len = rng.randint(2, max(2, len(body) // 2))
        tokens = ("[CLS]", "[Q]") + tuple(body[:left_len - 2]) + ("[SEP]",) \
            + tuple(body[left_len - 2:]) + ("[SEP]",)
        left = left_len + 1
        right_len = len(tokens) - left - 1
        if rng.random() < 0.3 or right_len < 1:
            span = (0, 0)
        else:
            u = left + rng.randint(0, right_len - 1)
            v = min(u + rng.randint(0, 2), len(tokens) - 2)
            span = (u, v)
        out.append(SpanExample(tokens, left, span, span == (0, 0), f"d{i}", 1))
    return out


def test_forward_shapes():
    torch.manual_seed(0)
    rng = random.Random(0)
    examples = _examples(4, rng)
    vocab = Vocabulary.build(examples)
    model = TinySpanEncoder(len(vocab), CFG)
    ids, mask, _, _ = pad_batch(examples, vocab)
    start, end = model(torch.tensor(ids), torch.tensor(mask))
    assert start.shape == end.shape == (4, len(ids[0]))
    # padding positions can never win
    for row, m in zip(start.tolist(), mask):
        for logit, real in zip(row, m):
            if not real:
                assert logit <= -1e8


def test_loss_finite_on_all_negative_batch():
    torch.manual_seed(0)
    examples = [SpanExample(("[CLS]", "[Q]", "q", "[SEP]", "x", "y", "[SEP]"),
                            4, (0, 0), True, f"d{i}", 1) for i in range(8)]
    vocab = Vocabulary.build(examples)
    model = TinySpanEncoder(len(vocab), CFG)
    ids, mask, starts, ends = pad_batch(examples, vocab)
    start, end = model(torch.tensor(ids), torch.tensor(mask))
    loss = span_loss(start, end, torch.tensor(starts), torch.tensor(ends))
    assert math.isfinite(loss.item())


def test_decode_span_prefers_best_pair():
    # start peaks at 5, end at 7; (5, 7) beats everything incl. no-answer
    start = torch.tensor([0.0, -9, -9, -9, 0.1, 3.0, 0.2, 0.1, -9])
    end = torch.tensor([0.0, -9, -9, -9, 0.0, 0.1, 0.2, 3.0, -9])
    assert decode_span(start, end, left_len=4, length=9) == (5, 7)


def test_decode_span_no_answer_when_cls_wins():
    start = torch.tensor([5.0, -9, -9, -9, 0.1, 0.0, -9])
    end = torch.tensor([5.0, -9, -9, -9, 0.0, 0.1, -9])
    assert decode_span(start, end, left_len=4, length=7) == (0, 0)


def test_decode_span_empty_right_side():
    start = torch.tensor([0.0, 1.0, 2.0])
    end = torch.tensor([0.0, 1.0, 2.0])
    assert decode_span(start, end, left_len=2, length=3) == (0, 0)


def test_predictions_one_per_example_and_valid():
    torch.manual_seed(7)
    rng = random.Random(7)
    examples = _examples(40, rng)
    vocab = Vocabulary.build(examples)
    model = TinySpanEncoder(len(vocab), CFG)
    preds = predict_examples(model, vocab, CFG, examples)
    assert len(preds) == len(examples)
    for ex, pred in zip(examples, preds):
        assert (pred.dialogue_id, pred.turn_id) == (ex.dialogue_id, ex.turn_id)
        u, v = pred.span
        if (u, v) == (0, 0):
            assert pred.answer_text == ""
        else:
            assert ex.left_len <= u <= v <= len(ex.tokens) - 2
            assert pred.answer_text == " ".join(ex.tokens[u:v + 1])
            assert "[SEP]" not in pred.answer_text


def test_overlong_example_truncated_and_flagged():
    torch.manual_seed(1)
    cfg = SpanModelConfig(d_model=32, n_heads=2, n_layers=1, d_ffn=64, max_len=16)
    body = tuple(f"w{i}" for i in range(40))
    long_ex = SpanExample(("[CLS]", "[Q]", "q", "[SEP]") + body + ("[SEP]",),
                          4, (0, 0), True, "d", 1)
    vocab = Vocabulary.build([long_ex])
    model = TinySpanEncoder(len(vocab), cfg)
    report = PredictReport()
    preds = predict_examples(model, vocab, cfg, [long_ex], report)
    assert report.truncated == 1
    assert len(preds) == 1
    u, v = preds[0].span
    assert (u, v) == (0, 0) or v <= cfg.max_len - 2


def test_config_validation():
    with pytest.raises(ValueError):
        SpanModelConfig(epochs=0)
    with pytest.raises(ValueError):
        SpanModelConfig(d_model=30, n_heads=4)
    with pytest.raises(ValueError):
        SpanModelConfig(batch_size=0)
    with pytest.raises(ValueError):
        SpanModelConfig(max_steps=0)
