import json

import pytest

from rcrc_forge.corpus import (CorpusError, Dialogue, QAPair, Review, Turn,
                               load_qa_pairs, load_rcrc_dialogues,
                               load_reviews, save_qa_pairs,
                               save_rcrc_dialogues, save_reviews,
                               segment_sentences)


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return str(path)


# ---------------------------------------------------------------------------
# sentence segmentation
# ---------------------------------------------------------------------------

def test_segment_terminal_punctuation():
    assert segment_sentences("A. B? C!") == ["A.", "B?", "C!"]


def test_segment_no_terminal():
    assert segment_sentences("no terminal punctuation") == ["no terminal punctuation"]


def test_segment_abbreviation_not_split():
    assert segment_sentences("Mr. X is fine.") == ["Mr. X is fine."]


def test_segment_lowercase_continuation_not_split():
    # a period followed by a lowercase word is not a boundary
    assert segment_sentences("runs at 2.4 ghz all day.") == ["runs at 2.4 ghz all day."]


def test_segment_requires_content():
    with pytest.raises(ValueError):
        segment_sentences("   ")


def test_segment_reconstructs_up_to_whitespace():
    text = "Great screen. Boots fast!  Battery could be better. Would buy again."
    sentences = segment_sentences(text)
    assert len(sentences) == 4
    assert " ".join(sentences) == " ".join(text.split())


# ---------------------------------------------------------------------------
# QA pairs
# ---------------------------------------------------------------------------

def test_load_qa_pairs_happy_path(tmp_path):
    path = _write_jsonl(tmp_path / "qa.jsonl", [
        {"pair_id": "p1", "entity_id": "e1", "question": "how is it ?", "answer": "great"},
        {"pair_id": "p2", "entity_id": "e1", "question": "speed ?", "answer": "fast"},
        {"pair_id": "p3", "entity_id": "e2", "question": "why ?", "answer": "ssd"},
    ])
    corpus, errors = load_qa_pairs(path)
    assert not errors
    assert len(corpus) == 3
    assert {p.pair_id for p in corpus.by_entity("e1")} == {"p1", "p2"}
    assert corpus.entities == {"e1", "e2"}


def test_load_qa_pairs_empty_file(tmp_path):
    (tmp_path / "qa.jsonl").write_text("", encoding="utf-8")
    corpus, errors = load_qa_pairs(str(tmp_path / "qa.jsonl"))
    assert len(corpus) == 0
    assert errors == []


def test_load_qa_pairs_rejections(tmp_path):
    path = _write_jsonl(tmp_path / "qa.jsonl", [
        {"pair_id": "p1", "entity_id": "e1", "question": "q ?", "answer": ""},
        {"pair_id": "p2", "entity_id": "e1", "question": "q ?"},
        {"pair_id": "p3", "entity_id": "e1", "question": "ok ?", "answer": "which"},
        {"pair_id": "p3", "entity_id": "e1", "question": "again ?", "answer": "dupe"},
    ])
    with open(path, "a", encoding="utf-8") as f:
        f.write("not json at all\n")
    corpus, errors = load_qa_pairs(path)
    assert len(corpus) == 1
    assert len(errors) == 4
    messages = " | ".join(str(e) for e in errors)
    assert "empty question or answer" in messages
    assert "missing field" in messages
    assert "duplicate pair_id" in messages
    assert "invalid JSON" in messages
    # line numbers are reported
    assert "line 1" in str(errors[0])


def test_load_qa_pairs_unreadable_is_fatal(tmp_path):
    with pytest.raises(CorpusError):
        list(load_qa_pairs(str(tmp_path / "missing.jsonl")))


def test_qa_round_trip(tmp_path):
    records = [
        {"pair_id": "p1", "entity_id": "e1", "question": "how is it ?", "answer": "great"},
        {"pair_id": "p2", "entity_id": "e2", "question": "loud ?", "answer": "not at all"},
    ]
    path = _write_jsonl(tmp_path / "qa.jsonl", records)
    corpus, _ = load_qa_pairs(path)
    out = tmp_path / "rt.jsonl"
    save_qa_pairs(corpus, str(out))
    again, errors = load_qa_pairs(str(out))
    assert not errors
    assert list(again) == list(corpus)


# ---------------------------------------------------------------------------
# reviews
# ---------------------------------------------------------------------------

def test_load_reviews_presplit(tmp_path):
    path = _write_jsonl(tmp_path / "r.jsonl", [
        {"review_id": "r1", "entity_id": "e1", "sentences": ["Great.", "Fast boot."]},
    ])
    corpus, errors = load_reviews(path)
    assert not errors
    assert corpus.reviews[0].sentences == ("Great.", "Fast boot.")


def test_load_reviews_segments_raw_text(tmp_path):
    path = _write_jsonl(tmp_path / "r.jsonl", [
        {"review_id": "r1", "entity_id": "e1", "text": "Great. Fast boot."},
    ])
    corpus, errors = load_reviews(path)
    assert not errors
    assert corpus.reviews[0].sentences == ("Great.", "Fast boot.")
    assert corpus.reviews[0].text == "Great. Fast boot."


def test_load_reviews_rejections(tmp_path):
    path = _write_jsonl(tmp_path / "r.jsonl", [
        {"review_id": "r1", "entity_id": "e1", "text": "   "},
        {"review_id": "r2", "entity_id": "e1"},
        {"review_id": "r3", "entity_id": "e1", "text": "Fine."},
        {"review_id": "r3", "entity_id": "e1", "text": "Fine again."},
    ])
    corpus, errors = load_reviews(path)
    assert len(corpus) == 1
    assert len(errors) == 3
    messages = " | ".join(str(e) for e in errors)
    assert "no content" in messages
    assert "missing field" in messages
    assert "duplicate review_id" in messages


def test_reviews_round_trip(tmp_path):
    path = _write_jsonl(tmp_path / "r.jsonl", [
        {"review_id": "r1", "entity_id": "e1", "sentences": ["Great.", "Fast boot."]},
        {"review_id": "r2", "entity_id": "e2", "sentences": ["Loud room."]},
    ])
    corpus, _ = load_reviews(path)
    out = tmp_path / "rt.jsonl"
    save_reviews(corpus, str(out))
    again, errors = load_reviews(str(out))
    assert not errors
    assert list(again) == list(corpus)


def test_entity_partitioning(tmp_path):
    path = _write_jsonl(tmp_path / "r.jsonl", [
        {"review_id": f"r{i}", "entity_id": f"e{i % 3}", "text": "Fine."}
        for i in range(9)
    ])
    corpus, _ = load_reviews(path)
    per_entity = [corpus.by_entity(e) for e in sorted(corpus.entities)]
    ids = [r.review_id for part in per_entity for r in part]
    assert sorted(ids) == sorted(r.review_id for r in corpus)
    assert len(ids) == len(set(ids))


# ---------------------------------------------------------------------------
# dialogues
# ---------------------------------------------------------------------------

def test_load_fixture_dialogues(fixture_dialogues):
    assert len(fixture_dialogues) == 3
    d1 = next(d for d in fixture_dialogues if d.dialogue_id == "d1")
    assert d1.turns[0].question == "how is retina display ?"
    cs, ce = d1.turns[0].gold_char_span
    assert d1.review_text[cs:ce] == "great"
    assert d1.turns[2].is_no_answer


def test_fixture_review_identity_shared(fixture_dialogues):
    # two story-identical dialogues resolve to the same review identity
    by_id = {d.dialogue_id: d for d in fixture_dialogues}
    assert by_id["d1"].review_id == by_id["d2"].review_id
    assert by_id["d1"].review_id != by_id["d3"].review_id


def test_dialogue_span_mismatch_rejected(tmp_path):
    doc = {"data": [{
        "id": "bad",
        "story": "the screen is great .",
        "questions": [{"input_text": "how is it ?", "turn_id": 1}],
        "answers": [{"span_start": 0, "span_end": 3, "span_text": "wrong",
                     "input_text": "wrong", "turn_id": 1}],
    }]}
    path = tmp_path / "d.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    dialogues, errors, _ = load_rcrc_dialogues(str(path))
    assert dialogues == []
    assert len(errors) == 1
    assert "bad/turn 1" in str(errors[0])


def test_dialogue_noncontiguous_turns_rejected(tmp_path):
    doc = {"data": [{
        "id": "gap",
        "story": "the screen is great .",
        "questions": [{"input_text": "how is it ?", "turn_id": 1},
                      {"input_text": "and ?", "turn_id": 3}],
        "answers": [{"span_start": 14, "span_end": 19, "span_text": "great",
                     "input_text": "great", "turn_id": 1},
                    {"span_start": 14, "span_end": 19, "span_text": "great",
                     "input_text": "great", "turn_id": 3}],
    }]}
    path = tmp_path / "d.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    dialogues, errors, _ = load_rcrc_dialogues(str(path))
    assert dialogues == []
    assert any("not contiguous" in str(e) for e in errors)


def test_dialogue_whitespace_normalized_span_accepted(tmp_path):
    story = "the screen  is great ."
    doc = {"data": [{
        "id": "ws",
        "story": story,
        "questions": [{"input_text": "how is it ?", "turn_id": 1}],
        "answers": [{"span_start": 4, "span_end": 14,
                     "span_text": "screen is", "input_text": "screen is",
                     "turn_id": 1}],
    }]}
    path = tmp_path / "d.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    dialogues, errors, modes = load_rcrc_dialogues(str(path))
    assert not errors
    assert len(dialogues) == 1
    assert modes["whitespace"] == 1


def test_dialogue_malformed_json_fatal(tmp_path):
    path = tmp_path / "d.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(CorpusError):
        load_rcrc_dialogues(str(path))


def test_dialogue_wrong_top_level_fatal(tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps([1, 2, 3]), encoding="utf-8")
    with pytest.raises(CorpusError):
        load_rcrc_dialogues(str(path))


def test_dialogue_round_trip(tmp_path, fixture_dialogues):
    out = tmp_path / "rt.json"
    save_rcrc_dialogues(fixture_dialogues, str(out))
    again, errors, _ = load_rcrc_dialogues(str(out))
    assert not errors
    assert again == fixture_dialogues


def test_no_answer_sentinel_round_trip(tmp_path):
    d = Dialogue("d", "r", "nothing to see here .", (
        Turn(1, "anything ?", "", None),
    ))
    out = tmp_path / "na.json"
    save_rcrc_dialogues([d], str(out))
    raw = json.loads(out.read_text(encoding="utf-8"))
    answer = raw["data"][0]["answers"][0]
    assert answer["span_start"] == -1 and answer["span_end"] == -1
    assert answer["span_text"] == "unknown"
    again, errors, _ = load_rcrc_dialogues(str(out))
    assert not errors
    assert again[0].turns[0].is_no_answer
