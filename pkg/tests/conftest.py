import os

import pytest

from rcrc_forge.corpus import (QACorpus, QAPair, Review, ReviewCorpus,
                               load_rcrc_dialogues)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def build_corpora(n_entities=3, pairs_per_entity=12, reviews_per_entity=3,
                  sentences_per_review=3, words_per_sentence=5):
    """Deterministic synthetic corpora.

    Questions and reviews are short enough that they never need truncating,
    but a full nine-turn history overflows the left budget, so the
    drop-oldest-turns path still gets exercised.
    """
    pairs = []
    reviews = []
    for e in range(n_entities):
        eid = f"ent{e}"
        for i in range(pairs_per_entity):
            pairs.append(QAPair(
                pair_id=f"{eid}-p{i:03d}", entity_id=eid,
                question=f"what about feature {e} {i} ?",
                answer=f"feature answer {e} {i}"))
        for j in range(reviews_per_entity):
            sentences = tuple(
                " ".join(f"word{e}{j}{s}{w}" for w in range(words_per_sentence)) + " ."
                for s in range(sentences_per_review))
            reviews.append(Review(f"{eid}-r{j}", eid, sentences))
    return QACorpus(pairs), ReviewCorpus(reviews)


@pytest.fixture
def tiny_corpora():
    return build_corpora()


@pytest.fixture
def fixture_dialogues_path():
    return os.path.join(DATA_DIR, "dialogues_small.json")


@pytest.fixture
def fixture_dialogues(fixture_dialogues_path):
    dialogues, errors, _ = load_rcrc_dialogues(fixture_dialogues_path)
    assert not errors
    return dialogues
