import json
import shutil
import subprocess

import pytest


def forge(*args):
    """Run the data tool's CLI; the trainer only ever talks to it through
    subprocess and files."""
    exe = shutil.which("rcrc-forge")
    assert exe, "rcrc-forge must be installed to run these tests"
    return subprocess.run([exe, *args], check=True, capture_output=True,
                          text=True)


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def make_corpus_files(tmp_path, n_entities=8, pairs_per_entity=4):
    """Small QA and review corpora in the data tool's input schemas."""
    qa_rows = []
    review_rows = []
    for e in range(n_entities):
        eid = f"e{e}"
        for i in range(pairs_per_entity):
            qa_rows.append({
                "pair_id": f"{eid}-p{i}", "entity_id": eid,
                "question": f"what about thing {e} {i} ?",
                "answer": f"value{e}{i} detail{i}",
            })
        sentences = [" ".join(f"word{e}{s}{k}" for k in range(4)) + " ."
                     for s in range(2)]
        review_rows.append({"review_id": f"{eid}-r0", "entity_id": eid,
                            "sentences": sentences})
    qa_path = tmp_path / "qa.jsonl"
    reviews_path = tmp_path / "reviews.jsonl"
    write_jsonl(qa_path, qa_rows)
    write_jsonl(reviews_path, review_rows)
    return str(qa_path), str(reviews_path)


@pytest.fixture
def generated_dataset(tmp_path):
    """32 span-labeled examples produced by the data tool, history-free so
    each example's question is recoverable from its tokens."""
    qa_path, reviews_path = make_corpus_files(tmp_path)
    out = tmp_path / "gen.jsonl"
    forge("generate", "--qa", qa_path, "--reviews", reviews_path,
          "--out", str(out), "--seed", "13", "--k", "1",
          "--neg-prob", "0.25", "--h-max", "0")
    return str(out)
