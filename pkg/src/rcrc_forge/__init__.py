"""rcrc-forge: build, mask, validate, and score conversational review-QA training data.

The toolkit covers the whole data path for span-extraction conversational QA
over reviews:

* ingest QA-pair / review / dialogue corpora (`rcrc_forge.corpus`)
* offset-exact tokenization and span projection (`rcrc_forge.tokenizer`)
* synthetic pre-tuning example generation (`rcrc_forge.pretune`)
* fine-tuning example assembly from annotated dialogues (`rcrc_forge.finetune`)
* MLM-style token masking (`rcrc_forge.masking`)
* turn-level EM/F1 scoring (`rcrc_forge.metrics`)
* corpus statistics (`rcrc_forge.stats`)

Everything is deterministic given a seed; see `rcrc_forge.rng` for the
portable generator and the per-example seed derivation.
"""

__version__ = "0.1.0"
