"""Span-extraction trainer for rcrc-forge JSONL data.

This package is a consumer of the data tool's emitted files only: it reads
the generation and format JSONL schemas, trains a small encoder with a
start/end span head, and writes predictions in the schema the `evaluate`
subcommand scores.  It talks to the data tool through files and its CLI,
never through imports.
"""

__version__ = "0.1.0"
