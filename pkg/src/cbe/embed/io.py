"""Plain-text embedding files.

Line one is ``<vocab_size> <dim>``; each further line is a token followed by
``dim`` space-separated floats. Only the input (center) vectors are stored.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from cbe.embed.sgns import EmbeddingTable
from cbe.embed.tokens import Vocabulary
from cbe.errors import DimensionMismatch, ParseError


def export_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for tok, row in zip(table.vocab.tokens, table.input_vectors):
            if not tok or any(ch.isspace() for ch in tok):
                raise ValueError(f"token {tok!r} cannot be written (whitespace)")
            fh.write(tok + " " + " ".join(repr(float(x)) for x in row) + "\n")


def import_embeddings(path: str | Path) -> EmbeddingTable:
    """Read an embedding file. Token counts are unknown and set to 1.

    Raises:
        ParseError: bad header, wrong number of values, or a duplicate token.
        DimensionMismatch: header and row count disagree.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise ParseError(1, "header must be '<vocab_size> <dim>'")
        n, dim = int(header[0]), int(header[1])
        tokens: list[str] = []
        rows = np.zeros((n, dim))
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise ParseError(line_no, f"expected token plus {dim} values, got {len(parts) - 1} values")
            if len(tokens) >= n:
                raise DimensionMismatch(f"more than {n} rows")
            try:
                rows[len(tokens)] = [float(x) for x in parts[1:]]
            except ValueError as exc:
                raise ParseError(line_no, str(exc)) from None
            tokens.append(parts[0])
    if len(tokens) != n:
        raise DimensionMismatch(f"header announces {n} rows, file has {len(tokens)}")
    if len(set(tokens)) != n:
        raise ParseError(1, "duplicate token")
    if not np.isfinite(rows).all():
        raise ParseError(1, "non-finite value")
    vocab = Vocabulary(tokens=tokens, counts={t: 1 for t in tokens})
    return EmbeddingTable(vocab, rows, np.zeros_like(rows))
