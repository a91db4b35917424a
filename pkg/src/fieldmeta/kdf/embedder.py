"""Backbone stub: table tokenization, hash embeddings, entity vectors.

Pretrained tabular backbones are out of scope; tokens get deterministic
seeded pseudo-random unit vectors instead, so the fusion math stays
verifiable at desk scale. Entity embeddings arrive from a file keyed by
table id and position; a synthetic generator covers tests and demos.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from fieldmeta.errors import MalformedInput
from fieldmeta.table import CellKind, Table

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\w\s]")


def split_tokens(text: str, cap: int) -> list[str]:
    return _TOKEN_RE.findall(text.lower())[:cap]


@dataclass(frozen=True)
class TokenizedTable:
    """Flat token sequence with per-token cell/column/row coordinates.

    Row 0 is the header row; data rows start at 1. Cell ids are unique per
    (column, row) pair that produced at least one token.
    """

    table_id: str
    tokens: tuple[str, ...]
    cell_ids: tuple[int, ...]
    col_ids: tuple[int, ...]
    row_ids: tuple[int, ...]
    n_cols: int


def tokenize_table(table: Table, max_rows: int, max_tokens_per_cell: int) -> TokenizedTable:
    tokens: list[str] = []
    cell_ids: list[int] = []
    col_ids: list[int] = []
    row_ids: list[int] = []
    next_cell = 0
    for f in table.fields:
        header_tokens = split_tokens(f.header, max_tokens_per_cell) or [f"[h{f.index}]"]
        for tok in header_tokens:
            tokens.append(tok)
            cell_ids.append(next_cell)
            col_ids.append(f.index)
            row_ids.append(0)
        next_cell += 1
        for r, cell in enumerate(f.cells[:max_rows], start=1):
            if cell.kind is CellKind.EMPTY:
                continue
            cell_tokens = split_tokens(cell.raw, max_tokens_per_cell)
            if not cell_tokens:
                continue
            for tok in cell_tokens:
                tokens.append(tok)
                cell_ids.append(next_cell)
                col_ids.append(f.index)
                row_ids.append(r)
            next_cell += 1
    return TokenizedTable(
        table_id=table.id,
        tokens=tuple(tokens),
        cell_ids=tuple(cell_ids),
        col_ids=tuple(col_ids),
        row_ids=tuple(row_ids),
        n_cols=len(table.fields),
    )


def _hash_vector(key: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


class HashTokenEmbedder:
    """token string -> deterministic unit vector; same token, same vector."""

    def __init__(self, dim: int, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            vec = _hash_vector(f"tok:{self.seed}:{token}", self.dim)
            self._cache[token] = vec
        return vec

    def embed_sequence(self, tokens) -> np.ndarray:
        if not tokens:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.stack([self.embed(t) for t in tokens])


@dataclass
class EntityStore:
    """Knowledge-graph vectors keyed by (table_id, column[, row]).

    ``cells`` holds cell-entity vectors, ``columns`` holds column type/property
    vectors. Lookups for absent keys return None; the model substitutes a zero
    vector and restricts its visibility to the owning cell.
    """

    dim: int
    cells: dict[tuple[str, int, int], np.ndarray] = dc_field(default_factory=dict)
    columns: dict[tuple[str, int], np.ndarray] = dc_field(default_factory=dict)

    def cell_entity(self, table_id: str, col: int, row: int) -> np.ndarray | None:
        return self.cells.get((table_id, col, row))

    def column_entity(self, table_id: str, col: int) -> np.ndarray | None:
        return self.columns.get((table_id, col))

    @staticmethod
    def synthetic(tables: list[Table], dim: int, seed: int = 0) -> "EntityStore":
        """Deterministic pseudo-entities for every cell and column."""
        store = EntityStore(dim=dim)
        for table in tables:
            for f in table.fields:
                store.columns[(table.id, f.index)] = _hash_vector(
                    f"col:{seed}:{table.id}:{f.index}:{f.header}", dim
                )
                for r, cell in enumerate(f.cells, start=1):
                    if cell.kind is CellKind.EMPTY:
                        continue
                    store.cells[(table.id, f.index, r)] = _hash_vector(
                        f"cell:{seed}:{table.id}:{f.index}:{cell.raw}", dim
                    )
        return store

    @staticmethod
    def empty(dim: int) -> "EntityStore":
        return EntityStore(dim=dim)

    def to_json(self) -> str:
        tables: dict[str, dict] = {}
        for (tid, col, row), vec in self.cells.items():
            entry = tables.setdefault(tid, {"cells": {}, "columns": {}})
            entry["cells"][f"{col},{row}"] = [round(float(v), 8) for v in vec]
        for (tid, col), vec in self.columns.items():
            entry = tables.setdefault(tid, {"cells": {}, "columns": {}})
            entry["columns"][str(col)] = [round(float(v), 8) for v in vec]
        return json.dumps({"dim": self.dim, "tables": tables})

    @staticmethod
    def from_json(text: str) -> "EntityStore":
        try:
            doc = json.loads(text)
            store = EntityStore(dim=int(doc["dim"]))
            for tid, entry in doc.get("tables", {}).items():
                for key, vec in entry.get("cells", {}).items():
                    col, row = (int(p) for p in key.split(","))
                    store.cells[(tid, col, row)] = np.asarray(vec, dtype=np.float64)
                for key, vec in entry.get("columns", {}).items():
                    store.columns[(tid, int(key))] = np.asarray(vec, dtype=np.float64)
            return store
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"bad entity embedding file: {exc}") from exc

    @staticmethod
    def load(path: str | Path) -> "EntityStore":
        return EntityStore.from_json(Path(path).read_text(encoding="utf-8"))
