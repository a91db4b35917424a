"""Fusion primitives: visibility matrix, masked entity attention, statistics fusion.

Knowledge fusion mixes token embeddings with entity embeddings through
attention whose logits are offset by ln M, where the visibility matrix M is
1 for same-cell token pairs, m for same-row/column pairs, and 0 otherwise.
Zero visibility is realized as a -1e30 additive mask: large enough that the
masked positions underflow to exact zeros after softmax, so invisible entity
rows cannot influence the output even bitwise. Every row contains its own
cell's entry (M_ii = 1), so no softmax row is ever fully masked.

Distribution fusion adds a linear map of the column embedding to category
embedding lookups, then concatenates the 31 normalized statistics.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from fieldmeta.errors import EmptyColumn, NonFiniteActivation, ShapeMismatch

MASK_VALUE = -1e30


def build_visibility(
    cell_ids,
    col_ids,
    row_ids,
    m: float,
    entity_missing=None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """n x n matrix with entries in {0, m, 1} per token-pair relation.

    Tokens whose entity vector is missing are visible only from their own
    cell (their column/row visibility is revoked).
    """
    cells = torch.as_tensor(cell_ids, dtype=torch.long)
    cols = torch.as_tensor(col_ids, dtype=torch.long)
    rows = torch.as_tensor(row_ids, dtype=torch.long)
    if not (len(cells) == len(cols) == len(rows)):
        raise ShapeMismatch("token coordinate arrays differ in length")
    same_cell = cells.unsqueeze(0) == cells.unsqueeze(1)
    same_line = (cols.unsqueeze(0) == cols.unsqueeze(1)) | (
        rows.unsqueeze(0) == rows.unsqueeze(1)
    )
    M = torch.zeros((len(cells), len(cells)), dtype=dtype)
    M[same_line] = m
    M[same_cell] = 1.0
    if entity_missing is not None:
        missing = torch.as_tensor(entity_missing, dtype=torch.bool)
        if len(missing) != len(cells):
            raise ShapeMismatch("entity_missing length mismatch")
        revoked = missing.unsqueeze(0).expand_as(M) & ~same_cell
        M[revoked] = 0.0
    return M


def full_visibility(n: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Column-level matrix: visibility only applies at sub-token level."""
    return torch.ones((n, n), dtype=dtype)


class KnowledgeFusion(nn.Module):
    """Entity attention fused into the token sequence.

    H = W3 (Attention(TOK, ENT, ENT) + ENT)
    Attention(Q, K, V) = W2 softmax(Q W1 K^T + ln M) V
    output = concat(TOK, H)
    """

    def __init__(self, d_tok: int, d_ent: int, d_h: int, scale: bool = False):
        super().__init__()
        self.d_tok = d_tok
        self.d_ent = d_ent
        self.d_h = d_h
        self.scale = scale
        self.w1 = nn.Linear(d_tok, d_ent, bias=False)
        self.w2 = nn.Linear(d_ent, d_ent, bias=False)
        self.w3 = nn.Linear(d_ent, d_h, bias=False)

    def attention_weights(self, tok: torch.Tensor, ent: torch.Tensor, M: torch.Tensor) -> torch.Tensor:
        scores = self.w1(tok) @ ent.transpose(-1, -2)
        if self.scale:
            scores = scores / math.sqrt(self.d_ent)
        positive = M > 0
        log_m = torch.where(positive, M, torch.ones_like(M)).log()
        mask = torch.where(positive, log_m, torch.full_like(M, MASK_VALUE))
        return torch.softmax(scores + mask, dim=-1)

    def forward(self, tok: torch.Tensor, ent: torch.Tensor, M: torch.Tensor) -> torch.Tensor:
        n = tok.shape[0]
        if tok.shape != (n, self.d_tok):
            raise ShapeMismatch(f"TOK shape {tuple(tok.shape)} != ({n}, {self.d_tok})")
        if ent.shape != (n, self.d_ent):
            raise ShapeMismatch(f"ENT shape {tuple(ent.shape)} != ({n}, {self.d_ent})")
        if M.shape != (n, n):
            raise ShapeMismatch(f"M shape {tuple(M.shape)} != ({n}, {n})")
        weights = self.attention_weights(tok, ent, M)
        attention = self.w2(weights @ ent)
        h = self.w3(attention + ent)
        out = torch.cat([tok, h], dim=-1)
        if not torch.isfinite(out).all():
            raise NonFiniteActivation("knowledge fusion produced non-finite values")
        return out


class DistributionFusion(nn.Module):
    """Column embedding + category embeddings, concatenated with statistics."""

    def __init__(self, d: int, n_stats: int = 31, n_field_types: int = 5, n_flags: int = 5):
        super().__init__()
        self.d = d
        self.n_stats = n_stats
        self.linear = nn.Linear(d, d)
        self.field_type_emb = nn.Embedding(n_field_types, d)
        self.flag_emb = nn.Parameter(torch.empty(n_flags, d))
        nn.init.normal_(self.flag_emb, std=0.02)

    def forward(
        self,
        col_emb: torch.Tensor,
        type_idx: torch.Tensor,
        flags: torch.Tensor,
        stats: torch.Tensor,
    ) -> torch.Tensor:
        k = col_emb.shape[0]
        if col_emb.shape != (k, self.d):
            raise ShapeMismatch(f"column embedding shape {tuple(col_emb.shape)}")
        if stats.shape != (k, self.n_stats):
            raise ShapeMismatch(f"stats shape {tuple(stats.shape)} != ({k}, {self.n_stats})")
        if flags.shape != (k, self.flag_emb.shape[0]):
            raise ShapeMismatch(f"flags shape {tuple(flags.shape)}")
        fused = self.linear(col_emb) + self.field_type_emb(type_idx) + flags @ self.flag_emb
        return torch.cat([fused, stats], dim=-1)


def pool_columns(tokens: torch.Tensor, col_ids, n_cols: int) -> torch.Tensor:
    """Average token vectors per column."""
    cols = torch.as_tensor(col_ids, dtype=torch.long)
    if cols.numel() != tokens.shape[0]:
        raise ShapeMismatch("col_ids length != token count")
    out = torch.zeros((n_cols, tokens.shape[1]), dtype=tokens.dtype)
    counts = torch.zeros(n_cols, dtype=tokens.dtype)
    out = out.index_add(0, cols, tokens)
    counts = counts.index_add(0, cols, torch.ones(len(cols), dtype=tokens.dtype))
    if (counts == 0).any():
        missing = torch.nonzero(counts == 0).flatten().tolist()
        raise EmptyColumn(f"columns without tokens: {missing}")
    return out / counts.unsqueeze(-1)
