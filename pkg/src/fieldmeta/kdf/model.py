"""Two-level encoder model with task heads.

Pipeline: backbone token embeddings -> knowledge fusion -> sub-token encoder
-> average pooling -> projection to column width -> distribution fusion ->
column knowledge fusion -> column encoder -> linear heads per task. Fusion
stages are toggleable; with both off the model reduces to the encoders over
backbone embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
import torch
from torch import nn

from fieldmeta.errors import MissingVocabulary, NonFiniteLoss, ShapeMismatch
from fieldmeta.kdf.config import KdfConfig
from fieldmeta.kdf.embedder import EntityStore, HashTokenEmbedder, tokenize_table
from fieldmeta.kdf.fusion import (
    DistributionFusion,
    KnowledgeFusion,
    build_visibility,
    full_visibility,
    pool_columns,
)
from fieldmeta.labels import LabeledExample
from fieldmeta.stats import extract_categories, extract_statistics, normalize_features
from fieldmeta.table import FieldType, Table, is_numeric_field
from fieldmeta.tasks import MSR, Task
from fieldmeta.taxonomy import TaxonomyRegistry, default_registry

_FIELD_TYPE_INDEX = {
    FieldType.UNKNOWN: 0,
    FieldType.STRING: 1,
    FieldType.YEAR: 2,
    FieldType.DATETIME: 3,
    FieldType.DECIMAL: 4,
}

BINARY_TASKS = (Task.MSR_DIM, Task.NATURAL_KEY, Task.COMMON_BREAKDOWN, Task.COMMON_MEASURE)


@dataclass(frozen=True)
class LabelVocabs:
    msr_type: tuple[str, ...]
    dim_type: tuple[str, ...]
    agg: tuple[str, ...]

    @staticmethod
    def from_registry(registry: TaxonomyRegistry) -> "LabelVocabs":
        return LabelVocabs(
            msr_type=registry.measure_type_names(),
            dim_type=registry.dimension_type_names(),
            agg=registry.agg_functions,
        )


@dataclass
class TableInputs:
    """All tensors the model needs for one table."""

    table_id: str
    headers: tuple[str, ...]
    tok: torch.Tensor            # n x d_tok backbone embeddings
    sub_ent: torch.Tensor        # n x d_ent entity rows aligned with tokens
    sub_M: torch.Tensor          # n x n visibility
    col_ids: tuple[int, ...]
    n_cols: int
    col_ent: torch.Tensor        # k x d_ent column entities
    type_idx: torch.Tensor       # k field-type indices
    flags: torch.Tensor          # k x 5 boolean categories
    stats: torch.Tensor          # k x 31 normalized statistics
    numeric_fields: tuple[int, ...]


@dataclass
class KdfOutputs:
    msr_dim: torch.Tensor
    natural_key: torch.Tensor
    common_breakdown: torch.Tensor
    common_measure: torch.Tensor
    msr_type: torch.Tensor
    dim_type: torch.Tensor
    agg: torch.Tensor
    pair_indices: tuple[tuple[int, int], ...]
    pair_logits: torch.Tensor
    column_embeddings: torch.Tensor

    def logits_for(self, task: Task) -> torch.Tensor:
        return getattr(self, task.value)


def prepare_inputs(
    table: Table,
    cfg: KdfConfig,
    embedder: HashTokenEmbedder,
    entity_store: EntityStore,
) -> TableInputs:
    """Tokenize, embed, attach entities, and profile one table."""
    tokenized = tokenize_table(table, cfg.max_rows, cfg.max_tokens_per_cell)
    tok = torch.tensor(
        embedder.embed_sequence(tokenized.tokens), dtype=torch.float32
    )

    d_ent = cfg.subtoken.d_ent
    ent_rows = np.zeros((len(tokenized.tokens), d_ent))
    missing = [False] * len(tokenized.tokens)
    for pos in range(len(tokenized.tokens)):
        col = tokenized.col_ids[pos]
        row = tokenized.row_ids[pos]
        vec = (
            entity_store.column_entity(table.id, col)
            if row == 0
            else entity_store.cell_entity(table.id, col, row)
        )
        if vec is None:
            missing[pos] = True
        else:
            ent_rows[pos] = vec[:d_ent]
    sub_M = build_visibility(
        tokenized.cell_ids, tokenized.col_ids, tokenized.row_ids, cfg.m,
        entity_missing=missing,
    )

    col_ent = np.zeros((tokenized.n_cols, cfg.column.d_ent))
    for f in table.fields:
        vec = entity_store.column_entity(table.id, f.index)
        if vec is not None:
            col_ent[f.index] = vec[: cfg.column.d_ent]

    type_idx = torch.tensor(
        [_FIELD_TYPE_INDEX[f.field_type] for f in table.fields], dtype=torch.long
    )
    flags = torch.zeros((tokenized.n_cols, 5), dtype=torch.float32)
    stats = torch.zeros((tokenized.n_cols, cfg.n_stats), dtype=torch.float32)
    for f in table.fields:
        cats = extract_categories(f)
        flags[f.index] = torch.tensor(
            [cats.is_percent, cats.is_currency, cats.has_year, cats.has_month, cats.has_day],
            dtype=torch.float32,
        )
        stats[f.index] = torch.tensor(
            normalize_features(extract_statistics(f)).to_array(), dtype=torch.float32
        )

    return TableInputs(
        table_id=table.id,
        headers=tuple(f.header for f in table.fields),
        tok=tok,
        sub_ent=torch.tensor(ent_rows, dtype=torch.float32),
        sub_M=sub_M,
        col_ids=tokenized.col_ids,
        n_cols=tokenized.n_cols,
        col_ent=torch.tensor(col_ent, dtype=torch.float32),
        type_idx=type_idx,
        flags=flags,
        stats=stats,
        numeric_fields=tuple(f.index for f in table.fields if is_numeric_field(f)),
    )


def _encoder(width: int, heads: int, layers: int, dropout: float) -> nn.TransformerEncoder:
    layer = nn.TransformerEncoderLayer(
        d_model=width,
        nhead=heads,
        dim_feedforward=4 * width,
        dropout=dropout,
        batch_first=True,
        norm_first=False,  # post-norm
    )
    return nn.TransformerEncoder(layer, num_layers=layers)


class TaskHeads(nn.Module):
    def __init__(self, width: int, vocabs: LabelVocabs):
        super().__init__()
        self.msr_dim = nn.Linear(width, 1)
        self.natural_key = nn.Linear(width, 1)
        self.common_breakdown = nn.Linear(width, 1)
        self.common_measure = nn.Linear(width, 1)
        self.msr_type = nn.Linear(width, len(vocabs.msr_type))
        self.dim_type = nn.Linear(width, len(vocabs.dim_type))
        self.agg = nn.Linear(width, len(vocabs.agg))
        self.msr_pair = nn.Linear(2 * width, 1)


class KdfModel(nn.Module):
    def __init__(self, cfg: KdfConfig, vocabs: LabelVocabs):
        super().__init__()
        self.cfg = cfg
        self.vocabs = vocabs

        sub = cfg.subtoken
        self.sub_fusion = (
            KnowledgeFusion(sub.d_tok, sub.d_ent, sub.d_h, scale=cfg.attention_scale)
            if cfg.knowledge_on
            else None
        )
        self.sub_encoder = _encoder(cfg.subtoken_width, sub.heads, sub.layers, cfg.dropout)

        col = cfg.column
        self.col_proj = nn.Linear(cfg.subtoken_width, col.d_tok)
        self.dist_fusion = (
            DistributionFusion(col.d_tok, n_stats=cfg.n_stats) if cfg.distribution_on else None
        )
        kf_in = col.d_tok + (cfg.n_stats if cfg.distribution_on else 0)
        self.col_fusion = (
            KnowledgeFusion(kf_in, col.d_ent, col.d_h, scale=cfg.attention_scale)
            if cfg.knowledge_on
            else None
        )
        fused = cfg.column_fused_width
        enc_width = cfg.column_encoder_width
        self.col_adapter = nn.Linear(fused, enc_width) if enc_width != fused else None
        self.col_encoder = _encoder(enc_width, col.heads, col.layers, cfg.dropout)
        self.heads = TaskHeads(enc_width, vocabs)

    @property
    def dtype(self) -> torch.dtype:
        return self.heads.msr_dim.weight.dtype

    def encode_columns(self, inputs: TableInputs) -> torch.Tensor:
        """Run the pipeline up to the column encoder output (k x width)."""
        dtype = self.dtype
        tok = inputs.tok.to(dtype)
        if self.sub_fusion is not None:
            tok = self.sub_fusion(tok, inputs.sub_ent.to(dtype), inputs.sub_M.to(dtype))
        encoded = self.sub_encoder(tok.unsqueeze(0)).squeeze(0)
        cols = pool_columns(encoded, inputs.col_ids, inputs.n_cols)
        cols = self.col_proj(cols)
        if self.dist_fusion is not None:
            cols = self.dist_fusion(
                cols, inputs.type_idx, inputs.flags.to(dtype), inputs.stats.to(dtype)
            )
        if self.col_fusion is not None:
            cols = self.col_fusion(
                cols,
                inputs.col_ent.to(dtype),
                full_visibility(inputs.n_cols, dtype=dtype),
            )
        if self.col_adapter is not None:
            cols = self.col_adapter(cols)
        return self.col_encoder(cols.unsqueeze(0)).squeeze(0)

    def forward(self, inputs: TableInputs) -> KdfOutputs:
        columns = self.encode_columns(inputs)
        pair_indices = tuple(
            (a, b)
            for pos, a in enumerate(inputs.numeric_fields)
            for b in inputs.numeric_fields[pos + 1 :]
        )
        if pair_indices:
            pair_features = torch.stack(
                [torch.cat([columns[a], columns[b]]) for a, b in pair_indices]
            )
            pair_logits = self.heads.msr_pair(pair_features).squeeze(-1)
        else:
            pair_logits = torch.zeros(0, dtype=columns.dtype)
        return KdfOutputs(
            msr_dim=self.heads.msr_dim(columns).squeeze(-1),
            natural_key=self.heads.natural_key(columns).squeeze(-1),
            common_breakdown=self.heads.common_breakdown(columns).squeeze(-1),
            common_measure=self.heads.common_measure(columns).squeeze(-1),
            msr_type=self.heads.msr_type(columns),
            dim_type=self.heads.dim_type(columns),
            agg=self.heads.agg(columns),
            pair_indices=pair_indices,
            pair_logits=pair_logits,
            column_embeddings=columns,
        )


def _binary_loss(logits: torch.Tensor, index_targets: dict[int, float]) -> torch.Tensor | None:
    if not index_targets:
        return None
    idx = torch.tensor(sorted(index_targets), dtype=torch.long)
    target = torch.tensor(
        [index_targets[i] for i in sorted(index_targets)], dtype=logits.dtype
    )
    return nn.functional.binary_cross_entropy_with_logits(logits[idx], target)


def _averaged_multilabel_ce(
    logits: torch.Tensor, gold_sets: dict[int, list[int]]
) -> torch.Tensor | None:
    """Per-field mean CE over that field's gold labels, then mean across fields."""
    if not gold_sets:
        return None
    field_losses = []
    for i in sorted(gold_sets):
        golds = gold_sets[i]
        log_probs = torch.log_softmax(logits[i], dim=-1)
        field_losses.append(torch.stack([-log_probs[g] for g in golds]).mean())
    return torch.stack(field_losses).mean()


def compute_losses(
    outputs: KdfOutputs, example: LabeledExample, vocabs: LabelVocabs
) -> dict[str, torch.Tensor]:
    """D.4 multi-task losses for the tasks this example labels."""
    losses: dict[str, torch.Tensor] = {}

    msr_targets = {i: 1.0 if label == MSR else 0.0 for i, label in example.msr_dim.items()}
    loss = _binary_loss(outputs.msr_dim, msr_targets)
    if loss is not None:
        losses[Task.MSR_DIM.value] = loss

    for task, labeled in (
        (Task.NATURAL_KEY, example.natural_key),
        (Task.COMMON_BREAKDOWN, example.common_breakdown),
        (Task.COMMON_MEASURE, example.common_measure),
    ):
        loss = _binary_loss(
            outputs.logits_for(task), {i: 1.0 if v else 0.0 for i, v in labeled.items()}
        )
        if loss is not None:
            losses[task.value] = loss

    if example.msr_pairs and len(outputs.pair_indices):
        positions = {pair: pos for pos, pair in enumerate(outputs.pair_indices)}
        idx, target = [], []
        for pair, positive in example.msr_pairs:
            if pair in positions:
                idx.append(positions[pair])
                target.append(1.0 if positive else 0.0)
        if idx:
            losses[Task.MSR_PAIR.value] = nn.functional.binary_cross_entropy_with_logits(
                outputs.pair_logits[idx],
                torch.tensor(target, dtype=outputs.pair_logits.dtype),
            )

    if example.msr_type:
        index = {name: i for i, name in enumerate(vocabs.msr_type)}
        try:
            golds = {i: [index[name]] for i, name in example.msr_type.items()}
        except KeyError as exc:
            raise MissingVocabulary(f"measure type not in vocabulary: {exc}") from exc
        losses[Task.MSR_TYPE.value] = _averaged_multilabel_ce(outputs.msr_type, golds)

    if example.dim_type:
        index = {name: i for i, name in enumerate(vocabs.dim_type)}
        try:
            golds = {i: [index[name]] for i, name in example.dim_type.items()}
        except KeyError as exc:
            raise MissingVocabulary(f"dimension type not in vocabulary: {exc}") from exc
        losses[Task.DIM_TYPE.value] = _averaged_multilabel_ce(outputs.dim_type, golds)

    if example.agg_scores:
        index = {name: i for i, name in enumerate(vocabs.agg)}
        golds = {}
        for i, scores in example.agg_scores.items():
            positive = [index[fn] for fn, score in scores.items() if score == 1 and fn in index]
            if positive:
                golds[i] = positive
        loss = _averaged_multilabel_ce(outputs.agg, golds)
        if loss is not None:
            losses[Task.AGG.value] = loss

    if losses:
        total = torch.stack(list(losses.values())).sum()
        if not torch.isfinite(total):
            detail = {k: float(v.detach()) for k, v in losses.items()}
            raise NonFiniteLoss(f"non-finite loss: {detail}")
        losses["total"] = total
    return losses
