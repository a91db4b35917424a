"""Training loop, per-epoch validation, checkpoints, and the trained predictor."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
import torch

from fieldmeta.errors import CheckpointMismatch, MalformedInput
from fieldmeta.kdf.config import KdfConfig
from fieldmeta.kdf.embedder import EntityStore, HashTokenEmbedder
from fieldmeta.kdf.model import (
    KdfModel,
    KdfOutputs,
    LabelVocabs,
    TableInputs,
    compute_losses,
    prepare_inputs,
)
from fieldmeta.labels import LabeledExample
from fieldmeta.metrics import accuracy, hit_rate_detail
from fieldmeta.table import Table
from fieldmeta.tasks import DIM, MSR, ROLE_TASKS, Task
from fieldmeta.taxonomy import TaxonomyRegistry, default_registry

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = "kdf.v1"

Dataset = list[tuple[Table, LabeledExample]]


@dataclass
class TrainResult:
    model: KdfModel
    cfg: KdfConfig
    vocabs: LabelVocabs
    history: list[dict]
    embedder: HashTokenEmbedder
    entity_store: EntityStore

    def best_epochs(self) -> dict[str, int]:
        """Per-task epoch with the best validation metric (higher is better)."""
        best: dict[str, tuple[float, int]] = {}
        for entry in self.history:
            for task, value in entry.get("valid", {}).items():
                if value is None:
                    continue
                if task not in best or value > best[task][0]:
                    best[task] = (value, entry["epoch"])
        return {task: epoch for task, (_, epoch) in best.items()}

    def predictor(self) -> "KdfPredictor":
        return KdfPredictor(
            self.model, self.cfg, self.vocabs, self.embedder, self.entity_store
        )


def _batches(order: list[int], size: int):
    for start in range(0, len(order), size):
        yield order[start : start + size]


def train(
    dataset: Dataset,
    cfg: KdfConfig | None = None,
    registry: TaxonomyRegistry | None = None,
    entity_store: EntityStore | None = None,
    checkpoint_dir: str | Path | None = None,
) -> TrainResult:
    """AdamW over the summed task losses; per-epoch validation metrics recorded."""
    cfg = cfg or KdfConfig()
    registry = registry or default_registry()
    vocabs = LabelVocabs.from_registry(registry)

    train_split = [(t, e) for t, e in dataset if e.split in (None, "train")]
    valid_split = [(t, e) for t, e in dataset if e.split == "valid"]
    if not train_split:
        raise MalformedInput("empty train split")

    if entity_store is None:
        entity_store = EntityStore.synthetic(
            [t for t, _ in dataset], cfg.subtoken.d_ent, seed=cfg.training.seed
        )

    torch.manual_seed(cfg.training.seed)
    model = KdfModel(cfg, vocabs)
    embedder = HashTokenEmbedder(cfg.subtoken.d_tok, seed=cfg.training.seed)

    inputs_cache: dict[str, TableInputs] = {}

    def inputs_for(table: Table) -> TableInputs:
        if table.id not in inputs_cache:
            inputs_cache[table.id] = prepare_inputs(table, cfg, embedder, entity_store)
        return inputs_cache[table.id]

    optimizer = torch.optim.AdamW(
        model.parameters(), lr=cfg.training.lr, weight_decay=cfg.training.weight_decay
    )
    rng = random.Random(cfg.training.seed)
    history: list[dict] = []

    for epoch in range(1, cfg.training.epochs + 1):
        model.train()
        order = list(range(len(train_split)))
        rng.shuffle(order)
        epoch_loss = 0.0
        n_contributing = 0
        for batch in _batches(order, cfg.training.batch_size):
            optimizer.zero_grad()
            batch_losses = []
            for position in batch:
                table, example = train_split[position]
                outputs = model(inputs_for(table))
                losses = compute_losses(outputs, example, vocabs)
                if "total" in losses:
                    batch_losses.append(losses["total"])
            if not batch_losses:
                continue
            loss = torch.stack(batch_losses).mean()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(batch_losses)
            n_contributing += len(batch_losses)
        entry = {
            "epoch": epoch,
            "train_loss": epoch_loss / max(n_contributing, 1),
        }
        if valid_split:
            predictor = KdfPredictor(model, cfg, vocabs, embedder, entity_store)
            entry["valid"] = evaluate_split(predictor, valid_split)
        history.append(entry)
        logger.info("epoch %d train_loss=%.5f", epoch, entry["train_loss"])
        if checkpoint_dir is not None:
            save_checkpoint(
                Path(checkpoint_dir) / f"epoch{epoch:03d}.pt", model, epoch
            )

    return TrainResult(
        model=model,
        cfg=cfg,
        vocabs=vocabs,
        history=history,
        embedder=embedder,
        entity_store=entity_store,
    )


def evaluate_split(predictor: "KdfPredictor", split: Dataset) -> dict[str, float | None]:
    """Accuracy for classification tasks, HR@1 for role tasks, on one split."""
    msr_preds: list[str] = []
    msr_golds: list[str | None] = []
    rankings = {task: [] for task in ROLE_TASKS}
    positives = {task: [] for task in ROLE_TASKS}
    for table, example in split:
        predicted = predictor.predict_msr_dim(table)
        for i, gold in example.msr_dim.items():
            msr_preds.append(predicted.get(i))
            msr_golds.append(gold)
        scores = predictor.role_scores(table)
        for task, labeled in (
            (Task.NATURAL_KEY, example.natural_key),
            (Task.COMMON_BREAKDOWN, example.common_breakdown),
            (Task.COMMON_MEASURE, example.common_measure),
        ):
            ranked = sorted(scores[task], key=lambda i: (-scores[task][i], i))
            rankings[task].append(ranked)
            positives[task].append({i for i, v in labeled.items() if v})
    out: dict[str, float | None] = {}
    try:
        out[Task.MSR_DIM.value] = accuracy(msr_preds, msr_golds)
    except Exception:
        out[Task.MSR_DIM.value] = None
    for task in ROLE_TASKS:
        try:
            value, _, _ = hit_rate_detail(rankings[task], positives[task], k=1)
            out[task.value] = value
        except Exception:
            out[task.value] = None
    return out


class KdfPredictor:
    """Inference wrapper exposing all eight tasks for one trained model."""

    def __init__(
        self,
        model: KdfModel,
        cfg: KdfConfig,
        vocabs: LabelVocabs,
        embedder: HashTokenEmbedder,
        entity_store: EntityStore,
    ):
        self.model = model
        self.cfg = cfg
        self.vocabs = vocabs
        self.embedder = embedder
        self.entity_store = entity_store

    def outputs(self, table: Table) -> KdfOutputs:
        self.model.eval()
        with torch.no_grad():
            inputs = prepare_inputs(table, self.cfg, self.embedder, self.entity_store)
            return self.model(inputs)

    def predict_msr_dim(self, table: Table) -> dict[int, str]:
        out = self.outputs(table)
        return {
            i: MSR if float(out.msr_dim[i]) > 0.0 else DIM
            for i in range(len(table.fields))
        }

    def role_scores(self, table: Table) -> dict[Task, dict[int, float]]:
        out = self.outputs(table)
        return {
            task: {
                i: float(torch.sigmoid(out.logits_for(task)[i]))
                for i in range(len(table.fields))
            }
            for task in ROLE_TASKS
        }

    def predict_msr_type(self, table: Table) -> dict[int, str]:
        out = self.outputs(table)
        picks = out.msr_type.argmax(dim=-1)
        return {i: self.vocabs.msr_type[int(picks[i])] for i in range(len(table.fields))}

    def predict_dim_type(self, table: Table) -> dict[int, str]:
        out = self.outputs(table)
        picks = out.dim_type.argmax(dim=-1)
        return {i: self.vocabs.dim_type[int(picks[i])] for i in range(len(table.fields))}

    def pair_scores(self, table: Table) -> dict[tuple[int, int], float]:
        out = self.outputs(table)
        return {
            pair: float(torch.sigmoid(out.pair_logits[pos]))
            for pos, pair in enumerate(out.pair_indices)
        }

    def agg_ranking(self, table: Table) -> dict[int, list[tuple[str, float]]]:
        out = self.outputs(table)
        probs = torch.softmax(out.agg, dim=-1)
        ranking: dict[int, list[tuple[str, float]]] = {}
        for i in range(len(table.fields)):
            scored = [(fn, float(probs[i][j])) for j, fn in enumerate(self.vocabs.agg)]
            scored.sort(key=lambda item: (-item[1], self.vocabs.agg.index(item[0])))
            ranking[i] = scored
        return ranking

    def column_embeddings(self, table: Table) -> np.ndarray:
        out = self.outputs(table)
        return out.column_embeddings.detach().cpu().numpy().astype(np.float32)


def save_checkpoint(path: str | Path, model: KdfModel, epoch: int) -> None:
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "config": model.cfg.to_json_dict(),
            "vocabs": {
                "msr_type": list(model.vocabs.msr_type),
                "dim_type": list(model.vocabs.dim_type),
                "agg": list(model.vocabs.agg),
            },
            "epoch": epoch,
            "state_dict": model.state_dict(),
            "torch_rng_state": torch.get_rng_state(),
        },
        str(path),
    )


def load_checkpoint(path: str | Path) -> tuple[KdfModel, dict]:
    try:
        doc = torch.load(str(path), map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointMismatch(f"cannot read checkpoint: {exc}") from exc
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointMismatch(f"unsupported checkpoint version: {doc.get('version')!r}")
    cfg = KdfConfig.from_json_dict(doc["config"])
    vocabs = LabelVocabs(
        msr_type=tuple(doc["vocabs"]["msr_type"]),
        dim_type=tuple(doc["vocabs"]["dim_type"]),
        agg=tuple(doc["vocabs"]["agg"]),
    )
    model = KdfModel(cfg, vocabs)
    try:
        model.load_state_dict(doc["state_dict"])
    except RuntimeError as exc:
        raise CheckpointMismatch(f"checkpoint does not fit config: {exc}") from exc
    return model, doc


def predictor_from_checkpoint(
    path: str | Path, entity_store: EntityStore | None = None
) -> KdfPredictor:
    model, doc = load_checkpoint(path)
    cfg = KdfConfig.from_json_dict(doc["config"])
    if entity_store is None:
        entity_store = EntityStore.empty(cfg.subtoken.d_ent)
    embedder = HashTokenEmbedder(cfg.subtoken.d_tok, seed=cfg.training.seed)
    return KdfPredictor(model, cfg, model.vocabs, embedder, entity_store)
