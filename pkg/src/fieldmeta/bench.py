"""Benchmark runner: rules vs forest vs neural model on a labeled dataset.

Learned models are fitted on the train split only; evaluation runs on the
test split, guarded by a schema-fingerprint leakage check. The report has a
deterministic results section (accuracy / HR@1 per model and task, deltas vs
a reference model) and a separate informational runtimes section, so report
regeneration stays byte-identical.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from fieldmeta.errors import EmptyEvaluation, SplitLeakage
from fieldmeta.forest import (
    Forest,
    ForestConfig,
    encode_features,
    positive_score,
    predict as forest_predict,
    predict_proba,
    train_forest,
)
from fieldmeta.kdf.config import KdfConfig
from fieldmeta.kdf.train import Dataset, train as train_kdf
from fieldmeta.labels import LabeledExample
from fieldmeta.metrics import accuracy, hit_rate_detail
from fieldmeta.rules import run_all_rules
from fieldmeta.stats import extract_categories, extract_statistics
from fieldmeta.table import Table
from fieldmeta.tasks import ALL_TASKS, MSR, ROLE_TASKS, Task
from fieldmeta.taxonomy import TaxonomyRegistry, default_registry

logger = logging.getLogger(__name__)

METRIC_FOR_TASK = {
    Task.MSR_DIM: "Accuracy",
    Task.NATURAL_KEY: "HR@1",
    Task.COMMON_BREAKDOWN: "HR@1",
    Task.COMMON_MEASURE: "HR@1",
    Task.DIM_TYPE: "Accuracy",
    Task.MSR_TYPE: "Accuracy",
    Task.MSR_PAIR: "Accuracy",
    Task.AGG: "Accuracy",
}


class RulePredictor:
    """Adapter exposing the rule baselines through the shared predictor surface."""

    name = "rules"
    trainable = False

    def __init__(self, registry: TaxonomyRegistry | None = None):
        self.registry = registry or default_registry()

    def fit(self, dataset: Dataset, seed: int = 0) -> None:
        pass

    def _bundle(self, table: Table):
        return run_all_rules(table, self.registry)

    def predict_msr_dim(self, table: Table) -> dict[int, str]:
        return dict(self._bundle(table).msr_dim.per_field)

    def role_scores(self, table: Table) -> dict[Task, dict[int, float]]:
        bundle = self._bundle(table)
        out: dict[Task, dict[int, float]] = {}
        for task, pred in (
            (Task.NATURAL_KEY, bundle.natural_key),
            (Task.COMMON_BREAKDOWN, bundle.common_breakdown),
            (Task.COMMON_MEASURE, bundle.common_measure),
        ):
            positive = {i for i, _ in pred.per_field}
            out[task] = {
                f.index: 1.0 if f.index in positive else 0.0 for f in table.fields
            }
        return out

    def predict_msr_type(self, table: Table) -> dict[int, str]:
        return dict(self._bundle(table).msr_type.per_field)

    def predict_dim_type(self, table: Table) -> dict[int, str]:
        return dict(self._bundle(table).dim_type.per_field)

    def pair_scores(self, table: Table) -> dict[tuple[int, int], float]:
        return {
            pair: 1.0 if positive else 0.0
            for pair, positive in self._bundle(table).msr_pair.per_pair
        }

    def agg_ranking(self, table: Table) -> dict[int, list[tuple[str, float]]]:
        out: dict[int, list[tuple[str, float]]] = {}
        for i, ranking in self._bundle(table).agg.per_field:
            out[i] = [
                (fn, 1.0 if pos == 0 else 0.0) for pos, fn in enumerate(ranking)
            ]
        return out


class ForestPredictor:
    """Per-task forests over the 41-slot feature layout."""

    name = "forest"
    trainable = True

    def __init__(
        self,
        cfg: ForestConfig | None = None,
        registry: TaxonomyRegistry | None = None,
    ):
        self.cfg = cfg or ForestConfig(n_trees=30)
        self.registry = registry or default_registry()
        self.models: dict[Task, Forest] = {}
        self._feature_cache: dict[str, list[np.ndarray]] = {}

    def features(self, table: Table) -> list[np.ndarray]:
        if table.id not in self._feature_cache:
            self._feature_cache[table.id] = [
                encode_features(extract_statistics(f), extract_categories(f))
                for f in table.fields
            ]
        return self._feature_cache[table.id]

    def fit(self, dataset: Dataset, seed: int = 0) -> None:
        rows: dict[Task, tuple[list[np.ndarray], list[str]]] = {
            task: ([], []) for task in ALL_TASKS
        }
        for table, example in dataset:
            feats = self.features(table)
            for i, label in example.msr_dim.items():
                rows[Task.MSR_DIM][0].append(feats[i])
                rows[Task.MSR_DIM][1].append("1" if label == MSR else "0")
            for task, labeled in (
                (Task.NATURAL_KEY, example.natural_key),
                (Task.COMMON_BREAKDOWN, example.common_breakdown),
                (Task.COMMON_MEASURE, example.common_measure),
            ):
                for i, positive in labeled.items():
                    rows[task][0].append(feats[i])
                    rows[task][1].append("1" if positive else "0")
            for (a, b), positive in example.msr_pairs:
                rows[Task.MSR_PAIR][0].append(np.concatenate([feats[a], feats[b]]))
                rows[Task.MSR_PAIR][1].append("1" if positive else "0")
            for i, name in example.msr_type.items():
                rows[Task.MSR_TYPE][0].append(feats[i])
                rows[Task.MSR_TYPE][1].append(name)
            for i, name in example.dim_type.items():
                rows[Task.DIM_TYPE][0].append(feats[i])
                rows[Task.DIM_TYPE][1].append(name)
            for i, scores in example.agg_scores.items():
                for fn, score in scores.items():
                    if score == 1:
                        rows[Task.AGG][0].append(feats[i])
                        rows[Task.AGG][1].append(fn)
        self.models = {}
        for task, (X, y) in rows.items():
            if len(y) >= 2:
                cfg = ForestConfig(**{**self.cfg.to_json_dict(), "seed": self.cfg.seed + seed})
                self.models[task] = train_forest(np.stack(X), y, cfg)
            else:
                logger.warning("forest: no training data for %s", task.value)

    def _score(self, task: Task, x: np.ndarray, default: float = 0.5) -> float:
        model = self.models.get(task)
        if model is None:
            return default
        return positive_score(model, x)

    def predict_msr_dim(self, table: Table) -> dict[int, str]:
        feats = self.features(table)
        return {
            f.index: MSR if self._score(Task.MSR_DIM, feats[f.index]) > 0.5 else "DIM"
            for f in table.fields
        }

    def role_scores(self, table: Table) -> dict[Task, dict[int, float]]:
        feats = self.features(table)
        return {
            task: {f.index: self._score(task, feats[f.index]) for f in table.fields}
            for task in ROLE_TASKS
        }

    def _classify(self, task: Task, table: Table, fallback: str) -> dict[int, str]:
        feats = self.features(table)
        model = self.models.get(task)
        if model is None:
            return {f.index: fallback for f in table.fields}
        return {f.index: forest_predict(model, feats[f.index]) for f in table.fields}

    def predict_msr_type(self, table: Table) -> dict[int, str]:
        return self._classify(Task.MSR_TYPE, table, "Others")

    def predict_dim_type(self, table: Table) -> dict[int, str]:
        fallback = self.registry.dimension_type_names()[0]
        return self._classify(Task.DIM_TYPE, table, fallback)

    def pair_scores(self, table: Table) -> dict[tuple[int, int], float]:
        feats = self.features(table)
        numeric = [f.index for f in table.fields]
        out = {}
        for pos, a in enumerate(numeric):
            for b in numeric[pos + 1 :]:
                out[(a, b)] = self._score(
                    Task.MSR_PAIR, np.concatenate([feats[a], feats[b]])
                )
        return out

    def agg_ranking(self, table: Table) -> dict[int, list[tuple[str, float]]]:
        feats = self.features(table)
        model = self.models.get(Task.AGG)
        out: dict[int, list[tuple[str, float]]] = {}
        for f in table.fields:
            if model is None:
                ranked = [(fn, 0.0) for fn in self.registry.agg_functions]
            else:
                proba = predict_proba(model, feats[f.index])
                ranked = sorted(
                    zip(model.classes, (float(p) for p in proba)),
                    key=lambda item: (-item[1], item[0]),
                )
            out[f.index] = ranked
        return out


class KdfBench:
    """Trains the neural model on fit() and delegates prediction."""

    name = "kdf"
    trainable = True

    def __init__(
        self,
        cfg: KdfConfig | None = None,
        registry: TaxonomyRegistry | None = None,
    ):
        self.cfg = cfg or KdfConfig()
        self.registry = registry or default_registry()
        self._predictor = None

    def fit(self, dataset: Dataset, seed: int = 0) -> None:
        cfg_doc = self.cfg.to_json_dict()
        cfg_doc["training"]["seed"] = self.cfg.training.seed + seed
        result = train_kdf(dataset, KdfConfig.from_json_dict(cfg_doc), self.registry)
        self._predictor = result.predictor()

    def __getattr__(self, name):
        if self._predictor is None:
            raise EmptyEvaluation("kdf model not fitted")
        return getattr(self._predictor, name)


@dataclass(frozen=True)
class BenchConfig:
    tasks: tuple[Task, ...] = ALL_TASKS
    reference: str | None = None  # default: "kdf" when present, else first model
    runs: int = 1
    seed: int = 0
    hr_k: int = 1


@dataclass
class BenchReport:
    results: list[dict]
    reference: str
    runtimes: dict[str, float] = dc_field(default_factory=dict)

    def results_json(self) -> str:
        """Deterministic section only; byte-identical across regenerations."""
        return json.dumps(
            {"reference": self.reference, "results": self.results},
            sort_keys=True,
            separators=(",", ":"),
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "reference": self.reference,
                "results": self.results,
                "runtimes": {k: round(v, 3) for k, v in self.runtimes.items()},
            },
            sort_keys=True,
            indent=2,
        )

    def cell(self, model: str, task: Task) -> dict | None:
        for row in self.results:
            if row["model"] == model and row["task"] == task.value:
                return row
        return None

    def to_markdown(self) -> str:
        models = sorted({row["model"] for row in self.results})
        tasks = []
        for row in self.results:
            if row["task"] not in tasks:
                tasks.append(row["task"])
        header = ["Model"]
        for task in tasks:
            metric = next(
                row["metric"] for row in self.results if row["task"] == task
            )
            header.extend([f"{task} {metric}", "Δ"])
        lines = [
            "| " + " | ".join(header) + " |",
            "|" + "---|" * len(header),
        ]
        for model in models:
            cells = [model]
            for task in tasks:
                row = next(
                    (
                        r
                        for r in self.results
                        if r["model"] == model and r["task"] == task
                    ),
                    None,
                )
                if row is None:
                    cells.extend(["-", "-"])
                else:
                    cells.append(f"{100 * row['value']:.2f}")
                    cells.append(f"{100 * row['delta']:+.2f}")
            lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def check_split_leakage(dataset: Dataset) -> None:
    train_fps = {e.fingerprint for _, e in dataset if e.split == "train"}
    test_fps = {e.fingerprint for _, e in dataset if e.split == "test"}
    leaked = train_fps & test_fps
    if leaked:
        raise SplitLeakage(
            f"{len(leaked)} schema fingerprint(s) occur in both train and test"
        )


def _evaluate_model(model, test: Dataset, tasks, hr_k: int) -> dict[Task, tuple[float, int]]:
    out: dict[Task, tuple[float, int]] = {}

    if Task.MSR_DIM in tasks:
        preds, golds = [], []
        for table, example in test:
            predicted = model.predict_msr_dim(table)
            for i, gold in example.msr_dim.items():
                preds.append(predicted.get(i))
                golds.append(gold)
        if golds:
            out[Task.MSR_DIM] = (accuracy(preds, golds), len(golds))

    role_tasks = [t for t in ROLE_TASKS if t in tasks]
    if role_tasks:
        rankings = {t: [] for t in role_tasks}
        positives = {t: [] for t in role_tasks}
        for table, example in test:
            scores = model.role_scores(table)
            for task in role_tasks:
                ranked = sorted(scores[task], key=lambda i: (-scores[task][i], i))
                rankings[task].append(ranked)
                labeled = getattr(example, task.value)
                positives[task].append({i for i, v in labeled.items() if v})
        for task in role_tasks:
            if any(positives[task]):
                value, used, _ = hit_rate_detail(rankings[task], positives[task], hr_k)
                out[task] = (value, used)

    for task, method in ((Task.MSR_TYPE, "predict_msr_type"), (Task.DIM_TYPE, "predict_dim_type")):
        if task not in tasks:
            continue
        preds, golds = [], []
        for table, example in test:
            predicted = getattr(model, method)(table)
            for i, gold in getattr(example, task.value).items():
                preds.append(predicted.get(i))
                golds.append(gold)
        if golds:
            out[task] = (accuracy(preds, golds), len(golds))

    if Task.MSR_PAIR in tasks:
        preds, golds = [], []
        for table, example in test:
            scored = model.pair_scores(table)
            for pair, positive in example.msr_pairs:
                preds.append(scored.get(pair, 0.0) >= 0.5)
                golds.append(positive)
        if golds:
            out[Task.MSR_PAIR] = (accuracy(preds, golds), len(golds))

    if Task.AGG in tasks:
        hits, n = 0, 0
        for table, example in test:
            rankings = model.agg_ranking(table)
            for i, scores in example.agg_scores.items():
                gold = {fn for fn, score in scores.items() if score == 1}
                if not gold:
                    continue
                n += 1
                ranking = rankings.get(i, [])
                if ranking and ranking[0][0] in gold:
                    hits += 1
        if n:
            out[Task.AGG] = (hits / n, n)

    return out


def run_benchmark(
    dataset: Dataset,
    models: dict[str, object],
    cfg: BenchConfig | None = None,
) -> BenchReport:
    """Fit trainable models on train, evaluate everything on test, emit the report."""
    cfg = cfg or BenchConfig()
    check_split_leakage(dataset)
    train_split = [(t, e) for t, e in dataset if e.split == "train"]
    test_split = [(t, e) for t, e in dataset if e.split == "test"]
    if not test_split:
        raise EmptyEvaluation("no test split")

    reference = cfg.reference or ("kdf" if "kdf" in models else next(iter(models)))
    if reference not in models:
        raise EmptyEvaluation(f"reference model {reference!r} not among models")

    per_run: dict[str, list[dict[Task, tuple[float, int]]]] = {m: [] for m in models}
    runtimes: dict[str, float] = {m: 0.0 for m in models}
    for run in range(cfg.runs):
        for name, model in models.items():
            started = time.perf_counter()
            if getattr(model, "trainable", False):
                model.fit(dataset if name == "kdf" else train_split, seed=cfg.seed + run)
            per_run[name].append(_evaluate_model(model, test_split, cfg.tasks, cfg.hr_k))
            runtimes[name] += time.perf_counter() - started

    results = []
    reference_values: dict[Task, float] = {}
    for task in cfg.tasks:
        values = [r.get(task) for r in per_run[reference]]
        if all(v is not None for v in values) and values:
            reference_values[task] = float(np.mean([v[0] for v in values]))
    for name in models:
        for task in cfg.tasks:
            cells = [r.get(task) for r in per_run[name]]
            if not cells or any(c is None for c in cells):
                continue
            value = float(np.mean([c[0] for c in cells]))
            results.append(
                {
                    "model": name,
                    "task": task.value,
                    "metric": METRIC_FOR_TASK[task],
                    "value": round(value, 6),
                    "n_samples": cells[0][1],
                    "delta": round(value - reference_values.get(task, value), 6),
                }
            )
    return BenchReport(results=results, reference=reference, runtimes=runtimes)
