"""Supervision labels derived from analysis artifacts, plus dedup and splits.

Chart artifacts yield measure/dimension labels, common-measure positives,
natural-key positives, and same-axis measure pairs. Pivot artifacts yield
value-field measures with one-hot aggregation scores and breakdown labels.
Curated type annotations (property IRIs, dimension types, key fields) arrive
as a sidecar rather than dataset-specific parsers.

Dedup groups tables by schema fingerprint, caps each group per source, and
assigns whole schema groups to train/valid/test so no fingerprint leaks
across splits.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field as dc_field
from enum import Enum

from fieldmeta.errors import IndexOutOfRange, MalformedInput, UnknownAggFunction
from fieldmeta.table import Table, cardinality_ratio, is_numeric_field, schema_fingerprint
from fieldmeta.tasks import DIM, MSR
from fieldmeta.taxonomy import TaxonomyRegistry, default_registry

DEFAULT_THRESHOLDS = {"chart": 11, "pivot": 2, "other": 1}
DEFAULT_RATIOS = (7, 1, 2)

SPLITS = ("train", "valid", "test")


class ChartType(Enum):
    LINE = "line"
    BAR = "bar"
    SCATTER = "scatter"
    PIE = "pie"
    OTHER = "other"


# x-axis fields of these chart types display continuous values, not categories,
# so they carry no dimension supervision
_UNLABELED_X = (ChartType.SCATTER, ChartType.LINE)


@dataclass(frozen=True)
class ChartArtifact:
    table_id: str
    chart_type: ChartType
    x_fields: tuple[int, ...]
    y_fields: tuple[tuple[int, ...], ...]  # one group per axis

    def __post_init__(self) -> None:
        if not self.y_fields or not any(self.y_fields):
            raise MalformedInput(f"chart on {self.table_id} has no y fields")


@dataclass(frozen=True)
class PivotArtifact:
    table_id: str
    row_fields: tuple[int, ...]
    column_fields: tuple[int, ...]
    value_fields: tuple[tuple[int, str], ...]  # (field index, agg function)

    def __post_init__(self) -> None:
        if not self.value_fields:
            raise MalformedInput(f"pivot on {self.table_id} has no value fields")


@dataclass(frozen=True)
class TypeAnnotation:
    """Curated sidecar labels: measure properties, dimension types, key fields."""

    table_id: str
    msr_properties: dict[int, str] = dc_field(default_factory=dict)
    dim_types: dict[int, str] = dc_field(default_factory=dict)
    key_fields: tuple[int, ...] = ()


Artifact = ChartArtifact | PivotArtifact | TypeAnnotation


@dataclass
class LabeledExample:
    table_id: str
    source: str = "other"  # chart | pivot | other, keyed into dedup thresholds
    fingerprint: str = ""
    msr_dim: dict[int, str] = dc_field(default_factory=dict)
    natural_key: dict[int, bool] = dc_field(default_factory=dict)
    common_breakdown: dict[int, bool] = dc_field(default_factory=dict)
    common_measure: dict[int, bool] = dc_field(default_factory=dict)
    msr_pairs: list[tuple[tuple[int, int], bool]] = dc_field(default_factory=list)
    agg_scores: dict[int, dict[str, int]] = dc_field(default_factory=dict)
    msr_type: dict[int, str] = dc_field(default_factory=dict)
    dim_type: dict[int, str] = dc_field(default_factory=dict)
    split: str | None = None
    conflicts: list[str] = dc_field(default_factory=list)
    warnings: list[str] = dc_field(default_factory=list)

    def pair_positives(self) -> list[tuple[int, int]]:
        return [pair for pair, positive in self.msr_pairs if positive]


def _check_indices(table: Table, indices, artifact: str) -> None:
    for i in indices:
        if not 0 <= i < len(table.fields):
            raise IndexOutOfRange(f"{artifact} references field {i} of {table.id}")


def _set_msr_dim(example: LabeledExample, index: int, label: str) -> None:
    current = example.msr_dim.get(index)
    if current is not None and current != label:
        example.conflicts.append(f"field {index}: {current} vs {label}")
        del example.msr_dim[index]
        return
    example.msr_dim[index] = label


def derive_from_chart(table: Table, chart: ChartArtifact) -> LabeledExample:
    """Partial labels from one chart (y -> measures, x -> dimensions, axis pairs)."""
    _check_indices(table, chart.x_fields, "chart")
    _check_indices(table, [i for axis in chart.y_fields for i in axis], "chart")
    example = LabeledExample(table_id=table.id, source="chart")

    y_flat = {i for axis in chart.y_fields for i in axis}
    for i in sorted(y_flat):
        _set_msr_dim(example, i, MSR)
        example.common_measure[i] = True

    labeled_dims: list[int] = []
    if chart.chart_type not in _UNLABELED_X:
        for i in chart.x_fields:
            _set_msr_dim(example, i, DIM)
            if example.msr_dim.get(i) == DIM:
                labeled_dims.append(i)

    # natural key: the single labeled dimension, and only if all-unique
    if len(labeled_dims) == 1 and cardinality_ratio(table.fields[labeled_dims[0]]) == 1.0:
        key = labeled_dims[0]
        example.natural_key[key] = True
        for f in table.fields:
            if f.index != key:
                example.natural_key[f.index] = False

    for axis in chart.y_fields:
        for a_pos, a in enumerate(axis):
            for b in axis[a_pos + 1 :]:
                i, j = min(a, b), max(a, b)
                if i == j:
                    continue
                if not (is_numeric_field(table.fields[i]) and is_numeric_field(table.fields[j])):
                    example.warnings.append(f"non-numeric axis pair ({i},{j}) skipped")
                    continue
                if (( i, j), True) not in example.msr_pairs:
                    example.msr_pairs.append(((i, j), True))

    for f in table.fields:
        if f.index not in y_flat:
            example.common_measure[f.index] = False
    return example


def derive_from_pivot(
    table: Table, pivot: PivotArtifact, registry: TaxonomyRegistry | None = None
) -> LabeledExample:
    """Partial labels from one pivot (values -> measures + agg, rows/cols -> dims)."""
    registry = registry or default_registry()
    _check_indices(table, pivot.row_fields, "pivot")
    _check_indices(table, pivot.column_fields, "pivot")
    _check_indices(table, [i for i, _ in pivot.value_fields], "pivot")
    example = LabeledExample(table_id=table.id, source="pivot")

    value_indices = set()
    for i, fn in pivot.value_fields:
        fn = fn.upper()
        if fn not in registry.agg_functions:
            raise UnknownAggFunction(f"{fn} not in aggregation vocabulary")
        value_indices.add(i)
        _set_msr_dim(example, i, MSR)
        example.common_measure[i] = True
        scores = example.agg_scores.setdefault(
            i, {name: 0 for name in registry.agg_functions}
        )
        scores[fn] = 1

    breakdown_pos = set()
    for i in tuple(pivot.row_fields) + tuple(pivot.column_fields):
        _set_msr_dim(example, i, DIM)
        if cardinality_ratio(table.fields[i]) < 1.0:
            breakdown_pos.add(i)
            example.common_breakdown[i] = True

    # everything that is not a positive sample is a negative, table-wide
    for f in table.fields:
        if f.index not in breakdown_pos:
            example.common_breakdown[f.index] = False
        if f.index not in value_indices:
            example.common_measure[f.index] = False
    return example


def derive_from_types(
    table: Table, annotation: TypeAnnotation, registry: TaxonomyRegistry | None = None
) -> LabeledExample:
    """Partial labels from a curated sidecar (property IRIs, dim types, keys)."""
    registry = registry or default_registry()
    _check_indices(table, annotation.msr_properties, "annotation")
    _check_indices(table, annotation.dim_types, "annotation")
    _check_indices(table, annotation.key_fields, "annotation")
    example = LabeledExample(table_id=table.id, source="other")
    for i, iri in annotation.msr_properties.items():
        _set_msr_dim(example, i, MSR)
        example.msr_type[i] = registry.map_property_to_measure_type(iri).name
    for i, name in annotation.dim_types.items():
        example.dim_type[i] = name
    for i in annotation.key_fields:
        _set_msr_dim(example, i, DIM)
        example.natural_key[i] = True
    return example


def sample_pair_negatives(
    table: Table, positives: list[tuple[int, int]], seed: int
) -> list[tuple[int, int]]:
    """Sample |positives| numeric-field pairs disjoint from positives, without replacement."""
    numeric = [f.index for f in table.fields if is_numeric_field(f)]
    positive_set = {(min(a, b), max(a, b)) for a, b in positives}
    pool = [
        (a, b)
        for pos, a in enumerate(numeric)
        for b in numeric[pos + 1 :]
        if (a, b) not in positive_set
    ]
    rng = random.Random(seed)
    count = min(len(positives), len(pool))
    return sorted(rng.sample(pool, count))


def merge_examples(parts: list[LabeledExample]) -> LabeledExample:
    """Combine artifact-level labels for one table; cross-artifact disagreements recorded."""
    if not parts:
        raise MalformedInput("nothing to merge")
    merged = LabeledExample(
        table_id=parts[0].table_id,
        source=parts[0].source,
    )
    for part in parts:
        if part.table_id != merged.table_id:
            raise MalformedInput("merge across different tables")
        for i, label in part.msr_dim.items():
            _set_msr_dim(merged, i, label)
        for attr in ("natural_key", "common_breakdown", "common_measure"):
            target = getattr(merged, attr)
            for i, positive in getattr(part, attr).items():
                target[i] = target.get(i, False) or positive
        for pair, positive in part.msr_pairs:
            existing = dict(merged.msr_pairs)
            if pair in existing:
                if existing[pair] != positive:
                    existing[pair] = True  # positive evidence wins
                    merged.msr_pairs = sorted(existing.items())
            else:
                merged.msr_pairs.append((pair, positive))
        for i, scores in part.agg_scores.items():
            target_scores = merged.agg_scores.setdefault(i, dict(scores))
            for fn, score in scores.items():
                target_scores[fn] = max(target_scores.get(fn, 0), score)
        for attr in ("msr_type", "dim_type"):
            target = getattr(merged, attr)
            for i, name in getattr(part, attr).items():
                if i in target and target[i] != name:
                    merged.conflicts.append(f"{attr}[{i}]: {target[i]} vs {name}")
                else:
                    target[i] = name
        merged.conflicts.extend(part.conflicts)
        merged.warnings.extend(part.warnings)
    merged.msr_pairs.sort()
    return merged


def derive_labels(
    table: Table,
    artifacts: list[Artifact],
    registry: TaxonomyRegistry | None = None,
    seed: int = 0,
) -> LabeledExample:
    """Full pipeline for one table: derive per artifact, merge, sample pair negatives."""
    registry = registry or default_registry()
    parts = []
    sources = set()
    for artifact in artifacts:
        if isinstance(artifact, ChartArtifact):
            parts.append(derive_from_chart(table, artifact))
            sources.add("chart")
        elif isinstance(artifact, PivotArtifact):
            parts.append(derive_from_pivot(table, artifact, registry))
            sources.add("pivot")
        else:
            parts.append(derive_from_types(table, artifact, registry))
            sources.add("other")
    merged = merge_examples(parts)
    merged.source = (
        "chart" if "chart" in sources else "pivot" if "pivot" in sources else "other"
    )
    merged.fingerprint = schema_fingerprint(table).hex

    positives = merged.pair_positives()
    if positives:
        negatives = sample_pair_negatives(table, positives, seed)
        if len(negatives) < len(positives):
            merged.warnings.append(
                f"pair negative pool exhausted: {len(negatives)} < {len(positives)}"
            )
        merged.msr_pairs.extend((pair, False) for pair in negatives)
        merged.msr_pairs.sort()
    return merged


@dataclass(frozen=True)
class SplitResult:
    examples: list[LabeledExample]
    manifest: dict


def dedup_downsample_split(
    examples: list[LabeledExample],
    thresholds: dict[str, int] | None = None,
    ratios: tuple[int, int, int] = DEFAULT_RATIOS,
    seed: int = 0,
) -> SplitResult:
    """Cap duplicate schemas per source, then assign whole schema groups 7:1:2."""
    thresholds = dict(DEFAULT_THRESHOLDS if thresholds is None else thresholds)
    for example in examples:
        if not example.fingerprint:
            raise MalformedInput(f"{example.table_id} has no schema fingerprint")

    groups: dict[str, list[LabeledExample]] = {}
    for example in examples:
        groups.setdefault(example.fingerprint, []).append(example)

    rng = random.Random(seed)
    kept: list[LabeledExample] = []
    for fingerprint in sorted(groups):
        by_source: dict[str, list[LabeledExample]] = {}
        for example in sorted(groups[fingerprint], key=lambda e: e.table_id):
            by_source.setdefault(example.source, []).append(example)
        for source in sorted(by_source):
            bucket = by_source[source]
            cap = thresholds.get(source, 1)
            if len(bucket) > cap:
                bucket = sorted(rng.sample(bucket, cap), key=lambda e: e.table_id)
            kept.extend(bucket)

    fingerprints = sorted({e.fingerprint for e in kept})
    rng.shuffle(fingerprints)
    total = sum(ratios)
    n = len(fingerprints)
    n_valid = n * ratios[1] // total
    n_test = n * ratios[2] // total
    n_train = n - n_valid - n_test
    assignment: dict[str, str] = {}
    for pos, fingerprint in enumerate(fingerprints):
        if pos < n_train:
            assignment[fingerprint] = "train"
        elif pos < n_train + n_valid:
            assignment[fingerprint] = "valid"
        else:
            assignment[fingerprint] = "test"

    for example in kept:
        example.split = assignment[example.fingerprint]
    manifest = {
        "seed": seed,
        "thresholds": thresholds,
        "ratios": list(ratios),
        "splits": assignment,
    }
    return SplitResult(examples=kept, manifest=manifest)


# --- JSON lines serialization -------------------------------------------------

def artifact_from_json(doc: dict) -> Artifact:
    try:
        kind = doc["kind"]
        if kind == "chart":
            return ChartArtifact(
                table_id=doc["table_id"],
                chart_type=ChartType(doc["chart_type"]),
                x_fields=tuple(doc.get("x_fields", [])),
                y_fields=tuple(tuple(axis) for axis in doc["y_fields"]),
            )
        if kind == "pivot":
            return PivotArtifact(
                table_id=doc["table_id"],
                row_fields=tuple(doc.get("row_fields", [])),
                column_fields=tuple(doc.get("column_fields", [])),
                value_fields=tuple((int(i), fn) for i, fn in doc["value_fields"]),
            )
        if kind == "types":
            return TypeAnnotation(
                table_id=doc["table_id"],
                msr_properties={int(k): v for k, v in doc.get("msr_properties", {}).items()},
                dim_types={int(k): v for k, v in doc.get("dim_types", {}).items()},
                key_fields=tuple(doc.get("key_fields", [])),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad artifact document: {exc}") from exc
    raise MalformedInput(f"unknown artifact kind: {doc.get('kind')!r}")


def example_to_json(example: LabeledExample) -> dict:
    return {
        "table_id": example.table_id,
        "source": example.source,
        "fingerprint": example.fingerprint,
        "msr_dim": {str(k): v for k, v in sorted(example.msr_dim.items())},
        "natural_key": {str(k): v for k, v in sorted(example.natural_key.items())},
        "common_breakdown": {str(k): v for k, v in sorted(example.common_breakdown.items())},
        "common_measure": {str(k): v for k, v in sorted(example.common_measure.items())},
        "msr_pairs": [[list(pair), positive] for pair, positive in example.msr_pairs],
        "agg_scores": {str(k): v for k, v in sorted(example.agg_scores.items())},
        "msr_type": {str(k): v for k, v in sorted(example.msr_type.items())},
        "dim_type": {str(k): v for k, v in sorted(example.dim_type.items())},
        "split": example.split,
        "conflicts": example.conflicts,
        "warnings": example.warnings,
    }


def example_from_json(doc: dict) -> LabeledExample:
    try:
        return LabeledExample(
            table_id=doc["table_id"],
            source=doc.get("source", "other"),
            fingerprint=doc.get("fingerprint", ""),
            msr_dim={int(k): v for k, v in doc.get("msr_dim", {}).items()},
            natural_key={int(k): v for k, v in doc.get("natural_key", {}).items()},
            common_breakdown={int(k): v for k, v in doc.get("common_breakdown", {}).items()},
            common_measure={int(k): v for k, v in doc.get("common_measure", {}).items()},
            msr_pairs=[((pair[0], pair[1]), positive) for pair, positive in doc.get("msr_pairs", [])],
            agg_scores={int(k): dict(v) for k, v in doc.get("agg_scores", {}).items()},
            msr_type={int(k): v for k, v in doc.get("msr_type", {}).items()},
            dim_type={int(k): v for k, v in doc.get("dim_type", {}).items()},
            split=doc.get("split"),
            conflicts=list(doc.get("conflicts", [])),
            warnings=list(doc.get("warnings", [])),
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise MalformedInput(f"bad example document: {exc}") from exc


def write_examples_jsonl(examples: list[LabeledExample]) -> str:
    return "\n".join(json.dumps(example_to_json(e), ensure_ascii=False) for e in examples)


def read_examples_jsonl(text: str) -> list[LabeledExample]:
    out = []
    for line in text.splitlines():
        if line.strip():
            out.append(example_from_json(json.loads(line)))
    return out
