"""Synthetic planted-rule corpus shared by training, benchmark, and acceptance tests.

Planted rules: purely numeric columns are measures; the dollar-prefixed value
column is the common measure, has Money type, and takes SUM; a repeated
category column is the common breakdown; a unique name column is the natural
key. Schemas are made distinct per table so dedup keeps everything and splits
are schema-pure.
"""

from __future__ import annotations

import random

from fieldmeta.labels import (
    ChartArtifact,
    ChartType,
    LabeledExample,
    PivotArtifact,
    TypeAnnotation,
    dedup_downsample_split,
    derive_labels,
)
from fieldmeta.table import Table
from fieldmeta.taxonomy import TaxonomyRegistry, default_registry
from tests.conftest import make_table

_CATEGORY_POOLS = (
    ("north", "south", "east", "west"),
    ("retail", "online", "wholesale"),
    ("gold", "silver", "bronze"),
    ("alpha", "beta", "gamma", "delta"),
)

_NAME_STEMS = ("unit", "item", "part", "case", "node", "batch")


def build_corpus(
    n_tables: int = 200,
    seed: int = 0,
    n_rows: int = 8,
    registry: TaxonomyRegistry | None = None,
) -> list[tuple[Table, LabeledExample]]:
    registry = registry or default_registry()
    rng = random.Random(seed)
    dataset: list[tuple[Table, LabeledExample]] = []
    for t in range(n_tables):
        stem = rng.choice(_NAME_STEMS)
        categories = rng.choice(_CATEGORY_POOLS)
        names = [f"{stem}-{t}-{r}" for r in range(n_rows)]
        cats = [rng.choice(categories) for _ in range(n_rows)]
        # value column carries the planted currency marker
        values = [f"${rng.randint(10, 9000)}" for _ in range(n_rows)]
        columns = {
            f"name_{t}": names,
            f"region_{t}": cats,
            f"revenue_{t}": values,
        }
        extra_numeric = rng.random() < 0.5
        if extra_numeric:
            columns[f"count_{t}"] = [str(rng.randint(0, 50)) for _ in range(n_rows)]
        table = make_table(columns, table_id=f"synth{t}")

        value_index = 2
        artifacts = [
            ChartArtifact(table.id, ChartType.BAR, (0,), ((value_index,),)),
            PivotArtifact(table.id, (1,), (), ((value_index, "SUM"),)),
            TypeAnnotation(
                table.id,
                msr_properties={value_index: "dbo:revenue"},
                dim_types={1: "organization.organization"},
            ),
        ]
        example = derive_labels(table, artifacts, registry, seed=seed + t)
        dataset.append((table, example))
    return dataset


def split_corpus(
    dataset: list[tuple[Table, LabeledExample]], seed: int = 0
) -> list[tuple[Table, LabeledExample]]:
    """Assign splits in place via the dedup pipeline; returns kept pairs."""
    tables = {t.id: t for t, _ in dataset}
    result = dedup_downsample_split([e for _, e in dataset], seed=seed)
    return [(tables[e.table_id], e) for e in result.examples]
