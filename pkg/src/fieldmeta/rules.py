"""Rule baselines for the eight metadata tasks.

The rules are deliberately simple surface heuristics and are reproduced
verbatim, including their known failure mode on numeric dimension columns
(a "Rank" column of integers is classified as a measure).
"""

from __future__ import annotations

from dataclasses import dataclass

from fieldmeta.errors import MissingVocabulary
from fieldmeta.table import Table, cardinality_ratio, is_numeric_field
from fieldmeta.tasks import DIM, MSR, Task
from fieldmeta.taxonomy import TaxonomyRegistry, default_registry

BREAKDOWN_CARDINALITY_MAX = 0.4

RULE_DIM_TYPE = "sports.sports_team"
RULE_MSR_TYPE = "Count"
RULE_AGG = "SUM"


@dataclass(frozen=True)
class RulePrediction:
    task: Task
    per_field: tuple[tuple[int, object], ...] = ()
    per_pair: tuple[tuple[tuple[int, int], bool], ...] = ()


def rule_msr_dim(table: Table) -> RulePrediction:
    """Measure iff the field consists purely of numbers; else dimension."""
    return RulePrediction(
        Task.MSR_DIM,
        per_field=tuple(
            (f.index, MSR if is_numeric_field(f) else DIM) for f in table.fields
        ),
    )


def rule_roles(table: Table) -> tuple[RulePrediction, RulePrediction, RulePrediction]:
    """Leftmost all-unique field; leftmost low-cardinality dimension; rightmost numeric field."""
    numeric = {f.index for f in table.fields if is_numeric_field(f)}

    key: tuple[tuple[int, object], ...] = ()
    for f in table.fields:
        if f.non_empty_cells() and cardinality_ratio(f) == 1.0:
            key = ((f.index, True),)
            break

    breakdown: tuple[tuple[int, object], ...] = ()
    for f in table.fields:
        if f.index not in numeric and cardinality_ratio(f) < BREAKDOWN_CARDINALITY_MAX:
            breakdown = ((f.index, True),)
            break

    measure: tuple[tuple[int, object], ...] = ()
    for f in reversed(table.fields):
        if f.index in numeric:
            measure = ((f.index, True),)
            break

    return (
        RulePrediction(Task.NATURAL_KEY, per_field=key),
        RulePrediction(Task.COMMON_BREAKDOWN, per_field=breakdown),
        RulePrediction(Task.COMMON_MEASURE, per_field=measure),
    )


def rule_types(
    table: Table, registry: TaxonomyRegistry | None = None
) -> tuple[RulePrediction, RulePrediction]:
    """Constant majority class: dimensions get one dimension type, measures get Count."""
    registry = registry or default_registry()
    if RULE_MSR_TYPE not in registry.measure_types:
        raise MissingVocabulary(f"measure type vocabulary lacks {RULE_MSR_TYPE}")
    if RULE_DIM_TYPE not in registry.dimension_type_names():
        raise MissingVocabulary(f"dimension type vocabulary lacks {RULE_DIM_TYPE}")
    dims = []
    msrs = []
    for f in table.fields:
        if is_numeric_field(f):
            msrs.append((f.index, RULE_MSR_TYPE))
        else:
            dims.append((f.index, RULE_DIM_TYPE))
    return (
        RulePrediction(Task.DIM_TYPE, per_field=tuple(dims)),
        RulePrediction(Task.MSR_TYPE, per_field=tuple(msrs)),
    )


def rule_msr_pair(table: Table) -> RulePrediction:
    """A pair is positive iff the two fields are contiguous rule-predicted measures."""
    numeric = [f.index for f in table.fields if is_numeric_field(f)]
    numeric_set = set(numeric)
    pairs = []
    for a in numeric:
        for b in numeric:
            if a < b:
                positive = b == a + 1 and a in numeric_set and b in numeric_set
                pairs.append(((a, b), positive))
    return RulePrediction(Task.MSR_PAIR, per_pair=tuple(pairs))


def rule_agg(table: Table, registry: TaxonomyRegistry | None = None) -> RulePrediction:
    """Every measure field gets the majority function first, rest in vocabulary order."""
    registry = registry or default_registry()
    if RULE_AGG not in registry.agg_functions:
        raise MissingVocabulary(f"aggregation vocabulary lacks {RULE_AGG}")
    ranking = (RULE_AGG,) + tuple(fn for fn in registry.agg_functions if fn != RULE_AGG)
    return RulePrediction(
        Task.AGG,
        per_field=tuple(
            (f.index, ranking) for f in table.fields if is_numeric_field(f)
        ),
    )


@dataclass(frozen=True)
class RuleBaseline:
    """All eight rule predictions for one table, in one bundle."""

    msr_dim: RulePrediction
    natural_key: RulePrediction
    common_breakdown: RulePrediction
    common_measure: RulePrediction
    dim_type: RulePrediction
    msr_type: RulePrediction
    msr_pair: RulePrediction
    agg: RulePrediction


def run_all_rules(table: Table, registry: TaxonomyRegistry | None = None) -> RuleBaseline:
    registry = registry or default_registry()
    key, breakdown, measure = rule_roles(table)
    dim_type, msr_type = rule_types(table, registry)
    return RuleBaseline(
        msr_dim=rule_msr_dim(table),
        natural_key=key,
        common_breakdown=breakdown,
        common_measure=measure,
        dim_type=dim_type,
        msr_type=msr_type,
        msr_pair=rule_msr_pair(table),
        agg=rule_agg(table, registry),
    )
