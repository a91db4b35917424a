"""Per-field data statistics (31 features) and categorical flags (6 slots).

Feature names and canonical order are fixed by FEATURE_NAMES; serialized
vectors always use that order so downstream matrices stay column-stable.
Statistics over degenerate input (single cell, no numeric cells) default
to 0, per-feature notes below.
"""

from __future__ import annotations

import math
import re
from typing import NamedTuple

import numpy as np

from fieldmeta.table import CellKind, Field, FieldType

_SUM_EPS = 1e-6

_YEAR_TOKEN_RE = re.compile(r"\b(1\d{3}|20\d{2}|2100)\b")
_MONTH_TOKEN_RE = re.compile(
    r"\b(jan(uary)?|feb(ruary)?|mar(ch)?|apr(il)?|may|jun(e)?|jul(y)?"
    r"|aug(ust)?|sep(tember)?|oct(ober)?|nov(ember)?|dec(ember)?)\b",
    re.IGNORECASE,
)


class FeatureVector(NamedTuple):
    """31 statistics in canonical order (progression, string, range, distribution)."""

    ChangeRate: float
    PartialOrdered: float
    OrderedConfidence: float
    ArithmeticProgressionConfidence: float
    GeometricProgressionConfidence: float
    AggrPercentFormatted: float
    medianLen: float
    LengthStdDev: float
    AvgLogLength: float
    CommonPrefix: float
    CommonSuffix: float
    Cardinality: float
    AbsoluteCardinality: float
    Aggr01Ranged: float
    Aggr0100Ranged: float
    AggrInteger: float
    AggrNegative: float
    SumIn01: float
    SumIn0100: float
    Benford: float
    Range: float
    NumRows: float
    KeyEntropy: float
    CharEntropy: float
    Variance: float
    Cov: float
    Spread: float
    Major: float
    Skewness: float
    Kurtosis: float
    Gini: float

    def to_array(self) -> np.ndarray:
        return np.asarray(self, dtype=np.float64)

    def to_json_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self))


FEATURE_NAMES: tuple[str, ...] = FeatureVector._fields

# Features already in [0,1] pass through normalization unchanged; the rest are
# squashed (x -> x/(1+|x|)) or log-compressed first for count/magnitude scales.
_SQUASH = frozenset({"Cov", "Benford", "Spread", "Skewness", "Kurtosis"})
_LOG_SQUASH = frozenset(
    {
        "NumRows",
        "AbsoluteCardinality",
        "Range",
        "Variance",
        "medianLen",
        "LengthStdDev",
        "AvgLogLength",
        "KeyEntropy",
        "CharEntropy",
    }
)

BENFORD_IDEAL = np.log10(1.0 + 1.0 / np.arange(1, 10))


class FieldCategories(NamedTuple):
    """6 categorical slots: field type plus five boolean markers."""

    field_type: FieldType
    is_percent: bool
    is_currency: bool
    has_year: bool
    has_month: bool
    has_day: bool

    def to_json_dict(self) -> dict:
        return {
            "field_type": self.field_type.value,
            "is_percent": self.is_percent,
            "is_currency": self.is_currency,
            "has_year": self.has_year,
            "has_month": self.has_month,
            "has_day": self.has_day,
        }


def extract_statistics(field: Field) -> FeatureVector:
    """Compute all 31 statistics for one field."""
    cells = field.cells
    non_empty = field.non_empty_cells()
    texts = [c.raw for c in non_empty]
    keys = texts  # distinctness is surface-level (trimmed raw text)
    numbers = np.array(
        [c.number for c in non_empty if c.kind is CellKind.NUMBER], dtype=np.float64
    )

    n_rows = float(len(cells))
    n_values = len(texts)
    distinct = len(set(keys))

    change_rate = _change_rate([c.raw for c in cells])
    partial_ordered, ordered_conf = _order_features(numbers)
    apc = _progression_confidence(np.diff(numbers)) if numbers.size >= 2 else 0.0
    gpc = _geometric_confidence(numbers)

    pct_share = _share(c.is_percent for c in non_empty)
    lengths = np.array([len(t) for t in texts], dtype=np.float64)
    median_len = float(np.median(lengths)) if n_values else 0.0
    length_std = float(np.std(lengths)) if n_values else 0.0
    avg_log_len = float(np.mean(np.log1p(lengths))) if n_values else 0.0
    common_prefix, common_suffix = _affix_ratios(texts, median_len)
    cardinality = distinct / n_values if n_values else 0.0

    if numbers.size:
        aggr01 = float(np.mean((numbers >= 0.0) & (numbers <= 1.0)))
        aggr0100 = float(np.mean((numbers >= 0.0) & (numbers <= 100.0)))
        aggr_int = float(np.mean(numbers == np.floor(numbers)))
        aggr_neg = float(np.mean(numbers < 0.0))
        total = float(np.sum(numbers))
        sum01 = 1.0 if -_SUM_EPS <= total <= 1.0 + _SUM_EPS else 0.0
        sum0100 = 1.0 if abs(total - 100.0) <= _SUM_EPS else 0.0
    else:
        aggr01 = aggr0100 = aggr_int = aggr_neg = sum01 = sum0100 = 0.0

    benford = _benford_distance(numbers)
    value_range = float(np.ptp(numbers)) if numbers.size >= 2 else 0.0
    key_entropy = _entropy(keys)
    char_entropy = _entropy(list("".join(texts)))
    variance = float(np.var(numbers, ddof=1)) if numbers.size >= 2 else 0.0
    cov = _coefficient_of_variation(numbers)
    spread = cardinality / (1.0 + value_range) if numbers.size else cardinality
    major = _modal_share(keys)
    skewness, kurtosis = _shape_moments(numbers)
    gini = _gini(numbers)

    return FeatureVector(
        ChangeRate=change_rate,
        PartialOrdered=partial_ordered,
        OrderedConfidence=ordered_conf,
        ArithmeticProgressionConfidence=apc,
        GeometricProgressionConfidence=gpc,
        AggrPercentFormatted=pct_share,
        medianLen=median_len,
        LengthStdDev=length_std,
        AvgLogLength=avg_log_len,
        CommonPrefix=common_prefix,
        CommonSuffix=common_suffix,
        Cardinality=cardinality,
        AbsoluteCardinality=float(distinct),
        Aggr01Ranged=aggr01,
        Aggr0100Ranged=aggr0100,
        AggrInteger=aggr_int,
        AggrNegative=aggr_neg,
        SumIn01=sum01,
        SumIn0100=sum0100,
        Benford=benford,
        Range=value_range,
        NumRows=n_rows,
        KeyEntropy=key_entropy,
        CharEntropy=char_entropy,
        Variance=variance,
        Cov=cov,
        Spread=spread,
        Major=major,
        Skewness=skewness,
        Kurtosis=kurtosis,
        Gini=gini,
    )


def extract_categories(field: Field) -> FieldCategories:
    """Percent/currency flags from cell markers (>0.5 share); date parts from cells."""
    non_empty = field.non_empty_cells()
    is_percent = _share(c.is_percent for c in non_empty) > 0.5
    is_currency = _share(c.currency is not None for c in non_empty) > 0.5
    has_year = field.field_type is FieldType.YEAR or any(
        c.date_parts[0] for c in non_empty
    )
    has_month = any(c.date_parts[1] for c in non_empty)
    has_day = any(c.date_parts[2] for c in non_empty)
    if not has_year or not has_month:
        for c in non_empty:
            if c.kind is not CellKind.TEXT:
                continue
            has_year = has_year or bool(_YEAR_TOKEN_RE.search(c.raw))
            has_month = has_month or bool(_MONTH_TOKEN_RE.search(c.raw))
    return FieldCategories(
        field_type=field.field_type,
        is_percent=is_percent,
        is_currency=is_currency,
        has_year=has_year,
        has_month=has_month,
        has_day=has_day,
    )


def normalize_features(fv: FeatureVector) -> FeatureVector:
    """Squash unbounded statistics into [0,1); bounded features pass through."""
    out = []
    for name, value in zip(FEATURE_NAMES, fv):
        if name in _LOG_SQUASH:
            compressed = math.copysign(math.log1p(abs(value)), value)
            out.append(compressed / (1.0 + abs(compressed)))
        elif name in _SQUASH:
            out.append(value / (1.0 + abs(value)))
        else:
            out.append(value)
    return FeatureVector(*out)


def _share(flags) -> float:
    flags = list(flags)
    return sum(flags) / len(flags) if flags else 0.0


def _change_rate(raw_values: list[str]) -> float:
    if len(raw_values) < 2:
        return 0.0
    changes = sum(1 for a, b in zip(raw_values, raw_values[1:]) if a != b)
    return changes / (len(raw_values) - 1)


def _order_features(numbers: np.ndarray) -> tuple[float, float]:
    if numbers.size < 2:
        return 0.0, 0.0
    diffs = np.diff(numbers)
    non_decreasing = float(np.mean(diffs >= 0.0))
    non_increasing = float(np.mean(diffs <= 0.0))
    partial = max(non_decreasing, non_increasing)
    ordered = 1.0 if partial == 1.0 else partial * partial
    return partial, ordered


def _progression_confidence(steps: np.ndarray) -> float:
    if steps.size == 0:
        return 0.0
    sd = float(np.std(steps))
    mean = float(np.mean(steps))
    if sd == 0.0:
        return 1.0
    if mean == 0.0:
        return 0.0
    return min(max(1.0 - sd / abs(mean), 0.0), 1.0)


def _geometric_confidence(numbers: np.ndarray) -> float:
    if numbers.size < 2:
        return 0.0
    if np.any(numbers == 0.0) or not (np.all(numbers > 0.0) or np.all(numbers < 0.0)):
        return 0.0
    return _progression_confidence(numbers[1:] / numbers[:-1])


def _affix_ratios(texts: list[str], median_len: float) -> tuple[float, float]:
    # needs >=2 texts: affix commonality of a singleton is not informative
    if len(texts) < 2 or median_len <= 0.0:
        return 0.0, 0.0
    prefix = len(_common_prefix(texts))
    suffix = len(_common_prefix([t[::-1] for t in texts]))
    return min(prefix / median_len, 1.0), min(suffix / median_len, 1.0)


def _common_prefix(texts: list[str]) -> str:
    shortest = min(texts, key=len)
    for i, ch in enumerate(shortest):
        if any(t[i] != ch for t in texts):
            return shortest[:i]
    return shortest


def _benford_distance(numbers: np.ndarray) -> float:
    digits = []
    for x in numbers:
        x = abs(x)
        if x == 0.0:
            continue
        while x < 1.0:
            x *= 10.0
        digits.append(int(str(int(x))[0]))
    if not digits:
        return 0.0
    observed = np.bincount(digits, minlength=10)[1:10].astype(np.float64)
    observed /= observed.sum()
    return float(np.abs(observed - BENFORD_IDEAL).sum())


def _entropy(items: list) -> float:
    if not items:
        return 0.0
    _, counts = np.unique(np.asarray(items, dtype=object), return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def _coefficient_of_variation(numbers: np.ndarray) -> float:
    if numbers.size < 2:
        return 0.0
    mean = float(np.mean(numbers))
    if mean == 0.0:
        return 0.0
    return float(np.std(numbers, ddof=1)) / abs(mean)


def _modal_share(keys: list[str]) -> float:
    if not keys:
        return 0.0
    counts: dict[str, int] = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    return max(counts.values()) / len(keys)


def _shape_moments(numbers: np.ndarray) -> tuple[float, float]:
    if numbers.size < 2:
        return 0.0, 0.0
    dev = numbers - numbers.mean()
    m2 = float(np.mean(dev**2))
    if m2 == 0.0:
        return 0.0, 0.0
    skew = float(np.mean(dev**3)) / m2**1.5
    kurt = float(np.mean(dev**4)) / m2**2 - 3.0
    return skew, kurt


def _gini(numbers: np.ndarray) -> float:
    """Inequality Gini over nonnegative values; 0 for empty/negative/zero-mean input."""
    if numbers.size == 0 or np.any(numbers < 0.0):
        return 0.0
    total = float(numbers.sum())
    if total == 0.0:
        return 0.0
    ordered = np.sort(numbers)
    n = ordered.size
    idx = np.arange(1, n + 1, dtype=np.float64)
    return float(2.0 * np.dot(idx, ordered) / (n * total) - (n + 1.0) / n)
