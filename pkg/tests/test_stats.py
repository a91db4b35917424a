import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fieldmeta.stats import (
    FEATURE_NAMES,
    FieldCategories,
    extract_categories,
    extract_statistics,
    normalize_features,
)
from fieldmeta.table import FieldType, build_field


def stats_of(values):
    return extract_statistics(build_field(0, "h", values))


def brute_force_benford(values):
    """Independent oracle: explicit first-digit histogram and L1 distance."""
    digits = []
    for v in values:
        v = abs(float(v))
        if v == 0:
            continue
        s = f"{v:.15e}"  # scientific form: first char is the leading digit
        digits.append(int(s[0]))
    counts = [digits.count(d) / len(digits) for d in range(1, 10)]
    ideal = [math.log10(1 + 1 / d) for d in range(1, 10)]
    return sum(abs(c - i) for c, i in zip(counts, ideal))


def brute_force_gini(values):
    """Independent oracle: O(n^2) pairwise absolute differences."""
    n = len(values)
    mean = sum(values) / n
    if mean == 0:
        return 0.0
    num = sum(abs(a - b) for a in values for b in values)
    return num / (2 * n * n * mean)


class TestProgression:
    def test_exact_arithmetic(self):
        fv = stats_of(["1", "2", "3", "4"])
        assert fv.ArithmeticProgressionConfidence == 1.0
        assert fv.GeometricProgressionConfidence < 1.0
        assert fv.PartialOrdered == 1.0
        assert fv.OrderedConfidence == 1.0

    def test_exact_geometric(self):
        fv = stats_of(["1", "2", "4", "8"])
        assert fv.GeometricProgressionConfidence == 1.0

    def test_geometric_zero_value(self):
        assert stats_of(["0", "1", "2"]).GeometricProgressionConfidence == 0.0

    def test_geometric_sign_change(self):
        assert stats_of(["-1", "1", "-1"]).GeometricProgressionConfidence == 0.0

    def test_alternating_not_ordered(self):
        fv = stats_of(["1", "2", "1", "2", "1"])
        assert fv.PartialOrdered == 0.5
        assert fv.OrderedConfidence == 0.25


class TestConstantColumn:
    def test_spec_values(self):
        fv = stats_of(["5", "5", "5", "5"])
        assert fv.Variance == 0.0
        assert fv.Gini == 0.0
        assert fv.Major == 1.0
        assert fv.Cardinality == 0.25
        assert fv.AbsoluteCardinality == 1.0


class TestEntropy:
    @pytest.mark.parametrize("k", [1, 2, 5, 10])
    def test_key_entropy_uniform(self, k):
        values = [f"v{i}" for i in range(k)]
        assert stats_of(values).KeyEntropy == pytest.approx(math.log(k), abs=1e-12)

    def test_char_entropy_single_char(self):
        assert stats_of(["aaa", "aa"]).CharEntropy == 0.0


class TestBenford:
    def test_one_to_thousand_vs_oracle(self):
        values = [str(i) for i in range(1, 1001)]
        ours = stats_of(values).Benford
        oracle = brute_force_benford(range(1, 1001))
        assert abs(ours - oracle) < 0.05

    def test_small_magnitudes(self):
        # 0.02 -> leading digit 2
        assert stats_of(["0.02"]).Benford == pytest.approx(
            brute_force_benford([0.02]), abs=1e-12
        )

    def test_no_numerics(self):
        assert stats_of(["a", "b"]).Benford == 0.0


class TestGini:
    def test_matches_oracle(self):
        values = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]
        ours = stats_of([str(v) for v in values]).Gini
        assert ours == pytest.approx(brute_force_gini(values), abs=1e-12)

    def test_monotone_towards_one(self):
        previous = -1.0
        for zeros in (1, 5, 20, 100):
            values = ["0"] * zeros + ["1"]
            g = stats_of(values).Gini
            assert previous < g < 1.0
            assert g == pytest.approx(brute_force_gini([0.0] * zeros + [1.0]), abs=1e-12)
            previous = g

    def test_negative_values_default(self):
        assert stats_of(["-1", "2"]).Gini == 0.0


class TestShape:
    def test_skewness_symmetric_sample(self):
        values = [1.0, 2.0, 7.5, 9.1]
        mean = sum(values) / len(values)
        mirrored = values + [2 * mean - v for v in values]
        fv = stats_of([repr(float(v)) for v in mirrored])
        assert abs(fv.Skewness) < 1e-9

    def test_kurtosis_matches_definition(self):
        values = np.array([1.0, 2.0, 3.0, 10.0])
        dev = values - values.mean()
        expected = float((dev**4).mean() / (dev**2).mean() ** 2 - 3.0)
        assert stats_of([repr(float(v)) for v in values]).Kurtosis == pytest.approx(expected)


class TestStringFeatures:
    def test_common_affixes(self):
        fv = stats_of(["item_a", "item_b"])
        # lcp "item_" = 5 over median length 6
        assert fv.CommonPrefix == pytest.approx(5 / 6)
        assert fv.CommonSuffix == 0.0

    def test_percent_share(self):
        assert stats_of(["12%", "30%"]).AggrPercentFormatted == 1.0

    def test_single_cell_defaults(self):
        fv = stats_of(["lonely"])
        assert fv.CommonPrefix == 0.0
        assert fv.ChangeRate == 0.0
        assert fv.Variance == 0.0


class TestRangeFeatures:
    def test_shares(self):
        fv = stats_of(["0.2", "0.8", "50", "-3"])
        assert fv.Aggr01Ranged == 0.5
        assert fv.Aggr0100Ranged == 0.75
        assert fv.AggrInteger == 0.5
        assert fv.AggrNegative == 0.25

    def test_sum_indicators(self):
        assert stats_of(["0.4", "0.6"]).SumIn01 == 1.0
        assert stats_of(["40", "60"]).SumIn0100 == 1.0
        assert stats_of(["40", "70"]).SumIn0100 == 0.0


ORDER_SENSITIVE = {
    "ChangeRate",
    "PartialOrdered",
    "OrderedConfidence",
    "ArithmeticProgressionConfidence",
    "GeometricProgressionConfidence",
}


@given(st.permutations(["4", "1", "9", "2", "2", "x"]))
def test_permutation_invariance(shuffled):
    base = stats_of(["4", "1", "9", "2", "2", "x"])
    other = stats_of(list(shuffled))
    for name in FEATURE_NAMES:
        if name in ORDER_SENSITIVE or name in ("CommonPrefix", "CommonSuffix"):
            continue
        assert getattr(base, name) == pytest.approx(getattr(other, name), abs=1e-12), name


def test_order_sensitive_features_do_change():
    sorted_fv = stats_of(["1", "2", "3", "4"])
    shuffled_fv = stats_of(["3", "1", "4", "2"])
    assert sorted_fv.PartialOrdered != shuffled_fv.PartialOrdered


class TestNormalize:
    def test_fixed_point_zero(self):
        fv = stats_of(["5", "5"])
        assert normalize_features(fv).Variance == 0.0

    def test_num_rows_rule(self):
        fv = stats_of(["1", "2", "3"])
        expected = math.log1p(3) / (1 + math.log1p(3))
        assert normalize_features(fv).NumRows == pytest.approx(expected, abs=1e-12)

    def test_bounded_passthrough(self):
        fv = stats_of(["a", "b", "b", "c"])._replace(ChangeRate=0.7)
        assert normalize_features(fv).ChangeRate == 0.7

    def test_idempotent_on_bounded(self):
        fv = normalize_features(stats_of(["1", "2", "2", "x"]))
        for name in FEATURE_NAMES:
            value = getattr(fv, name)
            assert -1.0 < value < 1.0 or value in (0.0, 1.0), name

    def test_monotone_on_unbounded(self):
        lo = normalize_features(stats_of(["1", "2"]))
        hi = normalize_features(stats_of(["1", "2000"]))
        assert hi.Range > lo.Range
        assert hi.Variance > lo.Variance


class TestCategories:
    def test_percent(self):
        c = extract_categories(build_field(0, "h", ["12%", "30%"]))
        assert c.is_percent and not c.is_currency

    def test_currency(self):
        f = build_field(0, "h", ["$5", "$7"])
        c = extract_categories(f)
        assert c.is_currency
        assert f.field_type is FieldType.DECIMAL

    def test_full_date(self):
        c = extract_categories(build_field(0, "h", ["2020-01-03"]))
        assert c.has_year and c.has_month and c.has_day

    def test_year_field(self):
        c = extract_categories(build_field(0, "h", ["1998", "1999"]))
        assert c.has_year and not c.has_day

    def test_month_name_in_text(self):
        c = extract_categories(build_field(0, "h", ["Jan 2020", "Feb 2020"]))
        assert c.has_month and c.has_year

    def test_json_dict_has_six_slots(self):
        c = extract_categories(build_field(0, "h", ["a"]))
        assert len(c.to_json_dict()) == 6


def test_feature_vector_has_31_entries():
    assert len(FEATURE_NAMES) == 31
    fv = stats_of(["1", "2"])
    assert len(fv.to_array()) == 31
    assert list(fv.to_json_dict()) == list(FEATURE_NAMES)


def test_ratio_features_bounded():
    fv = stats_of(["$1", "2%", "x", "", "9,999", "2020-01-01"])
    for name in (
        "ChangeRate",
        "PartialOrdered",
        "Cardinality",
        "Aggr01Ranged",
        "Aggr0100Ranged",
        "AggrInteger",
        "AggrNegative",
        "SumIn01",
        "SumIn0100",
        "Major",
        "AggrPercentFormatted",
        "CommonPrefix",
        "CommonSuffix",
    ):
        assert 0.0 <= getattr(fv, name) <= 1.0, name
    assert fv.NumRows >= 1.0
