import pytest

from fieldmeta.errors import IndexOutOfRange, UnknownAggFunction
from fieldmeta.labels import (
    ChartArtifact,
    ChartType,
    LabeledExample,
    PivotArtifact,
    TypeAnnotation,
    artifact_from_json,
    dedup_downsample_split,
    derive_from_chart,
    derive_from_pivot,
    derive_from_types,
    derive_labels,
    merge_examples,
    read_examples_jsonl,
    sample_pair_negatives,
    write_examples_jsonl,
)
from fieldmeta.table import schema_fingerprint
from fieldmeta.tasks import DIM, MSR
from tests.conftest import make_table


def bar(table_id, x, y):
    return ChartArtifact(table_id, ChartType.BAR, tuple(x), tuple(tuple(a) for a in y))


@pytest.fixture
def chart_table():
    return make_table(
        {
            "name": ["a", "b", "c"],
            "cat": ["x", "x", "y"],
            "sales": ["1", "2", "3"],
            "profit": ["4", "5", "6"],
        },
        table_id="ct",
    )


class TestChart:
    def test_bar_chart_mapping(self, chart_table):
        ex = derive_from_chart(chart_table, bar("ct", [0], [[2]]))
        assert ex.msr_dim[0] == DIM
        assert ex.msr_dim[2] == MSR
        assert ex.natural_key[0] is True
        assert ex.natural_key[1] is False  # negatives: all other fields
        assert ex.common_measure[2] is True
        assert ex.common_measure[0] is False

    def test_scatter_x_unlabeled(self, chart_table):
        ex = derive_from_chart(
            chart_table, ChartArtifact("ct", ChartType.SCATTER, (1,), ((2,),))
        )
        assert 1 not in ex.msr_dim
        assert ex.msr_dim[2] == MSR

    def test_line_x_unlabeled(self, chart_table):
        ex = derive_from_chart(
            chart_table, ChartArtifact("ct", ChartType.LINE, (0,), ((3,),))
        )
        assert 0 not in ex.msr_dim

    def test_same_axis_pair(self, chart_table):
        ex = derive_from_chart(chart_table, bar("ct", [0], [[2, 3]]))
        assert ex.pair_positives() == [(2, 3)]

    def test_separate_axes_no_pair(self, chart_table):
        ex = derive_from_chart(chart_table, bar("ct", [0], [[2], [3]]))
        assert ex.pair_positives() == []

    def test_no_key_when_x_not_unique(self, chart_table):
        ex = derive_from_chart(chart_table, bar("ct", [1], [[2]]))
        assert ex.natural_key == {}

    def test_no_key_when_two_dims_labeled(self, chart_table):
        ex = derive_from_chart(chart_table, bar("ct", [0, 1], [[2]]))
        assert ex.natural_key == {}

    def test_bad_index(self, chart_table):
        with pytest.raises(IndexOutOfRange):
            derive_from_chart(chart_table, bar("ct", [0], [[9]]))


class TestPivot:
    def test_value_field_one_hot(self, chart_table):
        ex = derive_from_pivot(
            chart_table, PivotArtifact("ct", (1,), (), ((3, "SUM"),))
        )
        assert ex.agg_scores[3]["SUM"] == 1
        assert sum(ex.agg_scores[3].values()) == 1
        assert len(ex.agg_scores[3]) == 9

    def test_duplicated_rows_field_is_breakdown(self, chart_table):
        ex = derive_from_pivot(
            chart_table, PivotArtifact("ct", (1,), (), ((3, "SUM"),))
        )
        assert ex.msr_dim[1] == DIM
        assert ex.common_breakdown[1] is True

    def test_unique_rows_field_is_dim_but_negative(self, chart_table):
        ex = derive_from_pivot(
            chart_table, PivotArtifact("ct", (0,), (), ((3, "SUM"),))
        )
        assert ex.msr_dim[0] == DIM
        assert ex.common_breakdown[0] is False

    def test_other_fields_negative(self, chart_table):
        ex = derive_from_pivot(
            chart_table, PivotArtifact("ct", (1,), (), ((3, "AVERAGE"),))
        )
        assert ex.common_measure[2] is False
        assert ex.common_breakdown[2] is False

    def test_unknown_agg_function(self, chart_table):
        with pytest.raises(UnknownAggFunction):
            derive_from_pivot(
                chart_table, PivotArtifact("ct", (1,), (), ((3, "FROBNICATE"),))
            )

    def test_two_functions_same_field(self, chart_table):
        ex = derive_from_pivot(
            chart_table,
            PivotArtifact("ct", (1,), (), ((3, "SUM"), (3, "MAX"))),
        )
        assert ex.agg_scores[3]["SUM"] == 1
        assert ex.agg_scores[3]["MAX"] == 1


class TestTypesSidecar:
    def test_property_mapping(self, chart_table):
        ex = derive_from_types(
            chart_table,
            TypeAnnotation("ct", msr_properties={2: "dbo:revenue"}, key_fields=(0,)),
        )
        assert ex.msr_type[2] == "Money"
        assert ex.msr_dim[2] == MSR
        assert ex.natural_key[0] is True
        assert ex.msr_dim[0] == DIM

    def test_dim_types_carry_no_msr_dim_label(self, chart_table):
        ex = derive_from_types(
            chart_table, TypeAnnotation("ct", dim_types={1: "people.person"})
        )
        assert ex.dim_type[1] == "people.person"
        assert 1 not in ex.msr_dim


class TestPairNegatives:
    def test_count_matches(self, chart_table):
        # numerics 2,3 only -> pool after removing positive is empty
        t = make_table(
            {"a": ["1"], "b": ["2"], "c": ["3"], "d": ["x"]}, table_id="p"
        )
        negs = sample_pair_negatives(t, [(0, 1)], seed=7)
        assert len(negs) == 1
        assert (0, 1) not in negs

    def test_exhausted_pool(self):
        t = make_table({"a": ["1"], "b": ["2"]}, table_id="p")
        assert sample_pair_negatives(t, [(0, 1)], seed=1) == []

    def test_deterministic(self):
        t = make_table({c: ["1", "2"] for c in "abcdef"}, table_id="p")
        a = sample_pair_negatives(t, [(0, 1), (2, 3)], seed=42)
        b = sample_pair_negatives(t, [(0, 1), (2, 3)], seed=42)
        assert a == b

    def test_disjoint_from_positives(self):
        t = make_table({c: ["1", "2"] for c in "abcde"}, table_id="p")
        positives = [(0, 1), (1, 2)]
        for pair in sample_pair_negatives(t, positives, seed=3):
            assert pair not in positives


class TestDeriveLabels:
    def test_merged_with_negatives(self):
        t = make_table(
            {
                "name": ["a", "b", "c"],
                "cat": ["x", "x", "y"],
                "sales": ["1", "2", "3"],
                "profit": ["4", "5", "6"],
                "cost": ["7", "8", "9"],
            },
            table_id="ct",
        )
        ex = derive_labels(
            t,
            [bar("ct", [0], [[2, 3]]), PivotArtifact("ct", (1,), (), ((2, "SUM"),))],
            seed=5,
        )
        assert ex.msr_dim == {0: DIM, 1: DIM, 2: MSR, 3: MSR}
        assert ex.common_breakdown[1] is True
        positives = ex.pair_positives()
        negatives = [p for p, v in ex.msr_pairs if not v]
        assert len(negatives) == len(positives) == 1
        assert negatives[0] in [(2, 4), (3, 4)]
        assert ex.fingerprint == schema_fingerprint(t).hex
        assert ex.source == "chart"

    def test_invariants(self, chart_table):
        ex = derive_labels(
            chart_table,
            [bar("ct", [0], [[2]]), PivotArtifact("ct", (1,), (), ((3, "SUM"),))],
        )
        for i, positive in ex.common_measure.items():
            if positive:
                assert ex.msr_dim[i] == MSR
        for i, positive in ex.common_breakdown.items():
            if positive:
                assert ex.msr_dim[i] == DIM
        assert not ex.conflicts

    def test_conflict_recorded(self):
        t = make_table({"a": ["1", "2"], "b": ["3", "4"]}, table_id="cf")
        charts = [
            bar("cf", [0], [[1]]),   # a -> DIM
            bar("cf", [1], [[0]]),   # a -> MSR
        ]
        ex = derive_labels(t, charts)
        assert ex.conflicts
        assert 0 not in ex.msr_dim or 1 not in ex.msr_dim


class TestMerge:
    def test_positive_role_wins(self):
        a = LabeledExample(table_id="t", common_measure={0: False})
        b = LabeledExample(table_id="t", common_measure={0: True})
        assert merge_examples([a, b]).common_measure[0] is True

    def test_type_conflict_recorded(self):
        a = LabeledExample(table_id="t", msr_type={0: "Money"})
        b = LabeledExample(table_id="t", msr_type={0: "Count"})
        merged = merge_examples([a, b])
        assert merged.msr_type[0] == "Money"
        assert merged.conflicts


class TestDedupSplit:
    def _examples(self, n_schemas, per_schema, source="chart"):
        out = []
        for s in range(n_schemas):
            table = make_table(
                {f"h{s}": ["a", "b"], "v": ["1", "2"]}, table_id=f"s{s}"
            )
            fingerprint = schema_fingerprint(table).hex
            for k in range(per_schema):
                out.append(
                    LabeledExample(
                        table_id=f"s{s}_t{k}", source=source, fingerprint=fingerprint
                    )
                )
        return out

    def test_chart_threshold(self):
        result = dedup_downsample_split(self._examples(1, 20, "chart"), seed=1)
        assert len(result.examples) == 11

    def test_pivot_threshold(self):
        result = dedup_downsample_split(self._examples(1, 20, "pivot"), seed=1)
        assert len(result.examples) == 2

    def test_other_threshold(self):
        result = dedup_downsample_split(self._examples(1, 20, "other"), seed=1)
        assert len(result.examples) == 1

    def test_ten_schemas_split_7_1_2(self):
        result = dedup_downsample_split(self._examples(10, 1), seed=3)
        counts = {"train": 0, "valid": 0, "test": 0}
        for example in result.examples:
            counts[example.split] += 1
        assert counts == {"train": 7, "valid": 1, "test": 2}

    def test_same_schema_same_split(self):
        result = dedup_downsample_split(self._examples(4, 3), seed=9)
        by_fp = {}
        for example in result.examples:
            by_fp.setdefault(example.fingerprint, set()).add(example.split)
        assert all(len(splits) == 1 for splits in by_fp.values())

    def test_no_leakage_over_many_seeds(self):
        examples = self._examples(6, 5)
        for seed in range(100):
            result = dedup_downsample_split(examples, seed=seed)
            by_fp = {}
            for example in result.examples:
                by_fp.setdefault(example.fingerprint, set()).add(example.split)
            assert all(len(splits) == 1 for splits in by_fp.values())

    def test_pure_function_of_fingerprints_and_seed(self):
        examples = self._examples(5, 2)
        a = dedup_downsample_split(examples, seed=11).manifest["splits"]
        b = dedup_downsample_split(list(reversed(examples)), seed=11).manifest["splits"]
        assert a == b

    def test_manifest_contents(self):
        result = dedup_downsample_split(self._examples(3, 1), seed=2)
        assert result.manifest["seed"] == 2
        assert result.manifest["thresholds"] == {"chart": 11, "pivot": 2, "other": 1}
        assert len(result.manifest["splits"]) == 3


class TestSerialization:
    def test_jsonl_round_trip(self, chart_table):
        ex = derive_labels(chart_table, [bar("ct", [0], [[2, 3]])], seed=1)
        ex.split = "train"
        text = write_examples_jsonl([ex])
        (back,) = read_examples_jsonl(text)
        assert back == ex

    def test_artifact_parsing(self):
        chart = artifact_from_json(
            {"kind": "chart", "table_id": "t", "chart_type": "bar", "x_fields": [0], "y_fields": [[1]]}
        )
        assert isinstance(chart, ChartArtifact)
        pivot = artifact_from_json(
            {"kind": "pivot", "table_id": "t", "row_fields": [0], "value_fields": [[1, "SUM"]]}
        )
        assert isinstance(pivot, PivotArtifact)
        types = artifact_from_json(
            {"kind": "types", "table_id": "t", "msr_properties": {"1": "dbo:revenue"}}
        )
        assert isinstance(types, TypeAnnotation)
        assert types.msr_properties == {1: "dbo:revenue"}
