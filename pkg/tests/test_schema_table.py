import numpy as np
import pytest

from cqabench.errors import ParseError, SchemaError
from cqabench.schema import (COMPOSITE_COLUMNS, ColumnSpec, FeatureSchema,
                             Role, TargetSpec, rq1_schema, rq2_schema,
                             rq3_schema, schema_for_rq, targets_for_rq,
                             user_table_schema, violation_density_columns)
from cqabench.table import (UserFeatureTable, empty_table, load_table,
                            parse_table_text, save_table)


class TestSchemas:
    def test_rq1_layout(self):
        s = rq1_schema()
        assert len(s.predictor_names()) == 20
        assert s.composite_names() == COMPOSITE_COLUMNS
        assert s.target_names() == ("Answers",)

    def test_rq2_layout(self):
        s = rq2_schema()
        assert len(s.predictor_names()) == 21  # activity column joins the pool
        assert "Answers" in s.predictor_names()
        assert len(s.target_names()) == 20

    def test_rq3_layout(self):
        s = rq3_schema()
        assert len(s.predictor_names()) == 41
        assert s.target_names() == ("Dropout",)

    def test_master_schema_has_all_variables(self):
        s = user_table_schema()
        assert len(s.columns) == 46
        assert len(violation_density_columns()) == 20
        assert s.column("Gender").nominal

    def test_duplicate_names_rejected(self):
        with pytest.raises(SchemaError, match="duplicate"):
            FeatureSchema((ColumnSpec("A"), ColumnSpec("A")))

    def test_target_counts_per_rq(self):
        assert len(targets_for_rq("RQ1")) == 1
        assert len(targets_for_rq("RQ2")) == 20
        assert len(targets_for_rq("RQ3")) == 1
        assert targets_for_rq("RQ3")[0].task == "classification"

    def test_targets_validate_against_schema(self):
        rq2_schema().validate_targets(targets_for_rq("RQ2"))
        with pytest.raises(SchemaError):
            rq1_schema().validate_targets(targets_for_rq("RQ3"))

    def test_unknown_rq(self):
        with pytest.raises(SchemaError):
            schema_for_rq("RQ9")
        with pytest.raises(SchemaError):
            TargetSpec("Answers", "regression", "RQ9")

    def test_unknown_column_lookup(self):
        with pytest.raises(SchemaError, match="No Such"):
            rq1_schema().index("No Such Column")


def _tiny_schema():
    return FeatureSchema((
        ColumnSpec("Answers"),
        ColumnSpec("Reputation"),
        ColumnSpec("Views"),
    ))


class TestLoadTable:
    def test_blank_cell_becomes_masked(self):
        text = "Answers,Reputation,Views\n1,10,100\n,20,200\n3,30,300\n"
        t = parse_table_text(text, _tiny_schema())
        assert t.n_rows == 3
        assert t.column_missing("Answers").tolist() == [False, True, False]
        assert not t.missing[:, 1:].any()

    def test_header_only_file(self):
        t = parse_table_text("Answers,Reputation,Views\n", _tiny_schema())
        assert t.n_rows == 0

    def test_missing_required_column(self):
        with pytest.raises(SchemaError, match="Reputation"):
            parse_table_text("Answers,Views\n1,2\n", _tiny_schema())

    def test_short_row_reports_index(self):
        text = "Answers,Reputation,Views\n1,10,100\n2,20\n"
        with pytest.raises(ParseError, match="row 2"):
            parse_table_text(text, _tiny_schema())

    def test_non_numeric_cell_masked(self):
        text = "Answers,Reputation,Views\nn/a,10,100\n"
        t = parse_table_text(text, _tiny_schema())
        assert t.column_missing("Answers").tolist() == [True]

    def test_nominal_encoding(self):
        schema = FeatureSchema((ColumnSpec("Gender", nominal=True),
                                ColumnSpec("Views")))
        t = parse_table_text("Gender,Views\nfemale,1\nmale,2\nfemale,3\n",
                             schema)
        assert t.column("Gender").tolist() == [0.0, 1.0, 0.0]

    def test_nominal_three_categories_rejected(self):
        schema = FeatureSchema((ColumnSpec("Gender", nominal=True),))
        with pytest.raises(ParseError, match="categories"):
            parse_table_text("Gender\na\nb\nc\n", schema)

    def test_extra_columns_ignored(self):
        text = "Answers,Junk,Reputation,Views\n1,x,10,100\n"
        t = parse_table_text(text, _tiny_schema())
        assert t.column("Reputation").tolist() == [10.0]


class TestRoundTrip:
    def test_save_load_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        values = rng.normal(0, 1e6, (50, 3)) * rng.choice([1e-8, 1.0, 1e8],
                                                          (50, 3))
        mask = rng.random((50, 3)) < 0.2
        values = values.copy()
        values[mask] = np.nan
        t = UserFeatureTable(_tiny_schema(), values, mask)
        path = tmp_path / "t.csv"
        save_table(t, path)
        back = load_table(path, _tiny_schema())
        assert np.array_equal(back.missing, t.missing)
        assert np.array_equal(back.values[~mask], t.values[~mask])

    def test_empty_table(self):
        t = empty_table(_tiny_schema())
        assert t.n_rows == 0 and t.n_cols == 3


class TestTableOps:
    def _table(self):
        values = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        return UserFeatureTable(_tiny_schema(), values,
                                np.zeros((2, 3), dtype=bool))

    def test_immutability(self):
        t = self._table()
        with pytest.raises(ValueError):
            t.values[0, 0] = 99.0

    def test_replace_column_returns_new(self):
        t = self._table()
        t2 = t.replace_column("Answers", np.array([7.0, 8.0]))
        assert t.column("Answers").tolist() == [1.0, 4.0]
        assert t2.column("Answers").tolist() == [7.0, 8.0]

    def test_without_columns(self):
        t2 = self._table().without_columns({"Views"})
        assert t2.schema.names == ("Answers", "Reputation")
        assert t2.values.shape == (2, 2)
        with pytest.raises(SchemaError):
            self._table().without_columns({"Nope"})

    def test_shape_mismatch_rejected(self):
        with pytest.raises(SchemaError):
            UserFeatureTable(_tiny_schema(), np.zeros((2, 2)),
                             np.zeros((2, 2), dtype=bool))
        with pytest.raises(SchemaError):
            UserFeatureTable(_tiny_schema(), np.zeros((2, 3)),
                             np.zeros((3, 3), dtype=bool))
