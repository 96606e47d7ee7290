import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tableforge.tables import (
    ColumnKind,
    CorpusRecord,
    RecordSource,
    Table,
    TableError,
    cell_is_numeric,
    coerce_cell,
    infer_column_kinds,
    is_numerical_table,
    parse_table,
    write_table,
)


class TestCellIsNumeric:
    def test_integers_and_decimals(self):
        for cell in ("0", "42", "-3", "+7", "3.25", ".5", "10."):
            assert cell_is_numeric(cell), cell

    def test_thousands_separators_stripped(self):
        assert cell_is_numeric("1,234")
        assert cell_is_numeric("12,345,678.9")

    def test_exponent_notation(self):
        assert cell_is_numeric("6.02e23")
        assert cell_is_numeric("-1E-9")

    def test_non_numbers(self):
        for cell in ("", " ", "abc", "12a", "1.2.3", "--5", "4 2"):
            assert not cell_is_numeric(cell), cell

    def test_surrounding_whitespace_ok(self):
        assert cell_is_numeric("  17 ")


class TestTableInvariants:
    def test_rows_must_match_column_count(self):
        with pytest.raises(TableError, match="row 1"):
            Table(
                id="x",
                title="",
                description="",
                column_names=("a", "b"),
                rows=(("1", "2"), ("1",)),
            )

    def test_empty_id_rejected(self):
        with pytest.raises(TableError, match="id"):
            Table(
                id="",
                title="",
                description="",
                column_names=("a",),
                rows=(),
            )

    def test_empty_columns_rejected(self):
        with pytest.raises(TableError, match="column_names"):
            Table(id="x", title="", description="", column_names=(), rows=())

    def test_lists_normalized_to_tuples(self):
        t = Table(
            id="x",
            title="",
            description="",
            column_names=["a", "b"],
            rows=[["1", "2"]],
        )
        assert isinstance(t.column_names, tuple)
        assert isinstance(t.rows[0], tuple)

    def test_column_accessor(self, numeric_table):
        assert numeric_table.column(1) == ("12", "7", "31", "25")


class TestParseWrite:
    def test_roundtrip_identity(self, text_table, numeric_table):
        for t in (text_table, numeric_table):
            assert parse_table(write_table(t)) == t

    def test_missing_id(self):
        raw = json.dumps({"column_names": ["a"], "rows": []})
        with pytest.raises(TableError, match="'id'"):
            parse_table(raw)

    def test_missing_columns(self):
        raw = json.dumps({"id": "x", "rows": []})
        with pytest.raises(TableError, match="'column_names'"):
            parse_table(raw)

    def test_rows_not_a_list(self):
        raw = json.dumps({"id": "x", "column_names": ["a"], "rows": "no"})
        with pytest.raises(TableError, match="'rows'"):
            parse_table(raw)

    def test_ragged_rows_rejected(self):
        raw = json.dumps(
            {"id": "x", "column_names": ["a", "b"], "rows": [["1"]]}
        )
        with pytest.raises(TableError, match="row 0"):
            parse_table(raw)

    def test_not_json(self):
        with pytest.raises(TableError, match="not valid JSON"):
            parse_table("{nope")

    def test_non_object(self):
        with pytest.raises(TableError, match="not a JSON object"):
            parse_table("[1, 2]")

    def test_title_description_default_empty(self):
        raw = json.dumps({"id": "x", "column_names": ["a"], "rows": [["1"]]})
        t = parse_table(raw)
        assert t.title == "" and t.description == ""

    def test_numeric_json_cells_coerced_to_text(self):
        raw = json.dumps(
            {
                "id": "x",
                "column_names": ["a", "b", "c"],
                "rows": [[1, 2.5, None]],
            }
        )
        t = parse_table(raw)
        assert t.rows[0] == ("1", "2.5", "")

    def test_coerce_cell_scalars(self):
        assert coerce_cell(True) == "true"
        assert coerce_cell(False) == "false"
        assert coerce_cell(None) == ""
        assert coerce_cell(7) == "7"
        with pytest.raises(TableError):
            coerce_cell(["nested"])


# printable text without JSON-hostile control characters
_cell_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=12
)


@given(
    cols=st.lists(_cell_text, min_size=1, max_size=5),
    data=st.data(),
    title=_cell_text,
)
def test_roundtrip_property(cols, data, title):
    n_rows = data.draw(st.integers(min_value=0, max_value=4))
    rows = [
        tuple(data.draw(_cell_text) for _ in cols) for _ in range(n_rows)
    ]
    t = Table(
        id="prop",
        title=title,
        description="",
        column_names=tuple(cols),
        rows=tuple(rows),
    )
    assert parse_table(write_table(t)) == t


class TestColumnKinds:
    def test_ninety_percent_rule_boundary(self):
        # 9 numeric out of 10 non-empty cells is exactly at threshold
        rows = tuple(("1",) for _ in range(9)) + (("zz",),)
        t = Table(
            id="x", title="", description="", column_names=("v",), rows=rows
        )
        assert infer_column_kinds(t) == [ColumnKind.NUMERICAL]

    def test_below_threshold_is_textual(self):
        rows = tuple(("1",) for _ in range(8)) + (("zz",), ("yy",))
        t = Table(
            id="x", title="", description="", column_names=("v",), rows=rows
        )
        assert infer_column_kinds(t) == [ColumnKind.TEXTUAL]

    def test_empty_cells_excluded_from_denominator(self):
        rows = (("1",), ("",), ("2",), ("  ",))
        t = Table(
            id="x", title="", description="", column_names=("v",), rows=rows
        )
        assert infer_column_kinds(t) == [ColumnKind.NUMERICAL]

    def test_all_empty_column_is_textual(self):
        t = Table(
            id="x",
            title="",
            description="",
            column_names=("v",),
            rows=(("",), ("",)),
        )
        assert infer_column_kinds(t) == [ColumnKind.TEXTUAL]

    def test_no_rows_is_textual(self):
        t = Table(
            id="x", title="", description="", column_names=("v",), rows=()
        )
        assert infer_column_kinds(t) == [ColumnKind.TEXTUAL]

    def test_table_level_classification(self, text_table, numeric_table):
        assert not is_numerical_table(text_table)
        assert is_numerical_table(numeric_table)

    def test_threshold_configurable(self):
        rows = (("1",), ("zz",))
        t = Table(
            id="x", title="", description="", column_names=("v",), rows=rows
        )
        assert not is_numerical_table(t)
        assert is_numerical_table(t, numeric_fraction=0.5)


class TestCorpusRecord:
    def test_generated_requires_provenance(self, text_table):
        with pytest.raises(ValueError, match="provenance"):
            CorpusRecord(table=text_table, source=RecordSource.GENERATED)

    def test_anchor_must_not_carry_provenance(self, text_table):
        with pytest.raises(ValueError, match="must not"):
            CorpusRecord(
                table=text_table,
                source=RecordSource.ANCHOR,
                provenance="plan",
            )

    def test_valid_records(self, text_table):
        CorpusRecord(table=text_table, source=RecordSource.BACKGROUND)
        CorpusRecord(
            table=text_table,
            source=RecordSource.GENERATED,
            provenance="update",
        )
