import json
import math

import numpy as np
import pytest

from metafuse import (
    EncodingError,
    MetadataRecord,
    MetadataSchema,
    SchemaError,
    build_schema,
    encode_record,
    encode_table,
    load_metadata_table,
    load_schema_declaration,
)
from metafuse.metadata import SchemaColumn

KINDS3 = {"age": "numeric", "sex": "categorical", "site": "categorical"}


def _records(rows):
    return [MetadataRecord(f"s{i}", dict(row)) for i, row in enumerate(rows)]


def test_datetime_expands_to_six_calendar_slots():
    records = _records([{"when": "2001-05-28 12:49:25"}])
    schema = build_schema(records, {"when": "datetime"})
    vec = encode_record(records[0], schema)
    assert vec.tolist() == [2001, 5, 28, 12, 49, 25]


def test_date_only_strings_pad_time_slots_with_zero():
    records = _records([{"when": "2001-05-28"}])
    schema = build_schema(records, {"when": "datetime"})
    assert encode_record(records[0], schema).tolist() == [2001, 5, 28, 0, 0, 0]


def test_missing_values_encode_as_minus_one():
    records = _records(
        [
            {"age": 60.0, "sex": "male", "site": "torso"},
            {"age": None, "sex": None, "site": None},
        ]
    )
    schema = build_schema(records, KINDS3)
    assert encode_record(records[1], schema).tolist() == [-1.0, -1.0, -1.0]


def test_missing_datetime_fills_all_six_slots_with_minus_one():
    records = _records([{"when": "2001-05-28 12:49:25"}, {"when": None}])
    schema = build_schema(records, {"when": "datetime"})
    assert encode_record(records[1], schema).tolist() == [-1.0] * 6


def test_numeric_values_pass_through_unchanged():
    records = _records([{"age": 42.5}])
    schema = build_schema(records, {"age": "numeric"})
    assert encode_record(records[0], schema).tolist() == [42.5]


def test_nan_numeric_encodes_as_missing():
    records = _records([{"age": float("nan")}, {"age": 3.0}])
    schema = build_schema(records, {"age": "numeric"})
    assert encode_record(records[0], schema).tolist() == [-1.0]


def test_categories_indexed_in_lexicographic_order():
    records = _records([{"sex": "male"}, {"sex": "female"}, {"sex": "female"}])
    schema = build_schema(records, {"sex": "categorical"})
    assert schema.column("sex").categories == {"female": 0, "male": 1}


def test_missing_entries_contribute_no_category():
    records = _records([{"site": "torso"}, {"site": None}, {"site": "arm"}])
    schema = build_schema(records, {"site": "categorical"})
    assert schema.column("site").categories == {"arm": 0, "torso": 1}


def test_numeric_column_gets_no_category_table():
    records = _records([{"age": 1.0}, {"age": 2.0}])
    schema = build_schema(records, {"age": "numeric"})
    col = schema.column("age")
    assert col.kind == "numeric" and col.categories is None


def test_mixed_record_encodes_by_column_rules():
    records = _records(
        [
            {"age": 60, "sex": "male", "site": "torso"},
            {"age": 30, "sex": "female", "site": "arm"},
            {"age": None, "sex": "female", "site": None},
        ]
    )
    schema = build_schema(records, KINDS3)
    assert encode_record(records[0], schema).tolist() == [60.0, 1.0, 1.0]


def test_encoded_width_counts_six_slots_per_datetime():
    records = _records([{"a": 1.0, "b": "2020-01-02", "c": "x"}])
    schema = build_schema(records, {"a": "numeric", "b": "datetime", "c": "categorical"})
    assert schema.width == 1 + 6 + 1
    assert schema.expanded_names() == [
        "a",
        "b.year",
        "b.month",
        "b.day",
        "b.hour",
        "b.minute",
        "b.second",
        "c",
    ]


def test_encode_table_stacks_one_row_per_record_in_order():
    records = _records([{"age": 1.0}, {"age": 2.0}])
    schema = build_schema(records, {"age": "numeric"})
    table = encode_table(records, schema)
    assert table.shape == (2, 1)
    reversed_table = encode_table(records[::-1], schema)
    assert np.array_equal(reversed_table, table[::-1])


def test_encode_table_of_no_records_is_empty_with_schema_width():
    records = _records([{"age": 1.0, "when": "2020-01-01"}])
    schema = build_schema(records, {"age": "numeric", "when": "datetime"})
    assert encode_table([], schema).shape == (0, 7)


def test_unknown_category_error_names_column_and_known_values():
    records = _records([{"sex": "male"}, {"sex": "female"}])
    schema = build_schema(records, {"sex": "categorical"})
    with pytest.raises(EncodingError, match=r"sex.*'other'.*female.*male"):
        encode_record(MetadataRecord("sX", {"sex": "other"}), schema)


def test_build_schema_rejects_records_with_undeclared_columns():
    records = _records([{"age": 1.0, "extra": 2.0}])
    with pytest.raises(SchemaError, match="extra"):
        build_schema(records, {"age": "numeric"})


def test_build_schema_rejects_records_with_missing_columns():
    records = _records([{"age": 1.0}])
    with pytest.raises(SchemaError, match="sex"):
        build_schema(records, {"age": "numeric", "sex": "categorical"})


def test_build_schema_rejects_value_contradicting_declared_kind():
    records = _records([{"age": "forty"}])
    with pytest.raises(SchemaError, match="age.*'forty'"):
        build_schema(records, {"age": "numeric"})


def test_booleans_are_not_numeric():
    records = _records([{"flag": True}])
    with pytest.raises(SchemaError, match="flag"):
        build_schema(records, {"flag": "numeric"})


def test_unparseable_datetime_is_rejected_with_location():
    records = _records([{"when": "28/05/2001"}])
    with pytest.raises(SchemaError, match="when.*28/05/2001"):
        build_schema(records, {"when": "datetime"})


def test_unknown_kind_is_rejected():
    with pytest.raises(SchemaError, match="ordinal"):
        build_schema(_records([{"x": 1.0}]), {"x": "ordinal"})


def test_schema_round_trips_through_json(tmp_path):
    records = _records(
        [{"age": 60, "sex": "male", "site": "torso"},
         {"age": 30, "sex": "female", "site": "arm"}]
    )
    schema = build_schema(records, KINDS3)
    schema.to_json(tmp_path / "schema.json")
    loaded = MetadataSchema.from_json(tmp_path / "schema.json")
    assert loaded == schema
    assert np.array_equal(
        encode_table(records, loaded), encode_table(records, schema)
    )


def test_schema_rejects_duplicate_column_names():
    cols = (SchemaColumn("a", "numeric"), SchemaColumn("a", "numeric"))
    with pytest.raises(SchemaError, match="duplicate"):
        MetadataSchema(columns=cols)


def test_schema_rejects_noncontiguous_category_indices():
    cols = (SchemaColumn("c", "categorical", {"x": 0, "y": 2}),)
    with pytest.raises(SchemaError, match="contiguous"):
        MetadataSchema(columns=cols)


def test_csv_loader_types_tokens_and_maps_missing_markers(tmp_path):
    path = tmp_path / "meta.csv"
    path.write_text(
        "sample_id,age,sex,when\n"
        "a,42.5,male,2001-05-28 12:49:25\n"
        "b,NA,,null\n"
    )
    kinds = {"age": "numeric", "sex": "categorical", "when": "datetime"}
    records = load_metadata_table(path, kinds)
    assert [r.sample_id for r in records] == ["a", "b"]
    assert records[0].values == {
        "age": 42.5,
        "sex": "male",
        "when": "2001-05-28 12:49:25",
    }
    assert records[1].values == {"age": None, "sex": None, "when": None}


def test_csv_loader_requires_sample_id_column(tmp_path):
    path = tmp_path / "meta.csv"
    path.write_text("age\n42\n")
    with pytest.raises(SchemaError, match="sample_id"):
        load_metadata_table(path, {"age": "numeric"})


def test_csv_loader_drops_undeclared_columns(tmp_path):
    path = tmp_path / "meta.csv"
    path.write_text("sample_id,age,junk\na,1,zzz\n")
    records = load_metadata_table(path, {"age": "numeric"})
    assert records[0].values == {"age": 1.0}


def test_jsonl_loader_reads_typed_values(tmp_path):
    path = tmp_path / "meta.jsonl"
    path.write_text(
        json.dumps({"sample_id": "a", "age": 42.5, "sex": "male"})
        + "\n"
        + json.dumps({"sample_id": "b", "age": None, "sex": None})
        + "\n"
    )
    records = load_metadata_table(path, {"age": "numeric", "sex": "categorical"})
    assert records[0].values == {"age": 42.5, "sex": "male"}
    assert records[1].values == {"age": None, "sex": None}


def test_declaration_loader_applies_exclusions(tmp_path):
    path = tmp_path / "decl.json"
    path.write_text(
        json.dumps(
            {
                "columns": {"age": "numeric", "sex": "categorical", "id2": "numeric"},
                "exclude": ["id2"],
            }
        )
    )
    kinds, excluded = load_schema_declaration(path)
    assert kinds == {"age": "numeric", "sex": "categorical"}
    assert excluded == ["id2"]


def test_encoded_values_are_always_finite():
    rows = [
        {"age": 60, "sex": "male", "site": "torso"},
        {"age": None, "sex": None, "site": None},
        {"age": 1e12, "sex": "female", "site": "arm"},
    ]
    records = _records(rows)
    schema = build_schema(records, KINDS3)
    table = encode_table(records, schema)
    assert np.all(np.isfinite(table))
    assert math.isfinite(table.max())
