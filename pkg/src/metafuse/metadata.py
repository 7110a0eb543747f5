"""Encoding of heterogeneous patient metadata into fixed-width numeric vectors.

Each declared column is numeric, datetime, or categorical.  Numeric values
pass through unchanged.  Datetimes in ``yyyy-MM-dd hh:mm:ss`` form expand to
six slots ``[year, month, day, hour, minute, second]``.  Categorical strings
map to a 0-based index assigned in ascending lexicographic order of the
distinct values observed when the schema was built.  Missing entries encode
as the sentinel ``-1`` (all six slots for a missing datetime), which keeps
every encoded entry finite.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import EncodingError, SchemaError

KINDS = ("numeric", "datetime", "categorical")
MISSING_VALUE = -1.0
DATETIME_FORMAT = "%Y-%m-%d %H:%M:%S"
DATE_FORMAT = "%Y-%m-%d"
DATETIME_SLOTS = ("year", "month", "day", "hour", "minute", "second")

# Tokens the table loaders interpret as a missing entry (case-insensitive).
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none"})


def is_missing(value) -> bool:
    if value is None:
        return True
    if isinstance(value, float) and math.isnan(value):
        return True
    return False


@dataclass(frozen=True)
class MetadataRecord:
    """One sample's raw metadata: a sample id plus column -> value."""

    sample_id: str
    values: dict

    def get(self, column: str):
        return self.values.get(column)


@dataclass(frozen=True)
class SchemaColumn:
    name: str
    kind: str
    # categorical only: category string -> 0-based index
    categories: dict | None = None

    @property
    def width(self) -> int:
        return 6 if self.kind == "datetime" else 1

    def expanded_names(self) -> list[str]:
        if self.kind == "datetime":
            return [f"{self.name}.{slot}" for slot in DATETIME_SLOTS]
        return [self.name]


@dataclass(frozen=True)
class MetadataSchema:
    columns: tuple
    index_base: int = 0

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate column names in schema: {names}")
        for col in self.columns:
            if col.kind not in KINDS:
                raise SchemaError(f"column '{col.name}' has unknown kind '{col.kind}'")
            if col.kind == "categorical":
                idx = sorted((col.categories or {}).values())
                if idx != list(range(len(idx))):
                    raise SchemaError(
                        f"column '{col.name}' categorical indices are not "
                        f"contiguous from {self.index_base}: {idx}"
                    )

    @property
    def width(self) -> int:
        return sum(c.width for c in self.columns)

    def expanded_names(self) -> list[str]:
        out = []
        for col in self.columns:
            out.extend(col.expanded_names())
        return out

    def column(self, name: str) -> SchemaColumn:
        for col in self.columns:
            if col.name == name:
                return col
        raise SchemaError(f"schema has no column '{name}'")

    def to_json(self, path) -> None:
        doc = {
            "index_base": self.index_base,
            "encoded_width": self.width,
            "columns": [
                {"name": c.name, "kind": c.kind, "categories": c.categories}
                for c in self.columns
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")

    @classmethod
    def from_json(cls, path) -> "MetadataSchema":
        doc = json.loads(Path(path).read_text())
        cols = tuple(
            SchemaColumn(c["name"], c["kind"], c.get("categories"))
            for c in doc["columns"]
        )
        return cls(columns=cols, index_base=doc.get("index_base", 0))


def _check_value(column: str, kind: str, value, sample_id: str) -> None:
    """Raise SchemaError when a value's type contradicts the declared kind."""
    if is_missing(value):
        return
    if kind == "numeric":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(
                f"column '{column}' declared numeric but sample "
                f"'{sample_id}' holds {value!r}"
            )
        if not math.isfinite(float(value)):
            raise SchemaError(
                f"column '{column}' declared numeric but sample "
                f"'{sample_id}' holds non-finite {value!r}"
            )
    elif kind == "datetime":
        if not isinstance(value, str):
            raise SchemaError(
                f"column '{column}' declared datetime but sample "
                f"'{sample_id}' holds {value!r}"
            )
        _parse_datetime(column, value, sample_id, SchemaError)
    elif kind == "categorical":
        if not isinstance(value, str):
            raise SchemaError(
                f"column '{column}' declared categorical but sample "
                f"'{sample_id}' holds {value!r}"
            )
    else:
        raise SchemaError(f"column '{column}' has unknown kind '{kind}'")


def _parse_datetime(column: str, value: str, sample_id: str, err_cls):
    for fmt in (DATETIME_FORMAT, DATE_FORMAT):
        try:
            return datetime.strptime(value, fmt)
        except ValueError:
            continue
    raise err_cls(
        f"column '{column}', sample '{sample_id}': cannot parse datetime "
        f"{value!r} (expected 'yyyy-MM-dd hh:mm:ss' or 'yyyy-MM-dd')"
    )


def build_schema(records, kinds) -> MetadataSchema:
    """Build a schema from records and ordered column-kind declarations.

    ``kinds`` is an ordered mapping (or sequence of pairs) of column name to
    one of ``numeric`` / ``datetime`` / ``categorical``.  Every record must
    carry exactly the declared columns.  Categorical indices are assigned in
    ascending lexicographic order of the observed distinct values; missing
    entries contribute no category.
    """
    kinds = dict(kinds)
    if not kinds:
        raise SchemaError("no columns declared")
    for name, kind in kinds.items():
        if kind not in KINDS:
            raise SchemaError(f"column '{name}' has unknown kind '{kind}'")

    declared = set(kinds)
    observed = {name: set() for name in kinds}
    for rec in records:
        cols = set(rec.values)
        if cols != declared:
            extra = sorted(cols - declared)
            gone = sorted(declared - cols)
            raise SchemaError(
                f"sample '{rec.sample_id}' columns disagree with declaration "
                f"(unexpected {extra}, missing {gone})"
            )
        for name, kind in kinds.items():
            value = rec.values[name]
            _check_value(name, kind, value, rec.sample_id)
            if kind == "categorical" and not is_missing(value):
                observed[name].add(value)

    columns = []
    for name, kind in kinds.items():
        cats = None
        if kind == "categorical":
            cats = {c: i for i, c in enumerate(sorted(observed[name]))}
        columns.append(SchemaColumn(name=name, kind=kind, categories=cats))
    return MetadataSchema(columns=tuple(columns))


def encode_record(record: MetadataRecord, schema: MetadataSchema) -> np.ndarray:
    """Encode one record to a length-``schema.width`` float vector."""
    out = np.empty(schema.width, dtype=np.float64)
    pos = 0
    for col in schema.columns:
        if col.name not in record.values:
            raise EncodingError(
                f"sample '{record.sample_id}' is missing column '{col.name}'"
            )
        value = record.values[col.name]
        if col.kind == "numeric":
            if is_missing(value):
                out[pos] = MISSING_VALUE
            else:
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise EncodingError(
                        f"column '{col.name}', sample '{record.sample_id}': "
                        f"expected a number, got {value!r}"
                    )
                v = float(value)
                if not math.isfinite(v):
                    out[pos] = MISSING_VALUE
                else:
                    out[pos] = v
            pos += 1
        elif col.kind == "datetime":
            if is_missing(value):
                out[pos : pos + 6] = MISSING_VALUE
            else:
                if not isinstance(value, str):
                    raise EncodingError(
                        f"column '{col.name}', sample '{record.sample_id}': "
                        f"expected a datetime string, got {value!r}"
                    )
                dt = _parse_datetime(col.name, value, record.sample_id, EncodingError)
                out[pos : pos + 6] = (
                    dt.year, dt.month, dt.day, dt.hour, dt.minute, dt.second,
                )
            pos += 6
        else:  # categorical
            if is_missing(value):
                out[pos] = MISSING_VALUE
            else:
                if not isinstance(value, str):
                    raise EncodingError(
                        f"column '{col.name}', sample '{record.sample_id}': "
                        f"expected a category string, got {value!r}"
                    )
                cats = col.categories or {}
                if value not in cats:
                    raise EncodingError(
                        f"column '{col.name}', sample '{record.sample_id}': "
                        f"unknown category {value!r} (known: {sorted(cats)})"
                    )
                out[pos] = float(cats[value])
            pos += 1
    return out


def encode_table(records, schema: MetadataSchema) -> np.ndarray:
    """Encode records in order into an ``N x schema.width`` float matrix."""
    records = list(records)
    out = np.empty((len(records), schema.width), dtype=np.float64)
    for i, rec in enumerate(records):
        out[i] = encode_record(rec, schema)
    return out


def load_schema_declaration(path):
    """Read a declaration file: ``{"columns": {name: kind}, "exclude": [...]}``.

    Returns ``(ordered dict name -> kind, exclusion list)``.
    """
    doc = json.loads(Path(path).read_text())
    if "columns" not in doc or not isinstance(doc["columns"], dict):
        raise SchemaError(f"declaration {path} lacks a 'columns' mapping")
    exclude = doc.get("exclude", [])
    kinds = {n: k for n, k in doc["columns"].items() if n not in set(exclude)}
    if not kinds:
        raise SchemaError(f"declaration {path} declares no usable columns")
    return kinds, list(exclude)


def _coerce_token(token: str, kind: str):
    if token.strip().lower() in MISSING_TOKENS:
        return None
    if kind == "numeric":
        try:
            return float(token)
        except ValueError:
            # leave as string; build_schema/encode will name the offender
            return token
    return token


def load_metadata_table(path, kinds) -> list:
    """Load records from CSV (header row) or JSON-lines, typed per ``kinds``.

    A ``sample_id`` column is required.  Columns not named in ``kinds`` are
    dropped.  Missing entries are empty/NA-like tokens in CSV and ``null`` in
    JSON-lines.
    """
    path = Path(path)
    kinds = dict(kinds)
    records = []
    if path.suffix.lower() in (".jsonl", ".ndjson"):
        for line_no, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            row = json.loads(line)
            if "sample_id" not in row:
                raise SchemaError(f"{path}:{line_no}: row lacks 'sample_id'")
            values = {}
            for name in kinds:
                v = row.get(name)
                values[name] = None if is_missing(v) else v
            records.append(MetadataRecord(str(row["sample_id"]), values))
    else:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "sample_id" not in reader.fieldnames:
                raise SchemaError(f"{path}: CSV header must include 'sample_id'")
            for row in reader:
                values = {}
                for name, kind in kinds.items():
                    if name not in row or row[name] is None:
                        values[name] = None
                    else:
                        values[name] = _coerce_token(row[name], kind)
                records.append(MetadataRecord(row["sample_id"], values))
    return records
