"""Connection-record files described by a JSON schema sidecar."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from ..errors import ParseError, SchemaError

ROLES = ("timestamp", "feature", "label", "ignore")
TYPES = ("categorical", "numeric")
BUCKETING = ("none", "log2")


@dataclass(frozen=True)
class Column:
    name: str
    role: str = "feature"
    type: str = "categorical"
    bucketing: str = "none"
    # label columns: values that mean "no attack"; anything else flags the record
    normal_values: tuple = ("0",)

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: role must be one of {ROLES}")
        if self.type not in TYPES:
            raise SchemaError(f"column {self.name!r}: type must be one of {TYPES}")
        if self.bucketing not in BUCKETING:
            raise SchemaError(f"column {self.name!r}: bucketing must be one of {BUCKETING}")
        if self.bucketing != "none" and self.type != "numeric":
            raise SchemaError(f"column {self.name!r}: only numeric columns can be bucketed")


@dataclass(frozen=True)
class Schema:
    columns: tuple[Column, ...]
    delimiter: str = "\t"
    header: bool = True

    def __post_init__(self):
        roles = [c.role for c in self.columns]
        if roles.count("timestamp") != 1:
            raise SchemaError("schema needs exactly one timestamp column")
        if "label" not in roles:
            raise SchemaError("schema needs at least one label column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")

    @property
    def width(self) -> int:
        return len(self.columns)

    @property
    def feature_columns(self) -> list[Column]:
        return [c for c in self.columns if c.role == "feature"]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.feature_columns]

    def to_dict(self) -> dict:
        return {
            "delimiter": self.delimiter,
            "header": self.header,
            "columns": [{**asdict(c), "normal_values": list(c.normal_values)} for c in self.columns],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Schema":
        try:
            cols = tuple(
                Column(**{**c, "normal_values": tuple(str(v) for v in c.get("normal_values", ("0",)))})
                for c in raw["columns"]
            )
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema: {exc}") from exc
        return cls(cols, raw.get("delimiter", "\t"), bool(raw.get("header", True)))


def load_schema(path) -> Schema:
    try:
        return Schema.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema file is not valid JSON: {exc}") from exc


def save_schema(schema: Schema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2))


# Field layout of the public Kyoto honeypot logs: 14 statistical fields, the
# four detector/label fields, endpoints, start time and protocol.  The start
# time is the record timestamp; the other 20 non-verification fields feed the
# entropy features.
_KYOTO_FIELDS = [
    ("duration", "feature", "numeric", "log2"),
    ("service", "feature", "categorical", "none"),
    ("src_bytes", "feature", "numeric", "log2"),
    ("dst_bytes", "feature", "numeric", "log2"),
    ("count", "feature", "numeric", "none"),
    ("same_srv_rate", "feature", "categorical", "none"),
    ("serror_rate", "feature", "categorical", "none"),
    ("srv_serror_rate", "feature", "categorical", "none"),
    ("dst_host_count", "feature", "numeric", "none"),
    ("dst_host_srv_count", "feature", "numeric", "none"),
    ("dst_host_same_src_port_rate", "feature", "categorical", "none"),
    ("dst_host_serror_rate", "feature", "categorical", "none"),
    ("dst_host_srv_serror_rate", "feature", "categorical", "none"),
    ("flag", "feature", "categorical", "none"),
    ("ids_detection", "label", "categorical", "none"),
    ("malware_detection", "label", "categorical", "none"),
    ("ashula_detection", "label", "categorical", "none"),
    ("label", "label", "categorical", "none"),
    ("src_ip", "feature", "categorical", "none"),
    ("src_port", "feature", "categorical", "none"),
    ("dst_ip", "feature", "categorical", "none"),
    ("dst_port", "feature", "categorical", "none"),
    ("start_time", "timestamp", "numeric", "none"),
    ("protocol", "feature", "categorical", "none"),
    ("timeslot", "feature", "numeric", "none"),
]


def kyoto_schema() -> Schema:
    """Default schema for Kyoto-style logs (documented assumption).

    Detector fields are normal when "0"; the Label field is normal when "1"
    (the corpus marks attacks with -1 and -2).  The timestamp is seconds;
    ``timeslot`` (the second-of-minute of the start time) is the twentieth
    analysis feature.
    """
    cols = []
    for name, role, typ, bucket in _KYOTO_FIELDS:
        normal = ("1",) if name == "label" else ("0",)
        cols.append(Column(name, role, typ, bucket, normal))
    return Schema(tuple(cols))


@dataclass(frozen=True)
class ConnectionRecord:
    """One parsed line: timestamp, raw feature strings, attack flag."""

    timestamp: float
    features: tuple[str, ...]
    attack_label: int
    raw: tuple[str, ...] = field(default=(), compare=False, repr=False)


def _parse_line(fields: list[str], schema: Schema, line_no: int) -> ConnectionRecord:
    ts = None
    feats = []
    attack = 0
    for col, val in zip(schema.columns, fields):
        if col.role == "timestamp":
            try:
                ts = float(val)
            except ValueError:
                raise ParseError(f"bad timestamp {val!r}", line_no) from None
        elif col.role == "feature":
            if col.type == "numeric":
                try:
                    float(val)
                except ValueError:
                    raise ParseError(f"column {col.name!r}: not a number: {val!r}", line_no) from None
            feats.append(val)
        elif col.role == "label" and val.strip() not in col.normal_values:
            attack = 1
    return ConnectionRecord(ts, tuple(feats), attack, tuple(fields))


def parse_connections(path, schema: Schema, on_error: str = "abort") -> Iterator[ConnectionRecord]:
    """Stream records from a delimiter-separated file.

    ``on_error`` is ``"abort"`` (raise :class:`ParseError`) or ``"skip"``
    (warn and continue).  A line with the wrong number of fields raises
    :class:`SchemaError` either way, since it means the schema does not
    describe the file.  Timestamps must be nondecreasing.
    """
    if on_error not in ("abort", "skip"):
        raise SchemaError("on_error must be 'abort' or 'skip'")
    last_ts = float("-inf")
    with open(path, newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if line_no == 1 and schema.header:
                names = line.split(schema.delimiter)
                if names != [c.name for c in schema.columns]:
                    raise SchemaError(f"header does not match schema: {names}")
                continue
            if not line.strip():
                continue
            fields = line.split(schema.delimiter)
            if len(fields) != schema.width:
                raise SchemaError(
                    f"line {line_no}: expected {schema.width} fields, found {len(fields)}"
                )
            try:
                rec = _parse_line(fields, schema, line_no)
                if rec.timestamp < last_ts:
                    raise ParseError(f"timestamp {rec.timestamp} goes backwards", line_no)
            except ParseError as exc:
                if on_error == "abort":
                    raise
                warnings.warn(f"skipping malformed record: {exc}", stacklevel=2)
                continue
            last_ts = rec.timestamp
            yield rec


def write_connections(records: Iterable[ConnectionRecord], path, schema: Schema) -> int:
    """Write records (using their raw fields) in the schema's layout; returns the count."""
    n = 0
    with open(path, "w", newline="") as fh:
        if schema.header:
            fh.write(schema.delimiter.join(c.name for c in schema.columns) + "\n")
        for rec in records:
            if len(rec.raw) != schema.width:
                raise SchemaError(f"record has {len(rec.raw)} raw fields, schema expects {schema.width}")
            fh.write(schema.delimiter.join(rec.raw) + "\n")
            n += 1
    return n
