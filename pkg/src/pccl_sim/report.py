"""Versioned tabular output with fixed float formatting."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

SCHEMAS = {
    "benchmark": (
        "topology", "n_ranks", "algorithm", "primitive", "buffer_bytes", "reconf_delay_s",
        "total_s", "alpha_s", "beta_s", "reconf_s", "n_reconfigs",
    ),
    "endtoend": (
        "topology", "n_ranks", "backend", "reconf_delay_s", "makespan_s", "throughput_per_s", "n_reconfigs",
    ),
}


class ReportError(ValueError):
    pass


@dataclass
class Table:
    schema: str
    rows: list = field(default_factory=list)

    @property
    def columns(self) -> tuple:
        return SCHEMAS[self.schema]

    def add(self, **row):
        missing = set(self.columns) ^ set(row)
        if missing:
            raise ReportError(f"row fields differ from {self.schema} schema: {sorted(missing)}")
        self.rows.append(tuple(row[c] for c in self.columns))

    def records(self) -> list:
        return [dict(zip(self.columns, r)) for r in self.rows]


def fmt(x):
    """Floats at 9 significant digits; everything else unchanged."""
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return x
        return float(f"{x:.9g}")
    return x


def _round_tree(doc):
    if isinstance(doc, dict):
        return {k: _round_tree(v) for k, v in doc.items()}
    if isinstance(doc, (list, tuple)):
        return [_round_tree(v) for v in doc]
    return fmt(doc)


def dumps_json(doc: dict) -> str:
    return json.dumps(_round_tree(doc), indent=1, sort_keys=True) + "\n"


def table_to_json(t: Table) -> str:
    return dumps_json({"schema": t.schema, "version": SCHEMA_VERSION, "columns": list(t.columns), "rows": t.rows})


def table_to_csv(t: Table) -> str:
    buf = io.StringIO()
    buf.write(f"# schema={t.schema} version={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.columns)
    for r in t.rows:
        w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def emit(t: Table, fmt_name: str, path: str) -> None:
    if fmt_name not in ("csv", "json"):
        raise ReportError(f"unknown format {fmt_name!r}")
    text = table_to_csv(t) if fmt_name == "csv" else table_to_json(t)
    try:
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as e:
        raise ReportError(f"cannot write {path}: {e}") from e


def _check_header(schema, version):
    if schema not in SCHEMAS:
        raise ReportError(f"unknown schema {schema!r}")
    if version != SCHEMA_VERSION:
        raise ReportError(f"unsupported {schema} version {version!r}")


def _coerce(v: str):
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    return v


def load_table(text: str) -> Table:
    """Parse CSV or JSON produced by :func:`emit`."""
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        _check_header(doc.get("schema"), doc.get("version"))
        if tuple(doc["columns"]) != SCHEMAS[doc["schema"]]:
            raise ReportError("column list does not match schema")
        return Table(doc["schema"], [tuple(r) for r in doc["rows"]])
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ReportError("missing schema line")
    meta = dict(kv.split("=", 1) for kv in lines[0][2:].split())
    try:
        version = int(meta.get("version", ""))
    except ValueError:
        version = meta.get("version")
    _check_header(meta.get("schema"), version)
    reader = csv.reader(lines[1:])
    header = tuple(next(reader))
    if header != SCHEMAS[meta["schema"]]:
        raise ReportError("CSV header does not match schema")
    return Table(meta["schema"], [tuple(_coerce(v) for v in r) for r in reader])
