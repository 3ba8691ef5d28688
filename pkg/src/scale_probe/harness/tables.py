"""CSV result tables: fixed columns, 17-significant-digit values, '#' metadata lines."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field


class SchemaError(ValueError):
    pass


class TableError(ValueError):
    pass


def fmt_value(v) -> str:
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


@dataclass
class ResultTable:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: list[tuple[str, str]] = field(default_factory=list)

    def add(self, row) -> None:
        row = tuple(row)
        if len(row) != len(self.columns):
            raise SchemaError(f"row has {len(row)} fields, schema has {len(self.columns)}")
        for col, v in zip(self.columns, row):
            if isinstance(v, float) and not math.isfinite(v):
                raise TableError(f"non-finite value in column {col!r}")
        self.rows.append(row)

    def to_text(self) -> str:
        buf = io.StringIO()
        for key, val in self.metadata:
            for line in str(val).splitlines() or [""]:
                buf.write(f"# {key}: {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([fmt_value(v) for v in row])
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_text())

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def _parse_cell(text: str):
    if text == "-0":
        # only a float prints as -0; keep the sign
        return -0.0
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_table(text: str) -> ResultTable:
    meta, body = [], []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta.append((key, val))
        elif line:
            body.append(line)
    if not body:
        raise SchemaError("table has no header row")
    reader = csv.reader(body)
    header = tuple(next(reader))
    table = ResultTable(header, metadata=meta)
    for row in reader:
        table.add(_parse_cell(c) for c in row)
    return table


def read_table(path) -> ResultTable:
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh.read())


@dataclass(frozen=True)
class CompareReport:
    max_abs: dict
    max_rel: dict
    flagged: list   # (row index, column, a, b)
    threshold: float

    @property
    def identical(self) -> bool:
        return not self.flagged and all(v == 0 for v in self.max_abs.values())

    def lines(self) -> list[str]:
        out = [f"column={c} max_abs={fmt_value(self.max_abs[c])} max_rel={fmt_value(self.max_rel[c])}"
               for c in self.max_abs]
        out += [f"FLAG row={i} column={c} a={a} b={b}" for i, c, a, b in self.flagged]
        return out


def compare_runs(a: ResultTable, b: ResultTable, threshold: float = 1e-9) -> CompareReport:
    """Per-column max absolute and relative deltas; a cell is flagged when either exceeds ``threshold``."""
    if a.columns != b.columns:
        raise SchemaError(f"column mismatch: {a.columns} vs {b.columns}")
    if len(a.rows) != len(b.rows):
        raise SchemaError(f"row count mismatch: {len(a.rows)} vs {len(b.rows)}")
    max_abs = {c: 0.0 for c in a.columns}
    max_rel = {c: 0.0 for c in a.columns}
    flagged = []
    for i, (ra, rb) in enumerate(zip(a.rows, b.rows)):
        for c, x, y in zip(a.columns, ra, rb):
            if isinstance(x, (int, float)) and isinstance(y, (int, float)):
                da = abs(float(x) - float(y))
                scale = max(abs(float(x)), abs(float(y)))
                dr = da / scale if scale > 0 else 0.0
            else:
                da = dr = 0.0 if x == y else math.inf
            max_abs[c] = max(max_abs[c], da)
            max_rel[c] = max(max_rel[c], dr)
            if da > threshold or dr > threshold:
                flagged.append((i, c, x, y))
    return CompareReport(max_abs, max_rel, flagged, threshold)
