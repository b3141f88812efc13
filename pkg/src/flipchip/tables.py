"""CSV/JSON plumbing shared by the readers, writers and the CLI."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import InputFormatError

NUMBER_FORMAT = "{:.12g}"


def fmt(value) -> str:
    if isinstance(value, float):
        return NUMBER_FORMAT.format(value)
    return str(value)


def _text(source) -> str:
    if hasattr(source, "read"):
        return source.read()
    return Path(source).read_text()


def read_rows(source, header: Sequence[str]) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(line_number, fields)`` for each data row.

    Lines starting with ``#`` are metadata and skipped; the first other
    line must equal ``header``.
    """
    lines = _text(source).splitlines()
    body = [(i, line) for i, line in enumerate(lines, start=1) if line.strip() and not line.startswith("#")]
    if not body:
        raise InputFormatError("empty file")
    first_no, first = body[0]
    got = [h.strip() for h in next(csv.reader([first]))]
    if got != list(header):
        raise InputFormatError(f"expected header {','.join(header)!r}, got {first!r}", line=first_no)
    for lineno, line in body[1:]:
        fields = [f.strip() for f in next(csv.reader([line]))]
        if len(fields) != len(header):
            raise InputFormatError(f"expected {len(header)} fields, got {len(fields)}", line=lineno)
        yield lineno, fields


def parse_floats(lineno: int, fields: Sequence[str]) -> list[float]:
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise InputFormatError(f"non-numeric field in {','.join(fields)!r}", line=lineno) from None


def csv_text(header: Sequence[str], rows: Iterable[Sequence], meta: str | None = None) -> str:
    buf = io.StringIO()
    if meta:
        buf.write(f"# {meta}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n"


def write_atomic(path: str | Path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path
