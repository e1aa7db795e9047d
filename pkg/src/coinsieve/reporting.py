"""CSV and JSON writers with deterministic formatting.

Every report is a list of flat rows plus a small header of parameters. The
same inputs always serialise to the same bytes: keys are sorted, floats use
``repr`` and nothing time-dependent is written.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from importlib import resources

import mpmath
import numpy as np

from coinsieve import SCHEMA_TAG, __version__


def scalar(value):
    """Map a result value onto a JSON scalar.

    Fractions become ``"p/q"`` strings so they survive exactly; an mpf that
    a float64 represents exactly becomes a number, otherwise a decimal string
    carrying its full precision.
    """
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else str(value.numerator)
    if isinstance(value, mpmath.mpf):
        f = float(value)
        if mpmath.mpf(f) == value:
            return f
        bits = max(int(value.man).bit_length(), 53)
        return mpmath.nstr(value, int(bits * 0.30103), strip_zeros=False)
    if isinstance(value, (float, np.floating)):
        return float(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _cell(value) -> str:
    v = scalar(value)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict], partial: bool = False) -> str:
    """RFC 4180 text with a header row; a ``partial`` column marks cut-off runs."""
    buf = io.StringIO(newline="")
    if not rows:
        return ""
    fields = list(rows[0])
    if partial:
        fields.append("partial")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(fields)
    for row in rows:
        cells = [_cell(row.get(f)) for f in fields if f != "partial"]
        if partial:
            cells.append("true")
        writer.writerow(cells)
    return buf.getvalue()


def to_json(command: str, params: dict, rows: list[dict], summary: dict | None = None,
            partial: bool = False) -> str:
    doc = {
        "schema": SCHEMA_TAG,
        "version": __version__,
        "command": command,
        "params": {k: scalar(v) for k, v in params.items()},
        "partial": bool(partial),
        "rows": [{k: scalar(v) for k, v in row.items()} for row in rows],
        "summary": {k: scalar(v) for k, v in (summary or {}).items()},
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_schema() -> dict:
    text = resources.files("coinsieve").joinpath("schemas/coinsieve-v1.schema.json").read_text()
    return json.loads(text)
