"""Deterministic report rendering and bundle-file I/O.

Reports must be byte-identical for identical inputs, so every float is
formatted at 17 significant digits (enough to round-trip an IEEE double) and
mappings serialize in insertion order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math

import numpy as np

from .core import DrawBundle, NumericalError, ValidationError

__all__ = [
    "format_float",
    "render_document",
    "render_table",
    "file_digest",
    "ingest_bundle",
    "write_bundle_csv",
]


def format_float(x: float) -> str:
    """17-significant-digit decimal form; round-trips any finite double."""
    if not math.isfinite(x):
        raise NumericalError(f"cannot serialize non-finite value {x!r}")
    return f"{x:.17g}"


def _render(obj, indent: int, out: list) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for i, (key, value) in enumerate(items):
            out.append(f'{pad}  "{key}": ')
            _render(value, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            out.append("[]")
            return
        simple = all(isinstance(v, (int, float, str, bool)) or v is None for v in obj)
        if simple:
            parts = []
            for v in obj:
                sub: list = []
                _render(v, 0, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
        else:
            out.append("[\n")
            for i, value in enumerate(obj):
                out.append(pad + "  ")
                _render(value, indent + 1, out)
                out.append(",\n" if i < len(obj) - 1 else "\n")
            out.append(pad + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(format_float(float(obj)))
    elif isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
        out.append(f'"{escaped}"')
    else:
        raise ValidationError(f"cannot serialize value of type {type(obj).__name__!r}")


def render_document(doc: dict) -> str:
    """JSON-style text with stable key order and fixed float formatting."""
    out: list = []
    _render(doc, 0, out)
    out.append("\n")
    return "".join(out)


def render_table(rows, columns) -> str:
    """CSV text for a list of row dicts; floats at 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        rendered = []
        for col in columns:
            value = row.get(col, "")
            if isinstance(value, (float, np.floating)):
                rendered.append(format_float(float(value)))
            elif isinstance(value, (int, np.integer)):
                rendered.append(str(int(value)))
            else:
                rendered.append("" if value is None else str(value))
        writer.writerow(rendered)
    return buf.getvalue()


def file_digest(path: str) -> str:
    """Content hash of the input file, recorded in every report."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _expected_header(n_cols: int) -> list[str]:
    return ["g"] + [f"ll_{i}" for i in range(1, n_cols)]


def ingest_bundle(path: str, sampling_kind: str = "unknown") -> DrawBundle:
    """Read a draw bundle from CSV: header `g,ll_1,...,ll_N`, one row per draw.

    Decimal points, scientific notation accepted; no grouping separators.
    Errors carry the 1-based (row, column) location of the first bad value.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise ValidationError(f"cannot open bundle file {path!r}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: file is empty (expected header g,ll_1,...,ll_N)") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header != _expected_header(len(header)):
            raise ValidationError(
                f"{path}: bad header {','.join(header)!r}; expected g,ll_1,...,ll_N in order"
            )
        n_cols = len(header)
        rows: list[list[float]] = []
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != n_cols:
                raise ValidationError(
                    f"{path}: row {row_idx} has {len(row)} fields, expected {n_cols}"
                )
            parsed = []
            for col_idx, field in enumerate(row):
                try:
                    value = float(field)
                except ValueError:
                    raise ValidationError(
                        f"{path}: unparseable value {field!r} at row {row_idx}, "
                        f"column {header[col_idx]}"
                    ) from None
                if not math.isfinite(value):
                    raise ValidationError(
                        f"{path}: non-finite value {field!r} at row {row_idx}, "
                        f"column {header[col_idx]}"
                    )
                parsed.append(value)
            rows.append(parsed)
    if len(rows) < 2:
        raise ValidationError(f"{path}: need at least 2 draws, found {len(rows)}")
    data = np.asarray(rows)
    return DrawBundle(g_values=data[:, 0], loglik=data[:, 1:], sampling_kind=sampling_kind)


def write_bundle_csv(path: str, bundle: DrawBundle) -> None:
    """Write a bundle in the ingest format; values round-trip exactly."""
    data = np.column_stack([bundle.g_values, bundle.loglik])
    np.savetxt(
        path,
        data,
        fmt="%.17g",
        delimiter=",",
        header=",".join(_expected_header(bundle.n_obs + 1)),
        comments="",
    )
