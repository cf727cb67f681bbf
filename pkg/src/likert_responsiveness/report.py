"""Report serialisation: canonical JSON, flat CSV and curve plots.

JSON output is byte-stable: key order is fixed by construction, floats are
written with 9 significant digits and non-finite values become ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path
from typing import Any, Mapping, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .responsiveness import CURVE_KINDS, CurvePoints

SCHEMA_VERSION = "1.0"

CSV_METRICS = ("mpa", "wra", "hm", "tau_b", "tau_a", "spearman_rho", "auroc", "aucpr", "mokken_h")
CSV_INTERVALS = ("mpa", "wra", "hm")
CSV_COLUMNS = (
    ("group", "reference_kind", "tag", "defined", "n_raters", "n_items", "pair_count")
    + CSV_METRICS
    + tuple(f"{m}_{end}" for m in CSV_INTERVALS for end in ("lo", "hi"))
    + ("note",)
)


def fmt_float(x: float | None) -> str | None:
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    if x == 0:
        return "0"
    return format(x, ".9g")


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        text = fmt_float(obj)
        return "null" if text is None else text
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        parts = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(parts) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        parts = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text (insertion-ordered keys, 9 significant digits)."""
    return _encode(obj, indent, 0) + "\n"


def write_json(obj: Any, path: str | Path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


# CSV report -----------------------------------------------------------------

def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value) or ""
    return str(value)


def csv_rows(rows: Sequence[Mapping]) -> list[list[str]]:
    out = []
    for row in rows:
        metrics = {**row["metrics"], **row["baselines"]}
        cells = {
            "group": row["group"],
            "reference_kind": row["reference_kind"],
            "tag": "" if row["tag"] is None else f"{row['tag']['name']}={row['tag']['value']}",
            "defined": row["defined"],
            "n_raters": row["n_raters"],
            "n_items": row["n_items"],
            "pair_count": row["pair_count"],
            "note": row["note"],
        }
        for m in CSV_METRICS:
            cells[m] = metrics.get(m)
        for m in CSV_INTERVALS:
            ci = row["intervals"].get(m) or {}
            cells[f"{m}_lo"], cells[f"{m}_hi"] = ci.get("lo"), ci.get("hi")
        out.append([_cell(cells[c]) for c in CSV_COLUMNS])
    return out


def write_csv_report(rows: Sequence[Mapping], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(csv_rows(rows))


def read_csv_report(path: str | Path) -> list[dict]:
    """Parse a CSV report back into typed values (empty cells become ``None``)."""
    ints = {"n_raters", "n_items", "pair_count"}
    floats = set(CSV_METRICS) | {c for c in CSV_COLUMNS if c.endswith(("_lo", "_hi"))}
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            row: dict[str, Any] = {}
            for k, v in rec.items():
                if k in ints:
                    row[k] = int(v) if v else None
                elif k in floats:
                    row[k] = float(v) if v else None
                elif k == "defined":
                    row[k] = v == "true"
                else:
                    row[k] = v
            out.append(row)
    return out


# Curves ---------------------------------------------------------------------

def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_") or "all"


def curves_csv(curves: Mapping[str, CurvePoints]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("kind", "s", "y"))
    for kind in CURVE_KINDS:
        c = curves[kind]
        for x, y in zip(c.xs, c.ys):
            w.writerow((kind, int(x), fmt_float(y) or ""))
    return buf.getvalue()


_COLORS = {"precision": "#1f77b4", "recall": "#ff7f0e", "y_so": "#2ca02c", "y_d": "#d62728"}


def _segments(xs, ys):
    seg = []
    for x, y in zip(xs, ys):
        if y is None or not math.isfinite(y):
            if seg:
                yield seg
            seg = []
        else:
            seg.append((float(x), float(y)))
    if seg:
        yield seg


def curves_svg(curves: Mapping[str, CurvePoints], title: str) -> str:
    """Line chart of all curves on an 800x500 canvas; undefined points leave gaps."""
    width, height = 800, 500
    left, right, top, bottom = 60, 160, 40, 50
    pw, ph = width - left - right, height - top - bottom
    x_max = max(int(c.xs.max()) for c in curves.values())
    finite = [float(y) for c in curves.values() for y in c.ys if math.isfinite(y)]
    y_lo = min([0.0] + finite)
    y_hi = max([1.0] + finite)

    def px(x):
        return left + pw * x / max(x_max, 1)

    def py(y):
        return top + ph * (1 - (y - y_lo) / (y_hi - y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" width="{width}" height="{height}">',
        f'<title>{escape(title)}</title>',
        f'<text x="{left}" y="24" font-size="16" font-family="sans-serif">{escape(title)}</text>',
        f'<line x1="{left}" y1="{py(y_lo):.2f}" x2="{left + pw}" y2="{py(y_lo):.2f}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for x in range(x_max + 1):
        out.append(f'<line x1="{px(x):.2f}" y1="{top + ph}" x2="{px(x):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(x):.2f}" y="{top + ph + 20}" font-size="12" text-anchor="middle" font-family="sans-serif">{x}</text>')
    for k in range(5):
        y = y_lo + (y_hi - y_lo) * k / 4
        out.append(f'<text x="{left - 8}" y="{py(y) + 4:.2f}" font-size="12" text-anchor="end" font-family="sans-serif">{y:.2f}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 10}" font-size="12" text-anchor="middle" font-family="sans-serif">score s</text>')
    for i, kind in enumerate(CURVE_KINDS):
        c = curves[kind]
        color = _COLORS[kind]
        out.append(f'<g class="curve" data-kind="{kind}">')
        for seg in _segments(c.xs, c.ys):
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in seg)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        out.append("</g>")
        ly = top + 20 * i
        out.append(f'<line x1="{left + pw + 15}" y1="{ly}" x2="{left + pw + 35}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 4}" font-size="12" font-family="sans-serif">{kind}</text>')
    out.append(
        f'<text x="{left + pw + 15}" y="{top + 20 * len(CURVE_KINDS) + 10}" font-size="10" font-family="sans-serif">'
        "raw values, not shifted</text>"
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
