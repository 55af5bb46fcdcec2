"""Bundle emission: number formatting, JSON/CSV writers, and the text report."""
from __future__ import annotations

import csv
import io
import math
from decimal import Decimal
from typing import Any, Mapping, Optional

from .metrics import SCALARS

SIG_DIGITS = 6


def fmt_number(x: float) -> str:
    """Fixed notation, 6 significant digits, trailing zeros stripped.

    >>> fmt_number(0.94081234), fmt_number(1.5e-7), fmt_number(1234567.0)
    ('0.940812', '0.00000015', '1234570')
    """
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot format non-finite number {x!r}")
    if x == 0:
        return "0"
    d = Decimal(f"{x:.{SIG_DIGITS - 1}e}")
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _json(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, float)):
        if isinstance(obj, float) and not math.isfinite(obj):
            return "null"
        return fmt_number(obj)
    if isinstance(obj, str):
        import json
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k), indent, level + 1)}: {_json(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str)) or v is None for v in obj):
            return "[" + ", ".join(_json(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _json(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return _json(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON text with the bundle's number format."""
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj: Any) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(obj))


def _cell(v) -> str:
    return "" if v is None else fmt_number(v)


def aggregate_csv(summary: Mapping) -> str:
    """One row per engine x metric: mean, std, min, max."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["engine", "metric", "n", "mean", "std", "min", "max"])
    for engine, metrics in summary.items():
        for k in SCALARS:
            s = metrics[k]
            w.writerow([engine, k, s["n"], _cell(s["mean"]), _cell(s["std"]),
                        _cell(s["min"]), _cell(s["max"])])
    return buf.getvalue()


def write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# --- aligned text table ---------------------------------------------------------------

LABELS = {"tii": "TII", "sae": "SAE", "sae_star": "SAE*", "ital": "ITAL", "acf": "ACF",
          "trp": "TRP", "ass": "ASS", "precision": "Precision", "recall": "Recall",
          "f1": "F1", "fpr": "FPR", "fnr": "FNR"}


def deltas(base: Optional[float], sb: Optional[float]) -> tuple:
    """(absolute, relative %) change from baseline to securebank; relative is None at 0."""
    if base is None or sb is None:
        return None, None
    rel = (sb - base) / base * 100.0 if base != 0 else None
    return sb - base, rel


def _pm(s: Mapping) -> str:
    if s.get("mean") is None:
        return "n/a"
    return f"{s['mean']:.4f} ± {s['std']:.4f}"


def render_table(aggregate: Mapping, tests: Optional[Mapping] = None) -> str:
    """Baseline | SecureBank | absolute delta | relative delta (| p-value)."""
    summary = aggregate["summary"]
    base, sb = summary["baseline"], summary["securebank"]
    header = ["Metric", "Baseline", "SecureBank", "Abs. Δ", "Rel. Δ"]
    if tests:
        header.append("p-value")
    rows = [header]
    for k in SCALARS:
        a, r = deltas(base[k]["mean"], sb[k]["mean"])
        row = [LABELS[k], _pm(base[k]), _pm(sb[k]),
               "n/a" if a is None else f"{a:+.4f}",
               "n/a" if r is None else f"{r:+.2f}%"]
        if tests:
            t = tests.get("tests", {}).get(k)
            row.append("" if t is None else f"{t['p_value']:.3g} ({t['test']})")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for n, r in enumerate(rows):
        cells = [r[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(r[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    runs = aggregate.get("n_runs")
    title = f"Aggregate metrics ({runs} runs)" if runs else "Aggregate metrics"
    out = [title, ""] + lines
    if tests:
        out += ["", f"Bonferroni threshold: {tests['bonferroni_threshold']:.6f} "
                    f"(family of {tests['family_size']})"]
    return "\n".join(out) + "\n"
