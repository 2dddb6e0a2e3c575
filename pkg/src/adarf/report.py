"""Sweep point output as CSV, JSON or an aligned text table."""
from __future__ import annotations

import csv
import io
import json

from .sweep import ParetoPoint

COLUMNS = ("policy", "threshold", "B", "accuracy", "macro_acc", "avg_trees", "avg_cycles", "avg_energy_uj")
FORMATS = ("csv", "json", "table")


def _row(p: ParetoPoint) -> list:
    return [p.policy, p.threshold, p.batch, p.accuracy, p.macro_accuracy, p.avg_trees, p.avg_cycles, p.avg_energy_uj]


def _record(p: ParetoPoint) -> dict:
    d = dict(zip(COLUMNS, _row(p)))
    d.update(alpha=p.alpha, eps_minus=p.eps_minus, eps_plus=p.eps_plus)
    return d


def point_from_record(d: dict) -> ParetoPoint:
    return ParetoPoint(
        policy=d["policy"],
        batch=int(d["B"]),
        accuracy=float(d["accuracy"]),
        macro_accuracy=float(d["macro_acc"]),
        avg_trees=float(d["avg_trees"]),
        avg_cycles=float(d["avg_cycles"]),
        avg_energy_uj=float(d["avg_energy_uj"]),
        alpha=d.get("alpha"),
        eps_minus=d.get("eps_minus"),
        eps_plus=d.get("eps_plus"),
    )


def render(points, fmt: str = "csv") -> str:
    points = list(points)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for p in points:
            w.writerow([repr(v) if isinstance(v, float) else v for v in _row(p)])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([_record(p) for p in points], indent=1) + "\n"
    if fmt == "table":
        cells = [list(COLUMNS)]
        for p in points:
            r = _row(p)
            cells.append([r[0], r[1] or "-", str(r[2])] + [f"{v:.4f}" for v in r[3:6]] + [f"{r[6]:.1f}", f"{r[7]:.5f}"])
        widths = [max(len(row[i]) for row in cells) for i in range(len(COLUMNS))]
        return "".join("  ".join(c.rjust(wd) for c, wd in zip(row, widths)).rstrip() + "\n" for row in cells)
    raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def report(points, fmt: str = "csv", out=None) -> str:
    """Render ``points`` and write them to ``out`` (path or file object) if given."""
    text = render(points, fmt)
    if out is not None:
        if hasattr(out, "write"):
            out.write(text)
        else:
            with open(out, "w") as fh:
                fh.write(text)
    return text


def parse_json(text: str) -> list[ParetoPoint]:
    return [point_from_record(d) for d in json.loads(text)]
