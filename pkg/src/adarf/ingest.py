"""Feature-vector CSV ingestion and export."""
from __future__ import annotations

import csv
import math

import numpy as np

from .forest import Dataset

_MISSING = {"", "na", "nan", "null", "none", "?"}


class ParseError(ValueError):
    pass


def _label_text(cell: str) -> str:
    cell = cell.strip()
    try:
        v = float(cell)
    except ValueError:
        return cell
    if math.isfinite(v) and v == int(v):
        return str(int(v))
    return cell


def _split_rows(text: str, delimiter):
    lines = text.splitlines()
    if delimiter is None:
        first = next((ln for ln in lines if ln.strip()), "")
        delimiter = "," if "," in first else ("\t" if "\t" in first else " ")
    if delimiter == " ":
        for lineno, line in enumerate(lines, 1):
            if line.strip():
                yield lineno, line.split()
    else:
        for lineno, row in enumerate(csv.reader(lines, delimiter=delimiter), 1):
            if row and any(c.strip() for c in row):
                yield lineno, [c.strip() for c in row]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def ingest_csv(path, label_column=-1, header=None, delimiter=None, classes=None, positive_labels=None) -> Dataset:
    """Read a numeric feature table with one label column.

    ``label_column`` is a column index (negative counts from the end) or a
    header name. ``header=None`` detects a header row from non-numeric cells.
    Labels become dense ids in first-seen order unless ``classes`` fixes the
    order. ``positive_labels`` collapses the labels to a binary task:
    listed labels become class ``"1"``, everything else class ``"0"``.
    """
    with open(path, newline="") as fh:
        text = fh.read()
    rows = list(_split_rows(text, delimiter))
    if not rows:
        raise ParseError(f"{path}: no data rows")

    names = None
    first_line, first = rows[0]
    if header is None:
        header = isinstance(label_column, str) or not all(
            _is_number(c) for i, c in enumerate(first) if i != label_column % len(first)
        )
    if header:
        names = first
        rows = rows[1:]
        if not rows:
            raise ParseError(f"{path}: header but no data rows")
    width = len(names) if names else len(rows[0][1])
    if isinstance(label_column, str):
        if names is None or label_column not in names:
            raise ParseError(f"{path}: label column {label_column!r} not in header")
        label_idx = names.index(label_column)
    else:
        if not -width <= label_column < width:
            raise ParseError(f"{path}: label column {label_column} out of range for {width} columns")
        label_idx = label_column % width

    feats = np.empty((len(rows), width - 1))
    raw_labels = []
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: line {lineno}: expected {width} columns, got {len(row)}")
        c_out = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                if cell.strip().lower() in _MISSING:
                    raise ParseError(f"{path}: line {lineno}, column {c + 1}: missing label")
                raw_labels.append(_label_text(cell))
                continue
            if cell.lower() in _MISSING:
                raise ParseError(f"{path}: line {lineno}, column {c + 1}: missing value")
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: line {lineno}, column {c + 1}: non-numeric value {cell!r}") from None
            if not math.isfinite(v):
                raise ParseError(f"{path}: line {lineno}, column {c + 1}: non-finite value {cell!r}")
            feats[r, c_out] = v
            c_out += 1

    if positive_labels is not None:
        pos = {_label_text(str(p)) for p in positive_labels}
        raw_labels = ["1" if lab in pos else "0" for lab in raw_labels]
        if classes is None:
            classes = ("0", "1")

    if classes is None:
        classes = tuple(dict.fromkeys(raw_labels))
    else:
        classes = tuple(str(c) for c in classes)
        unknown = sorted(set(raw_labels) - set(classes))
        if unknown:
            raise ParseError(f"{path}: labels {unknown} not among known classes {list(classes)}")
    if len(classes) < 2:
        classes = classes + ("<absent>",) * (2 - len(classes))
    ids = {name: i for i, name in enumerate(classes)}
    labels = np.array([ids[lab] for lab in raw_labels], dtype=np.int64)
    return Dataset(feats, labels, len(classes), classes)


def write_csv(data: Dataset, path) -> None:
    names = data.class_names or tuple(str(i) for i in range(data.num_classes))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(data.n_features)] + ["label"])
        for x, y in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in x] + [names[y]])
