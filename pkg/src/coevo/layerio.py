"""CSV encodings of a single layer.

Two formats are understood:

* edge list: header ``i,j,w`` then one ``i,j,w`` row per positive entry,
  1-based node labels;
* dense: a first row holding ``n``, then ``n`` rows of ``n`` values.

Weights are written with 17 significant digits so a write/read cycle is exact.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ParseError
from .netgraph import LayerMatrix


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_edge_list(layer: LayerMatrix, path) -> None:
    w = layer.weights
    with open(path, "w", newline="") as f:
        out = csv.writer(f, lineterminator="\n")
        out.writerow(["i", "j", "w"])
        for i, j in np.argwhere(w != 0):
            out.writerow([i + 1, j + 1, _fmt(w[i, j])])


def write_dense(layer: LayerMatrix, path) -> None:
    with open(path, "w", newline="") as f:
        out = csv.writer(f, lineterminator="\n")
        out.writerow([layer.n])
        for row in layer.weights:
            out.writerow([_fmt(v) for v in row])


def _float(tok: str, lineno: int, path) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"{path}: line {lineno}: cannot parse number {tok!r}") from None


def _read_edges(rows, path, n=None) -> LayerMatrix:
    entries = []
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(f"{path}: line {lineno}: expected 3 fields i,j,w, got {len(row)}")
        try:
            i, j = int(row[0]), int(row[1])
        except ValueError:
            raise ParseError(f"{path}: line {lineno}: node labels must be integers") from None
        if i < 1 or j < 1:
            raise ParseError(f"{path}: line {lineno}: node labels are 1-based")
        entries.append((i - 1, j - 1, _float(row[2], lineno, path)))
    if not entries:
        raise ParseError(f"{path}: edge list has no entries")
    size = n or max(max(i, j) for i, j, _ in entries) + 1
    w = np.zeros((size, size))
    for i, j, v in entries:
        if i >= size or j >= size:
            raise ParseError(f"{path}: node label out of range for n={size}")
        w[i, j] = v
    return LayerMatrix(w)


def _read_dense(rows, path) -> LayerMatrix:
    lineno, head = rows[0]
    try:
        n = int(head[0])
    except ValueError:
        raise ParseError(f"{path}: line {lineno}: first row must hold n") from None
    body = rows[1:]
    if len(body) != n:
        raise ParseError(f"{path}: expected {n} matrix rows, found {len(body)}")
    w = np.empty((n, n))
    for k, (lineno, row) in enumerate(body):
        if len(row) != n:
            raise ParseError(f"{path}: line {lineno}: expected {n} values, got {len(row)}")
        w[k] = [_float(tok, lineno, path) for tok in row]
    return LayerMatrix(w)


def read_layer(path, n=None) -> LayerMatrix:
    """Read either CSV layer format, detected from the first row."""
    path = Path(path)
    with open(path, newline="") as f:
        rows = [(k + 1, [t.strip() for t in r]) for k, r in enumerate(csv.reader(f)) if any(t.strip() for t in r)]
    if not rows:
        raise ParseError(f"{path}: empty file")
    head = rows[0][1]
    if [h.lower() for h in head] == ["i", "j", "w"]:
        return _read_edges(rows[1:], path, n)
    if len(head) == 1:
        return _read_dense(rows, path)
    raise ParseError(f"{path}: line 1: unrecognised header {','.join(head)!r}")
