"""CSV and JSON persistence.

Reals are written with ``repr`` (shortest round-trip form), so every
write/read cycle is exact. Readers raise CsvFormatError with the 1-based
row and column of the first bad cell.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .datalink import (
    CyberSnapshot,
    FusedRecord,
    IndexTable,
    PhysicalSnapshot,
    StateDataLink,
)
from .errors import CsvFormatError


def fmt(v: float) -> str:
    return repr(float(v))


def _read_rows(path):
    path = Path(path)
    with open(path, newline="") as fh:  # FileNotFoundError propagates
        rows = list(csv.reader(fh))
    if not rows or not rows[0]:
        raise CsvFormatError("missing header row", row=1, path=path)
    header = [h.strip() for h in rows[0]]
    body = []
    for i, r in enumerate(rows[1:], start=2):
        if not r:
            continue
        if len(r) != len(header):
            raise CsvFormatError(f"expected {len(header)} cells, found {len(r)}",
                                 row=i, path=path)
        body.append((i, r))
    return path, header, body


def _require(header, names, path):
    for j, name in enumerate(names):
        if j >= len(header) or header[j] != name:
            raise CsvFormatError(f"expected header {name!r}", row=1, column=j + 1, path=path)


def _float(cell, row, col, path):
    try:
        v = float(cell)
    except ValueError:
        raise CsvFormatError(f"non-numeric cell {cell!r}", row=row, column=col,
                             path=path) from None
    if not math.isfinite(v):
        raise CsvFormatError(f"non-finite cell {cell!r}", row=row, column=col, path=path)
    return v


def _int(cell, row, col, path):
    try:
        return int(cell)
    except ValueError:
        raise CsvFormatError(f"non-integer cell {cell!r}", row=row, column=col,
                             path=path) from None


def _write(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


# -- raw inputs ---------------------------------------------------------------

def read_physical(path) -> list[PhysicalSnapshot]:
    """timestamp,device_id,attr_1..attr_h"""
    path, header, body = _read_rows(path)
    _require(header, ["timestamp", "device_id"], path)
    if len(header) < 3:
        raise CsvFormatError("no attribute columns", row=1, column=3, path=path)
    out = []
    for i, r in body:
        attrs = tuple(_float(c, i, j + 3, path) for j, c in enumerate(r[2:]))
        out.append(PhysicalSnapshot(r[1], _float(r[0], i, 1, path), attrs))
    return out


def read_cyber(path) -> list[CyberSnapshot]:
    """timestamp,ip,r_dr,r_pr,w_th"""
    path, header, body = _read_rows(path)
    _require(header, ["timestamp", "ip", "r_dr", "r_pr", "w_th"], path)
    return [CyberSnapshot(r[1], _float(r[0], i, 1, path), _float(r[2], i, 3, path),
                          _float(r[3], i, 4, path), _float(r[4], i, 5, path))
            for i, r in body]


def read_index(path) -> IndexTable:
    """area,line,component_id,ip"""
    path, header, body = _read_rows(path)
    _require(header, ["area", "line", "component_id", "ip"], path)
    return IndexTable.from_rows(r[:4] for _, r in body)


def write_physical(rows: Sequence[PhysicalSnapshot], path):
    h = len(rows[0].attributes) if rows else 0
    return _write(path, ["timestamp", "device_id"] + [f"attr_{j + 1}" for j in range(h)],
                  ([fmt(s.timestamp), s.device_id] + [fmt(v) for v in s.attributes]
                   for s in rows))


def write_cyber(rows: Sequence[CyberSnapshot], path):
    return _write(path, ["timestamp", "ip", "r_dr", "r_pr", "w_th"],
                  ([fmt(s.timestamp), s.device_ip] + [fmt(v) for v in s.indicators]
                   for s in rows))


def write_index(index: IndexTable, path):
    return _write(path, ["area", "line", "component_id", "ip"],
                  ([e.area, e.line, e.component_id, e.ip] for e in index.rows))


# -- fused links --------------------------------------------------------------

LINK_HEAD = ["timestamp", "area", "line", "component_id", "ip", "repeat_count"]


def write_link(link: StateDataLink, path):
    """timestamp,area,line,component_id,ip,repeat_count,f_1..f_n[,label]"""
    labeled = any(r.label is not None for r in link.records)
    header = LINK_HEAD + [f"f_{j + 1}" for j in range(link.width)]
    if labeled:
        header.append("label")

    def rows():
        for r in link.records:
            row = [fmt(r.timestamp), r.area, r.line, r.component_id, r.ip,
                   str(r.repeat_count)] + [fmt(v) for v in r.features]
            if labeled:
                row.append("" if r.label is None else r.label)
            yield row
    return _write(path, header, rows())


def read_link(path) -> StateDataLink:
    path, header, body = _read_rows(path)
    _require(header, LINK_HEAD, path)
    labeled = header[-1] == "label"
    feat = header[len(LINK_HEAD):len(header) - labeled]
    for j, name in enumerate(feat):
        if name != f"f_{j + 1}":
            raise CsvFormatError(f"expected header 'f_{j + 1}'", row=1,
                                 column=len(LINK_HEAD) + j + 1, path=path)
    if not feat:
        raise CsvFormatError("no feature columns", row=1, column=len(LINK_HEAD) + 1, path=path)
    recs = []
    for i, r in body:
        base = len(LINK_HEAD)
        f = tuple(_float(r[base + j], i, base + j + 1, path) for j in range(len(feat)))
        recs.append(FusedRecord(
            timestamp=_float(r[0], i, 1, path), area=r[1], line=r[2],
            component_id=r[3], ip=r[4], repeat_count=_int(r[5], i, 6, path),
            features=f, label=(r[-1] or None) if labeled else None))
    ts = [rec.timestamp for rec in recs]
    for k in range(1, len(ts)):
        if ts[k] < ts[k - 1]:
            raise CsvFormatError("timestamps must be non-decreasing", row=k + 2,
                                 column=1, path=path)
    return StateDataLink(tuple(recs))


# -- labeled matrices (balanced data, predictions) -----------------------------

def read_labeled_matrix(path):
    """Feature matrix, labels and repeat weights from any CSV with f_* columns.

    Works for fused links and balanced datasets. Rows without a label keep
    an empty string.
    """
    path, header, body = _read_rows(path)
    cols = [j for j, h in enumerate(header) if h.startswith("f_")]
    if not cols:
        raise CsvFormatError("no f_* feature columns", row=1, path=path)
    lab = header.index("label") if "label" in header else None
    rep = header.index("repeat_count") if "repeat_count" in header else None
    X = np.empty((len(body), len(cols)))
    y, w = [], np.ones(len(body))
    for n, (i, r) in enumerate(body):
        for k, j in enumerate(cols):
            X[n, k] = _float(r[j], i, j + 1, path)
        y.append(r[lab] if lab is not None else "")
        if rep is not None:
            w[n] = _int(r[rep], i, rep + 1, path)
    return X, np.array(y, dtype=object), w


def write_balanced(ds, path):
    """label,synthetic,source_index,neighbor_index,eta,f_1..f_n"""
    header = ["label", "synthetic", "source_index", "neighbor_index", "eta"] + \
        [f"f_{j + 1}" for j in range(ds.X.shape[1])]
    return _write(path, header, (
        [str(ds.y[i]), str(int(ds.synthetic[i])), str(int(ds.source_index[i])),
         str(int(ds.neighbor_index[i])), "" if np.isnan(ds.eta[i]) else fmt(ds.eta[i])]
        + [fmt(v) for v in ds.X[i]]
        for i in range(len(ds.y))))


def write_predictions(labels, proba, classes, path):
    """label,p_<class>... one row per test record."""
    return _write(path, ["label"] + [f"p_{c}" for c in classes],
                  ([str(t)] + [fmt(v) for v in p] for t, p in zip(labels, proba)))


def read_predictions(path):
    path, header, body = _read_rows(path)
    _require(header, ["label"], path)
    classes = []
    for j, h in enumerate(header[1:], start=2):
        if not h.startswith("p_"):
            raise CsvFormatError(f"expected a p_<class> header, found {h!r}", row=1,
                                 column=j, path=path)
        classes.append(h[2:])
    P = np.array([[_float(c, i, j + 2, path) for j, c in enumerate(r[1:])] for i, r in body])
    return [r[0] for _, r in body], P.reshape(len(body), len(classes)), classes


def write_rows(path, header, rows):
    return _write(path, header, rows)


# -- JSON ---------------------------------------------------------------------

def write_json(obj, path):
    """Deterministic JSON (sorted keys); floats use the round-trip repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
