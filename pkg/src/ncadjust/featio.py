"""Feature file formats.

Binary (little-endian)::

    magic   4s   b"NCFB"
    version u16  1
    kind    u8   0 train, 1 test, 2 validation
    K       u32
    d       u32
    N       u64
    N records of (label u32, d x f64)

CSV: header ``label,f0,...,f{d-1}`` then one sample per row.
"""

import csv
import math
import struct
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError
from .simulator import FeatureSet, Kind
from .stats import ClassStats

MAGIC = b"NCFB"
VERSION = 1
_HEADER = struct.Struct("<4sHBIIQ")
_KIND_CODES = {Kind.TRAIN: 0, Kind.TEST: 1, Kind.VALIDATION: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def _record_dtype(d):
    return np.dtype([("label", "<u4"), ("x", "<f8", (d,))])


def write_binary(path, fs):
    N, d = fs.features.shape
    rec = np.empty(N, dtype=_record_dtype(d))
    rec["label"] = fs.labels
    rec["x"] = fs.features
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, _KIND_CODES[fs.kind], fs.num_classes, d, N))
        fh.write(rec.tobytes())


def read_binary(path):
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ParseError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, kind, K, d, N = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r} at offset 0")
    if version != VERSION:
        raise ParseError(f"{path}: unsupported version {version} at offset 4")
    if kind not in _CODE_KINDS:
        raise ParseError(f"{path}: unknown kind code {kind} at offset 6")
    if d < 1:
        raise ParseError(f"{path}: feature dimension 0 at offset 11")
    dt = _record_dtype(d)
    expected = _HEADER.size + N * dt.itemsize
    if len(data) != expected:
        raise ParseError(f"{path}: expected {expected} bytes for N={N}, d={d}, got {len(data)}")
    rec = np.frombuffer(data, dtype=dt, offset=_HEADER.size, count=N)
    labels = rec["label"].astype(np.int64)
    bad = np.flatnonzero(labels >= K)
    if bad.size:
        i = int(bad[0])
        raise ParseError(
            f"{path}: record {i} (offset {_HEADER.size + i * dt.itemsize}) has label {labels[i]} >= K={K}"
        )
    x = np.array(rec["x"], dtype=np.float64)
    nonfinite = np.argwhere(~np.isfinite(x))
    if nonfinite.size:
        i, j = (int(v) for v in nonfinite[0])
        offset = _HEADER.size + i * dt.itemsize + 4 + 8 * j
        raise ParseError(f"{path}: non-finite value in record {i}, column {j} (offset {offset})")
    return FeatureSet(x, labels, _CODE_KINDS[kind], K)


def write_csv(path, fs):
    d = fs.feature_dim
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f{j}" for j in range(d)])
        for label, row in zip(fs.labels.tolist(), fs.features.tolist()):
            w.writerow([label] + [repr(v) for v in row])


def read_csv(path, num_classes=None, kind=Kind.TRAIN):
    """Parse a CSV feature file.

    Without ``num_classes`` the class count is taken as ``max(label) + 1``.
    Line numbers in errors are 1-based and count the header.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "label" or len(header) < 2:
            raise ParseError(f"{path}: line 1: header must be 'label,f0,...'")
        d = len(header) - 1
        if header[1:] != [f"f{j}" for j in range(d)]:
            raise ParseError(f"{path}: line 1: feature columns must be named f0..f{d - 1}")
        labels, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 1:
                raise ParseError(f"{path}: line {lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                label = int(row[0])
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if label < 0 or (num_classes is not None and label >= num_classes):
                raise ParseError(f"{path}: line {lineno}: label {label} out of range")
            for j, v in enumerate(values):
                if not math.isfinite(v):
                    raise ParseError(f"{path}: line {lineno}: non-finite value in column f{j}")
            labels.append(label)
            rows.append(values)
    if num_classes is None:
        num_classes = max(labels) + 1 if labels else 0
    x = np.array(rows, dtype=np.float64).reshape(len(rows), d)
    return FeatureSet(x, np.array(labels, dtype=np.int64), kind, num_classes)


def ingest(path, num_classes=None, kind=None):
    """Load a feature file (binary or CSV, detected by magic).

    Returns ``(features, stats)``. Stats come from the file itself when it is
    a training split and are ``None`` otherwise.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        fs = read_binary(path)
        if num_classes is not None and num_classes != fs.num_classes:
            raise ParseError(f"{path}: header says K={fs.num_classes}, expected {num_classes}")
    else:
        fs = read_csv(path, num_classes, Kind(kind) if kind is not None else Kind.TRAIN)
    if fs.kind is not Kind.TRAIN:
        return fs, None
    return fs, ClassStats.from_features(fs.features, fs.labels, fs.num_classes)


def write_features(path, fs, fmt="binary"):
    if fmt == "binary":
        write_binary(path, fs)
    elif fmt == "csv":
        write_csv(path, fs)
    else:
        raise ContractError(f"unknown feature format {fmt!r}")
