"""On-disk formats for interest points, descriptors and signature matrices.

All binary data is little-endian. CSV floats use 17 significant digits so
they round-trip exactly.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .detect import InterestPoint
from .exceptions import CorruptFile, ParseError

POINTS_HEADER = ["x", "y", "t", "scale", "response"]
SIGNATURE_SIDECAR_HEADER = ["clip_id", "label", "row_index"]


def fmt_float(x):
    return format(float(x), ".17g")


def write_points(points, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POINTS_HEADER)
        for p in points:
            w.writerow([p.x, p.y, p.t, fmt_float(p.scale), fmt_float(p.response)])


def read_points(path):
    points = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != POINTS_HEADER:
            raise ParseError(1, f"expected header {','.join(POINTS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                x, y, t, scale, response = row
                points.append(InterestPoint(int(x), int(y), int(t), float(scale), float(response)))
            except ValueError:
                raise ParseError(lineno, "malformed point row") from None
    return points


def _descriptor_dtype(dim):
    return np.dtype([("x", "<u4"), ("y", "<u4"), ("t", "<u4"), ("values", "<f8", (dim,))])


def write_descriptors(described, path, dim=640):
    """``described`` is a list of ``(InterestPoint, descriptor)`` pairs."""
    if described:
        dim = len(described[0][1])
    records = np.zeros(len(described), dtype=_descriptor_dtype(dim))
    for i, (p, d) in enumerate(described):
        records[i] = (p.x, p.y, p.t, d)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(described)))
        fh.write(records.tobytes())


def read_descriptors(path, dim=640):
    """Returns ``(coords, values)``: an (N, 3) ``x, y, t`` array and an (N, dim) array."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise CorruptFile(f"{path}: missing record count")
    (n,) = struct.unpack_from("<Q", raw)
    body = len(raw) - 8
    if n:
        if body % n or (body // n - 12) % 8:
            raise CorruptFile(f"{path}: {body} bytes is not a whole number of records")
        dim = (body // n - 12) // 8
    elif body:
        raise CorruptFile(f"{path}: trailing bytes after an empty record list")
    records = np.frombuffer(raw, dtype=_descriptor_dtype(dim), count=n, offset=8)
    coords = np.column_stack([records["x"], records["y"], records["t"]]).astype(np.int64)
    return coords.reshape(n, 3), np.array(records["values"], dtype=np.float64).reshape(n, dim)


def write_signature_matrix(matrix, path):
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    rows, cols = matrix.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", rows, cols))
        fh.write(matrix.tobytes())


def read_signature_matrix(path):
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise CorruptFile(f"{path}: missing shape header")
    rows, cols = struct.unpack_from("<QQ", raw)
    if len(raw) != 16 + 8 * rows * cols:
        raise CorruptFile(f"{path}: expected {rows}x{cols} doubles")
    return np.frombuffer(raw, dtype="<f8", offset=16).reshape(rows, cols).astype(np.float64)


def sidecar_path(path):
    path = Path(path)
    return path.with_name(path.name + ".csv")


def write_signature_sidecar(rows, path):
    """``rows``: ``(clip_id, label, row_index)`` with ``row_index`` -1 for clips without a signature."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SIGNATURE_SIDECAR_HEADER)
        w.writerows(rows)


def read_signature_sidecar(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != SIGNATURE_SIDECAR_HEADER:
            raise ParseError(1, f"expected header {','.join(SIGNATURE_SIDECAR_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                clip_id, label, idx = row
                out.append((clip_id, label, int(idx)))
            except ValueError:
                raise ParseError(lineno, "malformed sidecar row") from None
    return out


def write_signatures(signatures, clip_ids, labels, path, dim=640):
    """Write present signatures as a matrix plus a sidecar covering every clip."""
    present = [s for s in signatures if s is not None]
    matrix = np.stack(present) if present else np.empty((0, dim))
    sidecar, row = [], 0
    for s, cid, lab in zip(signatures, clip_ids, labels):
        sidecar.append((cid, lab, row if s is not None else -1))
        row += s is not None
    write_signature_matrix(matrix, path)
    write_signature_sidecar(sidecar, sidecar_path(path))


def read_signatures(path):
    """Inverse of :func:`write_signatures`: ``(signatures_or_None, clip_ids, labels)``."""
    matrix = read_signature_matrix(path)
    side = read_signature_sidecar(sidecar_path(path))
    sigs = [matrix[i] if i >= 0 else None for _, _, i in side]
    return sigs, [c for c, _, _ in side], [lab for _, lab, _ in side]
