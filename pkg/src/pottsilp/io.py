"""PGM/PPM images and CSV files for signals, labels and edge weights."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .grid import as_image, as_signal

_WS = b" \t\r\n"


def _header_fields(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    fields: list[bytes] = []
    pos = 0
    while len(fields) < count:
        while pos < len(data) and data[pos] in _WS:
            pos += 1
        if pos >= len(data):
            raise ValueError("truncated PNM header")
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos] not in _WS and data[pos : pos + 1] != b"#":
            pos += 1
        fields.append(data[start:pos])
    return fields, pos


def parse_pnm(data: bytes) -> np.ndarray:
    """Decode P2/P5 graymaps and P3/P6 pixmaps to a float image in [0, 255].

    Color is reduced with the fixed luminance weights 0.299, 0.587, 0.114.
    Sample values are rescaled when maxval is not 255.
    """
    magic = data[:2]
    if magic not in (b"P2", b"P5", b"P3", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    (w, h, maxval), pos = _header_fields(data[2:], 3)
    width, height, maxval = int(w), int(h), int(maxval)
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ValueError(f"bad PNM header: {width}x{height}, maxval {maxval}")
    channels = 3 if magic in (b"P3", b"P6") else 1
    count = width * height * channels
    body = data[2 + pos:]
    if magic in (b"P2", b"P3"):
        values = np.array(body.split(), dtype=np.float64)
        if values.size < count:
            raise ValueError("truncated ASCII PNM body")
        values = values[:count]
    else:
        body = body[1:]  # single whitespace byte after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = count * dtype.itemsize
        if len(body) < need:
            raise ValueError("truncated binary PNM body")
        values = np.frombuffer(body[:need], dtype=dtype).astype(np.float64)
    if np.any(values > maxval):
        raise ValueError("sample exceeds maxval")
    if maxval != 255:
        values = values * (255.0 / maxval)
    if channels == 3:
        rgb = values.reshape(height, width, 3)
        img = rgb @ np.array([0.299, 0.587, 0.114])
    else:
        img = values.reshape(height, width)
    return as_image(img)


def read_pgm(path) -> np.ndarray:
    return parse_pnm(Path(path).read_bytes())


def to_gray8(image) -> np.ndarray:
    """Round to the nearest integer and clamp to [0, 255]."""
    return np.clip(np.rint(np.asarray(image, dtype=float)), 0, 255).astype(np.uint8)


def format_pgm(image, binary: bool = True, comments: tuple[str, ...] = ()) -> bytes:
    pix = to_gray8(image)
    if pix.ndim == 1:
        pix = pix.reshape(1, -1)
    h, w = pix.shape
    head = [b"P5" if binary else b"P2"]
    head += [f"# {c}".encode() for c in comments]
    head += [f"{w} {h}".encode(), b"255"]
    header = b"\n".join(head) + b"\n"
    if binary:
        return header + pix.tobytes()
    rows = [" ".join(str(v) for v in row) for row in pix.tolist()]
    return header + ("\n".join(rows) + "\n").encode()


def write_pgm(path, image, binary: bool = True, comments: tuple[str, ...] = ()) -> None:
    Path(path).write_bytes(format_pgm(image, binary, comments))


def label_map_image(labels) -> np.ndarray:
    """Spread labels 0..k-1 evenly over 0..255 for viewing."""
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if labels.size else 1
    if k == 1:
        return np.zeros(labels.shape)
    return labels * (255.0 / (k - 1))


def read_signal_csv(path) -> np.ndarray:
    """Single column of reals; a non-numeric first line is taken as a header."""
    values = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if k == 0:
                    continue
                raise
    return as_signal(values)


def write_signal_csv(path, values) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for v in np.asarray(values, dtype=float).ravel():
            writer.writerow([repr(float(v))])


def fit1d_csv(y, w, labels) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "y", "w", "label"])
    for i, (yi, wi, li) in enumerate(zip(y, w, labels)):
        writer.writerow([i, repr(float(yi)), repr(float(wi)), int(li)])
    return buf.getvalue()


def labels_csv(labels) -> str:
    labels = np.asarray(labels)
    if labels.ndim == 1:
        labels = labels.reshape(1, -1)
    return "".join(",".join(str(int(v)) for v in row) + "\n" for row in labels)


def read_labels_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)


def read_edge_weights_csv(path, num_edges: int) -> np.ndarray:
    """Rows of ``edge_index,weight``; edges not listed get weight 0."""
    weights = np.zeros(num_edges)
    seen = set()
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                e, val = int(row[0]), float(row[1])
            except ValueError:
                if k == 0:
                    continue
                raise
            if not 0 <= e < num_edges:
                raise ValueError(f"edge index {e} out of range for {num_edges} edges")
            if e in seen:
                raise ValueError(f"edge index {e} listed twice")
            seen.add(e)
            weights[e] = val
    return weights
