"""Writing results to disk: JSON, CSV and 8-bit PGM, all atomically."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write(path, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_json(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    atomic_write(path, dumps_json(obj).encode())


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def write_csv(path, header, rows) -> None:
    atomic_write(path, csv_text(header, rows).encode())


def read_csv(path) -> tuple:
    """Header and float matrix of a CSV written by :func:`write_csv`."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, body


def pgm_bytes(img: np.ndarray) -> bytes:
    """Binary 8-bit PGM (P5) of a 2-D uint8 array; row 0 is the top."""
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("PGM image must be a 2-D uint8 array")
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def write_pgm(path, img: np.ndarray) -> None:
    atomic_write(path, pgm_bytes(img))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5" or parts[2] != b"255":
        raise ValueError("not an 8-bit binary PGM")
    w, h = (int(x) for x in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


def rhythmogram_image(matrix: np.ndarray) -> np.ndarray:
    """Lags as rows with lag 0 at the bottom; v in [-1, 1] -> round(255 (v+1)/2)."""
    m = np.asarray(matrix, dtype=np.float64)
    img = np.rint(255.0 * (np.clip(m, -1.0, 1.0) + 1.0) / 2.0).astype(np.uint8)
    return img.T[::-1]


def distance_image(d: np.ndarray) -> np.ndarray:
    """Distance matrix -> round(255 d / max d); all-zero input stays zero."""
    d = np.asarray(d, dtype=np.float64)
    top = d.max() if d.size else 0.0
    if top <= 0:
        return np.zeros(d.shape, dtype=np.uint8)
    return np.rint(255.0 * d / top).astype(np.uint8)
