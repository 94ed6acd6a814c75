"""Versioned CSV/JSON writers and graymap rasters.

Every file names its schema on the first line (CSV comment) or in a
``schema`` field (JSON).  Times are always written as the integer pair
``(numerator, level)``.
"""
from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dyadic import DyadicTime
from .model import Space

SCHEMA_VERSION = 1


def schema_name(kind: str) -> str:
    return f"multiscale-rg/{kind}/v{SCHEMA_VERSION}"


def write_csv(path: Path, kind: str, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema: {schema_name(kind)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(r)
    return path


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    with Path(path).open() as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema: "):
            raise ValueError(f"{path} has no schema header")
        return first[len("# schema: "):], list(csv.DictReader(fh))


def _default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, DyadicTime):
        return [o.numerator, o.level]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def write_json(path: Path, kind: str, payload: dict) -> Path:
    path = Path(path)
    doc = {"schema": schema_name(kind), **payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_default) + "\n")
    return path


def read_json(path: Path) -> dict:
    return json.loads(Path(path).read_text())


def write_pgm(path: Path, image: np.ndarray) -> Path:
    """Binary portable graymap (P5), one byte per cell."""
    img = np.asarray(image, dtype=np.uint8)
    h, w = img.shape
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(img.tobytes())
    return path


def read_pgm(path: Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path} is not a binary graymap")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def lattice_raster(rows: Sequence[Sequence[int]], max_scale: int, ticks: int,
                   space: Space = Space.BIT) -> np.ndarray:
    """Image with one row per scale ``1..max_scale`` and one column per tick of ``2**-max_scale``.

    A coarser scale holds its value across the columns until its next lattice
    time.  Bits map 1 to black and 0 to white; phases are quantized to 8 bits.
    """
    img = np.zeros((max_scale, ticks + 1), dtype=np.uint8)
    for n in range(1, max_scale + 1):
        step = 1 << (max_scale - n)
        row = np.asarray(rows[n][: ticks // step + 1], dtype=np.uint64)
        if space is Space.BIT:
            vals = np.where(row.astype(bool), 0, 255).astype(np.uint8)
        else:
            vals = (row >> np.uint64(56)).astype(np.uint8)
        img[n - 1] = np.repeat(vals, step)[: ticks + 1]
    return img


def mean_raster(means: dict[tuple[int, int], float], max_scale: int, ticks: int) -> np.ndarray:
    """Graymap of expectations keyed by ``(n, m)``; mean 1 is black, 0 white."""
    img = np.full((max_scale, ticks + 1), 255, dtype=np.uint8)
    for n in range(1, max_scale + 1):
        step = 1 << (max_scale - n)
        for m in range(ticks // step + 1):
            v = means.get((n, m))
            if v is not None:
                img[n - 1, m * step:(m + 1) * step] = round(255 * (1 - v))
    return img
