"""File formats: binary k-space arrays, PGM images, JSON masks and edges,
CSV/JSON-lines reports.

The k-space binary layout is a little-endian header (magic ``KSAR``, the two
extents as uint32, a uint32 flags word, currently zero) followed by
interleaved re/im float64 pairs in row-major order.  The centered index
convention makes the extents sufficient to reconstruct the index set.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ._fft import ifft2
from .grid import IndexSet2D
from .lifting import KSpaceArray, embed

MAGIC = b"KSAR"


def write_kspace(path, x: KSpaceArray):
    e1, e2 = x.gamma.extents
    canon = IndexSet2D.rect(e1, e2)
    if x.gamma != canon:
        raise ValueError("binary format stores centered index sets only")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", e1, e2, 0))
        inter = np.empty((e1, e2, 2))
        inter[..., 0] = x.values.real
        inter[..., 1] = x.values.imag
        fh.write(inter.astype("<f8").tobytes())


def read_kspace(path) -> KSpaceArray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a k-space array file (magic {magic!r})")
        e1, e2, _flags = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(16 * e1 * e2), dtype="<f8").reshape(e1, e2, 2)
    return KSpaceArray(IndexSet2D.rect(e1, e2), data[..., 0] + 1j * data[..., 1])


def write_kspace_csv(path, x: KSpaceArray):
    """Debug export: one k1,k2,re,im row per sample."""
    with open(path, "w") as fh:
        fh.write("k1,k2,re,im\n")
        for (k1, k2), v in zip(x.gamma.indices, x.values.ravel()):
            fh.write(f"{k1},{k2},{float(v.real)!r},{float(v.imag)!r}\n")


def write_pgm(path, x: KSpaceArray, percentile: float = 99.5):
    """16-bit PGM of the image magnitude, windowed to [0, percentile]."""
    img = np.abs(ifft2(embed(x.values, x.gamma, x.grid)) * x.grid.size)
    hi = np.percentile(img, percentile)
    if hi <= 0:
        hi = 1.0
    scaled = np.clip(img / hi, 0.0, 1.0)
    pixels = (scaled * 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n65535\n".encode())
        fh.write(pixels.tobytes())


def maybe_write_png(path, x: KSpaceArray, percentile: float = 99.5) -> bool:
    """PNG export when matplotlib is importable; returns whether it wrote."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    img = np.abs(ifft2(embed(x.values, x.gamma, x.grid)) * x.grid.size)
    hi = np.percentile(img, percentile) or 1.0
    plt.imsave(path, np.clip(img / hi, 0, 1), cmap="gray")
    return True


def write_json(path, payload: dict):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_csv_rows(path, rows: list[dict]):
    import csv

    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
