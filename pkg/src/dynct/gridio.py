"""Persistence: the BREG1 grid container, grayscale PNG frames and
deterministic CSV tables.

Container layout: magic "BREG1" (5 bytes), u8 ndim, ndim little-endian u32
dims, then the row-major float64 little-endian payload.  Optional metadata
travels in a JSON sidecar `<name>.meta.json` next to the container.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .radon import Volume

MAGIC = b"BREG1"


def meta_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".meta.json")


def save_grid(path, array: np.ndarray, meta: dict | None = None) -> Path:
    """Write an array as a BREG1 container, plus a JSON sidecar if meta given."""
    path = Path(path)
    arr = np.ascontiguousarray(np.asarray(array, dtype="<f8"))
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("B", arr.ndim))
        fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())
    if meta is not None:
        with open(meta_path(path), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return path


def load_grid(path) -> tuple[np.ndarray, dict | None]:
    """Read a BREG1 container; returns (array, meta or None)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:5] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:5]!r}")
    ndim = raw[5]
    header_end = 6 + 4 * ndim
    dims = struct.unpack(f"<{ndim}I", raw[6:header_end])
    payload = raw[header_end:]
    expected = 8 * math.prod(dims)
    if len(payload) != expected:
        raise ValueError(
            f"{path}: payload has {len(payload)} bytes, dims {dims} require {expected}"
        )
    arr = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    mp = meta_path(path)
    meta = json.loads(mp.read_text()) if mp.exists() else None
    return arr, meta


def default_frame_times(n_time: int) -> list[int]:
    if n_time == 20:
        return [0, 5, 10, 15, 19]
    if n_time <= 5:
        return list(range(n_time))
    return sorted({int(round(x)) for x in np.linspace(0, n_time - 1, 5)})


def emit_images(vol: Volume, times: list[int] | None, path) -> list[Path]:
    """Write selected frames as 8-bit grayscale PNGs, linear window [0, 1].

    `path` is a directory; files are named frame_<t>.png.  Output bytes are
    deterministic for identical input.
    """
    outdir = Path(path)
    outdir.mkdir(parents=True, exist_ok=True)
    if times is None:
        times = default_frame_times(vol.n_time)
    written = []
    for t in times:
        if not 0 <= t < vol.n_time:
            raise ValueError(f"frame index {t} out of range for {vol.n_time} frames")
        frame = np.clip(vol.values[t], 0.0, 1.0)
        img = Image.fromarray(np.round(frame * 255.0).astype(np.uint8), mode="L")
        fp = outdir / f"frame_{t:02d}.png"
        img.save(fp, format="PNG")
        written.append(fp)
    return written


def format_cell(value) -> str:
    """Stable CSV cell formatting: floats via %.10g, '.' decimal point."""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return f"{value:.10g}"
    return str(value)


def write_csv(path, fieldnames: list[str], rows: list[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_cell(row.get(name, "")) for name in fieldnames])
    return path
