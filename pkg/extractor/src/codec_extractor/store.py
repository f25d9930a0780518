"""Writers for the corpus interchange formats.

The matrix layout (all little endian): magic ``LTNT``, u32 version (1),
f32 frame rate in Hz, u32 dim, u32 row count, then the row-major f32
payload. The manifest is JSON lines; an object with a ``metadata`` key
declares corpus-level facts (frame rate, per-stream dims), every other
line is one utterance record.
"""

from __future__ import annotations

import json
import os
import struct

import numpy as np

_HEADER = struct.Struct("<4sIfII")
MAGIC = b"LTNT"
VERSION = 1


def write_ltnt(frames: np.ndarray, path: str, frame_rate: float) -> None:
    arr = np.ascontiguousarray(frames, dtype="<f4")
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"expected a nonempty (n, d) matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("refusing to write non-finite values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, float(frame_rate), arr.shape[1], arr.shape[0]))
        fh.write(arr.tobytes())


def write_manifest(records: list[dict], metadata: dict, path: str) -> None:
    base = os.path.dirname(os.path.abspath(path))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"metadata": metadata}, sort_keys=True) + "\n")
        for rec in records:
            rec = dict(rec)
            rec["streams"] = {
                name: os.path.relpath(p, base) for name, p in sorted(rec["streams"].items())
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
