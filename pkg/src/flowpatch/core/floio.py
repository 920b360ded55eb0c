"""Middlebury .flo interchange: magic 202021.25f, int32 LE w/h, float32 LE (u,v)."""

from __future__ import annotations

import struct

import numpy as np

from ..errors import FormatError
from .raster import FlowField

FLO_MAGIC = 202021.25


def read_flo(path) -> FlowField:
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) < 12:
            raise FormatError(f"{path}: truncated header")
        magic, width, height = struct.unpack("<fii", header)
        if magic != FLO_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if width <= 0 or height <= 0:
            raise FormatError(f"{path}: bad dimensions {width}x{height}")
        payload = fh.read(8 * width * height)
    if len(payload) != 8 * width * height:
        raise IOError(f"{path}: truncated payload")
    data = np.frombuffer(payload, dtype="<f4").reshape(height, width, 2)
    return FlowField(data)


def write_flo(flow: FlowField, path) -> None:
    data = np.ascontiguousarray(flow.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<fii", FLO_MAGIC, flow.width, flow.height))
        fh.write(data.tobytes())
