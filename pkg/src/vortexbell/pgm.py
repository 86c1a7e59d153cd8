"""Binary (P5) PGM reading and writing, 8 or 16 bits per sample."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

_HEADER = re.compile(
    rb"^P5\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)\s(?:\s*#.*[\r\n])*\s*(\d+)\s")


def write_pgm(path, image: np.ndarray, maxval: int = 65535) -> Path:
    """Write ``image`` (non-negative integers <= maxval) as a raw PGM."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got shape {img.shape}")
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval must be in [1, 65535], got {maxval}")
    if img.size and (img.min() < 0 or img.max() > maxval):
        raise ValueError("image values outside [0, maxval]")
    dtype = ">u2" if maxval > 255 else "u1"
    height, width = img.shape
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n%d\n" % (width, height, maxval))
        fh.write(img.astype(dtype).tobytes())
    return path


def read_pgm(path) -> np.ndarray:
    """Read a raw PGM; returns ``uint16`` or ``uint8`` samples, shape (rows, cols)."""
    buf = Path(path).read_bytes()
    match = _HEADER.match(buf)
    if match is None:
        raise ValueError(f"not a raw PGM file: {path}")
    width, height, maxval = (int(g) for g in match.groups())
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    itemsize = np.dtype(dtype).itemsize
    if len(buf) - match.end() < count * itemsize:
        raise ValueError(f"truncated PGM data in {path}")
    data = np.frombuffer(buf, dtype=dtype, count=count, offset=match.end())
    return data.reshape(height, width).astype(np.uint16 if itemsize == 2 else np.uint8)
