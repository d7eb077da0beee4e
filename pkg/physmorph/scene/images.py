"""Binary PPM (P6, 8-bit RGB) and PGM (P5, 16-bit gray) writers."""
import os

import numpy as np


def _prepare(path: str) -> None:
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)


def write_ppm(path: str, rgb: np.ndarray) -> None:
    """`rgb` is (H, W, 3) in [0, 1]."""
    height, width = rgb.shape[:2]
    pixels = np.round(np.clip(rgb, 0.0, 1.0) * 255.0).astype(np.uint8)
    _prepare(path)
    with open(path, "wb") as f:
        f.write(f"P6\n{width} {height}\n255\n".encode("ascii"))
        f.write(pixels.tobytes())


def write_pgm16(path: str, values: np.ndarray, lo: float, hi: float) -> None:
    """Map [lo, hi] linearly to [0, 65535], big-endian samples."""
    height, width = values.shape
    scaled = (np.clip(values, lo, hi) - lo) / (hi - lo) if hi > lo else np.zeros_like(values)
    pixels = np.round(scaled * 65535.0).astype(">u2")
    _prepare(path)
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n65535\n".encode("ascii"))
        f.write(pixels.tobytes())


def read_pnm(path: str) -> np.ndarray:
    """Read back a file written by this module."""
    with open(path, "rb") as f:
        content = f.read()
    fields, offset = [], 0
    while len(fields) < 4:
        end = content.index(b"\n", offset)
        fields.extend(content[offset:end].split())
        offset = end + 1
    kind, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    data = np.frombuffer(content[offset:], dtype=dtype)
    return data.reshape(height, width, 3) if kind == b"P6" else data.reshape(height, width)
