"""PNG/PGM readers and writers for stimuli, depth maps, masks and scalar maps."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

MASK_UNLABELED, MASK_FOREGROUND, MASK_BACKGROUND = 0, 1, 2


def read_rgb(path) -> np.ndarray:
    """8-bit RGB raster as a ``(h, w, 3)`` uint8 array."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_rgb(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.dtype != np.uint8:
        image = np.clip(np.round(image * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(image, mode="RGB").save(path)


def _read_gray(path) -> tuple[np.ndarray, int]:
    with Image.open(path) as im:
        arr = np.asarray(im)
        if arr.ndim == 3:
            arr = np.asarray(im.convert("L"))
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            maxval = 65535
        else:
            maxval = 255
    return arr.astype(np.int64), maxval


def read_depth(path) -> np.ndarray:
    """Depth map scaled to [0, 1]; 0 is the nearest surface, 1 the farthest."""
    arr, maxval = _read_gray(path)
    return arr.astype(np.float64) / maxval


def write_depth(path, depth: np.ndarray) -> None:
    write_map16(path, depth)


def read_mask(path) -> np.ndarray:
    """Region labels: 0 unlabeled, 1 foreground, 2 background."""
    arr, _ = _read_gray(path)
    if arr.size and arr.max() > MASK_BACKGROUND:
        raise ValueError(f"{path}: mask values must be 0, 1 or 2")
    return arr.astype(np.uint8)


def write_mask(path, mask: np.ndarray) -> None:
    mask = np.asarray(mask, dtype=np.uint8)
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else None
    Image.fromarray(mask, mode="L").save(path, format=fmt)


def write_map16(path, values: np.ndarray) -> None:
    """Store a [0, 1] map as 16-bit grayscale (value = round(65535 v))."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    q = np.round(v * 65535.0).astype(np.uint16)
    path = Path(path)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else None
    Image.fromarray(q).save(path, format=fmt)


def read_map16(path) -> np.ndarray:
    arr, maxval = _read_gray(path)
    return arr.astype(np.float64) / maxval
