"""Grayscale PNG IO and the grayscale<->RGB adaptation around 3-channel models.

The models consume (H, W, 3) floats in [0, 1]; the host trades in 16-bit
single-channel PNGs. Entry replicates the gray plane across channels and
exit averages them back. The average runs in float64 so that a bypass
model (output == input) reproduces the input plane bit-exactly.
"""

import numpy as np
from PIL import Image

_RANGE = 65535.0


def read_gray16(path) -> np.ndarray:
    """Load a grayscale PNG as (H, W) uint16. 8-bit input is widened by
    257 so full ranges coincide."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B"):
            return np.asarray(im, dtype=np.uint16)
        if im.mode == "I":
            arr = np.asarray(im, dtype=np.int32)
            if arr.min() < 0 or arr.max() > 65535:
                raise ValueError(f"{path}: sample values outside the 16-bit range")
            return arr.astype(np.uint16)
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint16) * 257
        raise ValueError(f"{path}: unsupported image mode {im.mode!r}, need grayscale")


def write_gray16(arr: np.ndarray, path) -> None:
    if arr.dtype != np.uint16 or arr.ndim != 2:
        raise ValueError(f"need a 2-d uint16 array, got {arr.dtype} with {arr.ndim} dims")
    h, w = arr.shape
    im = Image.frombytes("I;16", (w, h), np.ascontiguousarray(arr, dtype="<u2").tobytes())
    im.save(path, format="PNG")


def to_unit(gray: np.ndarray) -> np.ndarray:
    """uint16 plane -> float32 in [0, 1]."""
    return (gray.astype(np.float32)) / np.float32(_RANGE)


def from_unit(unit: np.ndarray) -> np.ndarray:
    """float plane in [0, 1] -> uint16, clipped and rounded."""
    scaled = np.rint(np.clip(unit, 0.0, 1.0) * _RANGE)
    return scaled.astype(np.uint16)


def gray_to_rgb(unit: np.ndarray) -> np.ndarray:
    return np.repeat(unit[:, :, np.newaxis], 3, axis=2)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    # float64 keeps (x + x + x) / 3 == x, so equal channels survive exactly
    return np.mean(rgb, axis=2, dtype=np.float64).astype(np.float32)
