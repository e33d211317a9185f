"""16-bit grayscale raster type used throughout the pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Image16:
    """Immutable width x height raster of 16-bit grayscale samples.

    Samples are stored row-major as a read-only uint16 array of shape
    (height, width). All pipeline stages exchange this type.
    """

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 2:
            raise ValueError(f"expected 2-D sample array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"degenerate image shape {arr.shape}")
        if arr.dtype != np.uint16:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"samples must be integers, got dtype {arr.dtype}")
            if arr.min() < 0 or arr.max() > 65535:
                raise ValueError("samples out of [0, 65535]")
            arr = arr.astype(np.uint16)
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple:
        return self.pixels.shape

    def as_float(self) -> np.ndarray:
        """Samples as float64, still on the [0, 65535] scale."""
        return self.pixels.astype(np.float64)

    def as_float8(self) -> np.ndarray:
        """Samples rescaled to the 8-bit [0, 255] scale (divide by 257)."""
        return self.pixels.astype(np.float64) / 257.0

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image16):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


def quantize16(values: np.ndarray) -> Image16:
    """Clamp a float array to [0, 65535] and round half-to-even to uint16."""
    clipped = np.clip(values, 0.0, 65535.0)
    return Image16(np.rint(clipped).astype(np.uint16))


def constant16(width: int, height: int, value: int) -> Image16:
    return Image16(np.full((height, width), value, dtype=np.uint16))
