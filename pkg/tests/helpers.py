"""Shared fixture builders for the test suite.

The DICOM encoder here is written from the wire format, not from the parser
under test, so the two disagree whenever either is wrong.
"""

from __future__ import annotations

import struct

import numpy as np

from srcodec.image import Image16

UID_IMPLICIT = "1.2.840.10008.1.2"
UID_EXPLICIT = "1.2.840.10008.1.2.1"

_LONG_VRS = {b"OB", b"OW", b"OF", b"SQ", b"UN", b"UT"}


def _even(value: bytes, pad: bytes = b" ") -> bytes:
    return value if len(value) % 2 == 0 else value + pad


def _element_explicit(group: int, elem: int, vr: bytes, value: bytes) -> bytes:
    value = _even(value, b"\x00" if vr in (b"OB", b"OW", b"UI") else b" ")
    head = struct.pack("<HH", group, elem) + vr
    if vr in _LONG_VRS:
        return head + b"\x00\x00" + struct.pack("<I", len(value)) + value
    return head + struct.pack("<H", len(value)) + value


def _element_implicit(group: int, elem: int, value: bytes) -> bytes:
    value = _even(value, b"\x00")
    return struct.pack("<HHI", group, elem, len(value)) + value


def file_meta(transfer_syntax: str = UID_EXPLICIT) -> bytes:
    body = _element_explicit(0x0002, 0x0010, b"UI", transfer_syntax.encode())
    length = _element_explicit(0x0002, 0x0000, b"UL", struct.pack("<I", len(body)))
    return b"\x00" * 128 + b"DICM" + length + body


def encode_dicom(
    pixels: np.ndarray,
    *,
    transfer_syntax: str = UID_EXPLICIT,
    preamble: bool = True,
    patient_id: str = "P001",
    sop_uid: str = "1.2.3.4",
    photometric: str = "MONOCHROME2",
    bits_allocated: int = 16,
    bits_stored: int | None = None,
    pixel_representation: int = 0,
    rescale_slope: str | None = None,
    rescale_intercept: str | None = None,
    omit: frozenset = frozenset(),
    pixel_bytes: bytes | None = None,
) -> bytes:
    """Serialize a tiny single-frame grayscale dataset.

    `omit` drops tags by (group, elem) to provoke MissingTag paths;
    `pixel_bytes` overrides the encoded pixel payload for truncation tests.
    """
    pixels = np.asarray(pixels)
    rows, cols = pixels.shape
    if bits_stored is None:
        bits_stored = bits_allocated
    if pixel_bytes is None:
        if bits_allocated == 16:
            kind = "<i2" if pixel_representation else "<u2"
        else:
            kind = "i1" if pixel_representation else "u1"
        pixel_bytes = pixels.astype(kind).tobytes()

    explicit = transfer_syntax == UID_EXPLICIT

    def element(group, elem, vr, value):
        if (group, elem) in omit:
            return b""
        if explicit:
            return _element_explicit(group, elem, vr, value)
        return _element_implicit(group, elem, value)

    body = b""
    body += element(0x0008, 0x0018, b"UI", sop_uid.encode())
    body += element(0x0010, 0x0020, b"LO", patient_id.encode())
    body += element(0x0028, 0x0004, b"CS", photometric.encode())
    body += element(0x0028, 0x0010, b"US", struct.pack("<H", rows))
    body += element(0x0028, 0x0011, b"US", struct.pack("<H", cols))
    body += element(0x0028, 0x0100, b"US", struct.pack("<H", bits_allocated))
    body += element(0x0028, 0x0101, b"US", struct.pack("<H", bits_stored))
    body += element(0x0028, 0x0103, b"US", struct.pack("<H", pixel_representation))
    if rescale_intercept is not None:
        body += element(0x0028, 0x1052, b"DS", rescale_intercept.encode())
    if rescale_slope is not None:
        body += element(0x0028, 0x1053, b"DS", rescale_slope.encode())
    if (0x7FE0, 0x0010) not in omit:
        vr = b"OW" if bits_allocated == 16 else b"OB"
        if explicit:
            body += _element_explicit(0x7FE0, 0x0010, vr, pixel_bytes)
        else:
            body += _element_implicit(0x7FE0, 0x0010, pixel_bytes)

    if not preamble:
        return body
    return file_meta(transfer_syntax) + body


def textured(size: int, seed: int, *, dtype=np.uint16) -> Image16:
    """Synthetic grayscale image with edges, blobs, and fine texture.

    Smooth background plus oriented sinusoids plus a few hard-edged
    rectangles, so both phase congruency and gradients have structure.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = 22000.0 + 12000.0 * np.sin(2 * np.pi * (3 * xx + 2 * yy))
    for _ in range(4):
        fx, fy = rng.uniform(4, 24, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        img += rng.uniform(1500, 5000) * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    for _ in range(5):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        s = rng.uniform(0.02, 0.12)
        img += rng.uniform(4000, 14000) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * s * s))
    for _ in range(3):
        x0, y0 = rng.integers(0, size // 2, size=2)
        w, h = rng.integers(size // 8, size // 3, size=2)
        img[y0:y0 + h, x0:x0 + w] += rng.uniform(3000, 9000)
    img += rng.normal(0, 300.0, img.shape)
    return Image16(np.clip(np.rint(img), 0, 65535).astype(dtype))


def write_corpus(directory, count: int, size: int, *, seed: int = 0) -> list:
    """Write `count` textured PNGs named img000.png.. into directory."""
    from srcodec.pngio import save_png16

    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = directory / f"img{i:03d}.png"
        save_png16(textured(size, seed + i), path)
        paths.append(path)
    return paths
