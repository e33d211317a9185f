"""Minimal 16-bit grayscale PNG reader/writer.

Scope is deliberately narrow: grayscale (color type 0), bit depth 8 or 16,
no interlacing. The encoder always writes bit depth 16 with filter type 0
scanlines and a fixed zlib level, so identical rasters produce identical
bytes and byte counts are reproducible across runs.
"""

from __future__ import annotations

import struct
import zlib
from os import PathLike
from typing import Optional

import numpy as np

from . import _accel
from .errors import IoError, NotPng, UnsupportedColorType
from .image import Image16

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 6
_TEXT_KEYWORD = b"srcodec"


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_png16(img: Image16, text: Optional[str] = None) -> bytes:
    """Serialize an Image16 as a 16-bit grayscale PNG byte string.

    `text` is embedded as a tEXt chunk (keyword "srcodec") so artifacts can
    carry their generating configuration.
    """
    h, w = img.pixels.shape
    ihdr = struct.pack(">IIBBBBB", w, h, 16, 0, 0, 0, 0)
    stride = w * 2
    scanlines = np.zeros((h, stride + 1), dtype=np.uint8)  # filter type None per row
    scanlines[:, 1:] = img.pixels.astype(">u2").view(np.uint8).reshape(h, stride)
    idat = zlib.compress(scanlines.tobytes(), _ZLIB_LEVEL)

    out = bytearray(PNG_SIGNATURE)
    out += _chunk(b"IHDR", ihdr)
    if text is not None:
        out += _chunk(b"tEXt", _TEXT_KEYWORD + b"\x00" + text.encode("latin-1", "replace"))
    out += _chunk(b"IDAT", idat)
    out += _chunk(b"IEND", b"")
    return bytes(out)


def save_png16(img: Image16, path: PathLike | str, text: Optional[str] = None) -> int:
    """Write img to path as 16-bit grayscale PNG; returns bytes written."""
    data = encode_png16(img, text=text)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    return len(data)


def decode_png16(data: bytes) -> Image16:
    """Decode a grayscale PNG byte string; 8-bit samples are promoted x257."""
    if len(data) < 8 or data[:8] != PNG_SIGNATURE:
        raise NotPng("missing PNG signature")

    pos = 8
    ihdr = None
    idat = bytearray()
    seen_iend = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise NotPng("truncated chunk header")
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body_end = pos + 8 + length
        if length > 0x7FFFFFFF or body_end + 4 > len(data):
            raise NotPng(f"truncated {tag!r} chunk")
        payload = data[pos + 8 : body_end]
        (crc,) = struct.unpack(">I", data[body_end : body_end + 4])
        if zlib.crc32(tag + payload) & 0xFFFFFFFF != crc:
            raise NotPng(f"bad CRC in {tag!r} chunk")
        pos = body_end + 4

        if tag == b"IHDR":
            if ihdr is not None or length != 13:
                raise NotPng("bad IHDR")
            ihdr = struct.unpack(">IIBBBBB", payload)
        elif tag == b"IDAT":
            idat += payload
        elif tag == b"IEND":
            seen_iend = True
            break
        # ancillary chunks (tEXt, pHYs, ...) are ignored

    if ihdr is None:
        raise NotPng("no IHDR chunk")
    if not seen_iend or not idat:
        raise NotPng("no IDAT/IEND chunk")

    width, height, depth, color, compression, filt, interlace = ihdr
    if color != 0:
        raise UnsupportedColorType(f"color type {color}, only grayscale supported")
    if depth not in (8, 16):
        raise UnsupportedColorType(f"bit depth {depth}, only 8/16 supported")
    if interlace != 0:
        raise UnsupportedColorType("interlaced PNG not supported")
    if compression != 0 or filt != 0:
        raise NotPng("unknown compression/filter method")
    if width < 1 or height < 1 or width * height > 512 * 1024 * 1024:
        raise NotPng(f"implausible dimensions {width}x{height}")

    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise NotPng(f"corrupt IDAT stream: {exc}") from exc

    bpp = depth // 8
    stride = width * bpp
    if len(raw) != height * (stride + 1):
        raise NotPng("decompressed size does not match dimensions")

    lines = np.frombuffer(raw, dtype=np.uint8).reshape(height, stride + 1)
    ftypes = np.ascontiguousarray(lines[:, 0])
    rows = np.ascontiguousarray(lines[:, 1:])
    if not rows.flags.writeable:
        # single-row slices stay views into the immutable decompress buffer,
        # and unfiltering works in place
        rows = rows.copy()
    try:
        rows = _accel.unfilter_scanlines(rows, ftypes, bpp)
    except ValueError as exc:
        raise NotPng(str(exc)) from exc

    if depth == 16:
        samples = rows.reshape(-1).view(">u2").reshape(height, width).astype(np.uint16)
    else:
        samples = rows.reshape(height, width).astype(np.uint16) * 257
    return Image16(samples)


def read_png_text(data: bytes) -> Optional[str]:
    """Return the embedded configuration text chunk, if any.

    Walks the chunk list without decoding pixels, so it also works on files
    whose IDAT stream is damaged.
    """
    if len(data) < 8 or data[:8] != PNG_SIGNATURE:
        raise NotPng("missing PNG signature")
    pos = 8
    prefix = _TEXT_KEYWORD + b"\x00"
    while pos + 8 <= len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        body_end = pos + 8 + length
        if length > 0x7FFFFFFF or body_end + 4 > len(data):
            break
        if tag == b"tEXt":
            payload = data[pos + 8 : body_end]
            if payload.startswith(prefix):
                return payload[len(prefix):].decode("latin-1")
        if tag == b"IEND":
            break
        pos = body_end + 4
    return None


def load_png16(path: PathLike | str) -> Image16:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return decode_png16(data)
