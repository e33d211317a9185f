"""Restricted DICOM parser and 16-bit grayscale conversion.

Supports exactly what a mammography PNG-conversion pipeline needs: implicit
and explicit VR little endian, uncompressed single-frame MONOCHROME1/2 pixel
data, and the handful of tags listed in `_WANTED`. Everything else (encapsulated
syntaxes, big endian, multi-frame, DICOMDIR) is rejected with a typed error.
Window center/width tags are ignored; conversion is per-image min-max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    MissingTag,
    NotDicom,
    TruncatedPixelData,
    UnsupportedDicomFeature,
    UnsupportedPhotometric,
    UnsupportedTransferSyntax,
)
from .image import Image16

UID_IMPLICIT_LE = "1.2.840.10008.1.2"
UID_EXPLICIT_LE = "1.2.840.10008.1.2.1"

# tag -> attribute name
_WANTED = {
    (0x0008, 0x0018): "image_id",
    (0x0010, 0x0020): "patient_id",
    (0x0028, 0x0004): "photometric",
    (0x0028, 0x0010): "rows",
    (0x0028, 0x0011): "cols",
    (0x0028, 0x0100): "bits_allocated",
    (0x0028, 0x0101): "bits_stored",
    (0x0028, 0x0103): "pixel_representation",
    (0x0028, 0x1052): "rescale_intercept",
    (0x0028, 0x1053): "rescale_slope",
}
_PIXEL_DATA = (0x7FE0, 0x0010)
_US_TAGS = frozenset(
    tag for tag, name in _WANTED.items()
    if name in ("rows", "cols", "bits_allocated", "bits_stored", "pixel_representation")
)
_DS_TAGS = frozenset(((0x0028, 0x1052), (0x0028, 0x1053)))

# VRs that use the 2-byte reserved + 4-byte length layout in explicit VR
_LONG_VRS = frozenset((b"OB", b"OW", b"OF", b"OD", b"OL", b"SQ", b"UC", b"UR", b"UT", b"UN"))
_KNOWN_VRS = _LONG_VRS | frozenset(
    (b"AE", b"AS", b"AT", b"CS", b"DA", b"DS", b"DT", b"FL", b"FD", b"IS",
     b"LO", b"LT", b"PN", b"SH", b"SL", b"SS", b"ST", b"TM", b"UI", b"UL", b"US")
)

_SEQ_DELIMITER = b"\xfe\xff\xdd\xe0\x00\x00\x00\x00"
_UNDEFINED = 0xFFFFFFFF


@dataclass(frozen=True)
class TransferSyntax:
    uid: str

    @property
    def kind(self) -> str:
        if self.uid == UID_IMPLICIT_LE:
            return "implicit-VR-little-endian"
        if self.uid == UID_EXPLICIT_LE:
            return "explicit-VR-little-endian"
        return "unsupported"


@dataclass
class DicomImage:
    rows: int
    cols: int
    bits_allocated: int
    bits_stored: int
    pixel_representation: str  # "unsigned" | "signed"
    photometric: str  # "MONOCHROME1" | "MONOCHROME2"
    rescale_slope: float
    rescale_intercept: float
    patient_id: str
    image_id: str
    pixel_data: bytes


class _Reader:
    """Bounds-checked byte cursor; any overrun becomes NotDicom."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def remaining(self) -> int:
        return len(self.data) - self.pos

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise NotDicom("element runs past end of data")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        b = self.take(2)
        return b[0] | (b[1] << 8)

    def u32(self) -> int:
        b = self.take(4)
        return b[0] | (b[1] << 8) | (b[2] << 16) | (b[3] << 24)


def _decode_str(raw: bytes) -> str:
    return raw.decode("latin-1").strip("\x00 ")


def _decode_us(raw: bytes, tag) -> int:
    if len(raw) < 2:
        raise NotDicom(f"tag {tag[0]:04X},{tag[1]:04X}: US value too short")
    return raw[0] | (raw[1] << 8)


def _decode_ds(raw: bytes, tag) -> float:
    text = _decode_str(raw).split("\\")[0].strip()
    try:
        return float(text)
    except ValueError as exc:
        raise NotDicom(f"tag {tag[0]:04X},{tag[1]:04X}: bad decimal string {text!r}") from exc


def _skip_undefined_length(rd: _Reader) -> None:
    """Jump past an undefined-length element by locating its sequence
    delimitation item. Nested undefined-length content is not walked
    structurally; the first delimiter at or after the cursor ends the skip,
    which is sufficient for the flat files this parser supports."""
    at = rd.data.find(_SEQ_DELIMITER, rd.pos)
    if at < 0:
        raise NotDicom("undefined-length element without sequence delimiter")
    rd.pos = at + len(_SEQ_DELIMITER)


def _sniff_explicit(data: bytes, pos: int) -> bool:
    return data[pos + 4 : pos + 6] in _KNOWN_VRS


def _parse_meta(rd: _Reader) -> str:
    """Parse the group-0002 file meta (always explicit VR LE); returns the
    TransferSyntaxUID, defaulting to explicit VR LE when absent."""
    ts_uid = UID_EXPLICIT_LE
    while rd.remaining() >= 8:
        mark = rd.pos
        group = rd.u16()
        elem = rd.u16()
        if group != 0x0002:
            rd.pos = mark
            break
        vr = rd.take(2)
        if vr in _LONG_VRS:
            rd.take(2)
            length = rd.u32()
        elif vr in _KNOWN_VRS:
            length = rd.u16()
        else:
            raise NotDicom(f"bad VR {vr!r} in file meta")
        if length == _UNDEFINED:
            raise NotDicom("undefined length in file meta")
        value = rd.take(length)
        if (group, elem) == (0x0002, 0x0010):
            ts_uid = _decode_str(value)
    return ts_uid


def parse_dicom(data: bytes) -> DicomImage:
    """Parse a DICOM byte stream into a DicomImage.

    Accepts the standard 128-byte preamble + "DICM" layout or a headerless
    data set (VR style sniffed from the first element).
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("parse_dicom expects bytes")
    data = bytes(data)

    if len(data) >= 132 and data[128:132] == b"DICM":
        rd = _Reader(data, 132)
        ts = TransferSyntax(_parse_meta(rd))
        if ts.kind == "unsupported":
            raise UnsupportedTransferSyntax(f"transfer syntax {ts.uid}")
        explicit = ts.kind == "explicit-VR-little-endian"
    else:
        if len(data) < 8:
            raise NotDicom("too short for any DICOM layout")
        rd = _Reader(data, 0)
        explicit = _sniff_explicit(data, 0)
        group = data[0] | (data[1] << 8)
        if not explicit and group not in (0x0008, 0x0010, 0x0018, 0x0020, 0x0028):
            # headerless implicit files must open with a plausible group
            raise NotDicom("no DICM magic and first element not recognizable")

    found: dict = {}
    pixel_data = None

    while rd.remaining() >= 8:
        group = rd.u16()
        elem = rd.u16()
        tag = (group, elem)
        if explicit:
            vr = rd.take(2)
            if vr in _LONG_VRS:
                rd.take(2)
                length = rd.u32()
            elif vr in _KNOWN_VRS:
                length = rd.u16()
            else:
                raise NotDicom(f"bad VR {vr!r} for tag {group:04X},{elem:04X}")
        else:
            length = rd.u32()

        if length == _UNDEFINED:
            if tag == _PIXEL_DATA:
                raise UnsupportedTransferSyntax("encapsulated pixel data")
            _skip_undefined_length(rd)
            continue

        value = rd.take(length)

        if tag == _PIXEL_DATA:
            pixel_data = value
        elif tag in _WANTED:
            name = _WANTED[tag]
            if tag in _US_TAGS:
                found[name] = _decode_us(value, tag)
            elif tag in _DS_TAGS:
                found[name] = _decode_ds(value, tag)
            else:
                found[name] = _decode_str(value)

    for required, label in (("rows", "Rows"), ("cols", "Columns"), ("bits_allocated", "BitsAllocated")):
        if required not in found:
            raise MissingTag(label)
    if pixel_data is None:
        raise MissingTag("PixelData")

    rows = found["rows"]
    cols = found["cols"]
    bits_allocated = found["bits_allocated"]
    if rows < 1 or cols < 1:
        raise UnsupportedDicomFeature(f"degenerate dimensions {rows}x{cols}")
    if bits_allocated not in (8, 16):
        raise UnsupportedDicomFeature(f"BitsAllocated {bits_allocated} unsupported")
    bits_stored = found.get("bits_stored", bits_allocated)
    if not 1 <= bits_stored <= bits_allocated:
        raise UnsupportedDicomFeature(f"BitsStored {bits_stored} outside 1..{bits_allocated}")

    photometric = found.get("photometric", "MONOCHROME2").upper()
    if photometric not in ("MONOCHROME1", "MONOCHROME2"):
        raise UnsupportedPhotometric(photometric)

    prep = found.get("pixel_representation", 0)
    if prep not in (0, 1):
        raise UnsupportedDicomFeature(f"PixelRepresentation {prep}")

    expected = rows * cols * (bits_allocated // 8)
    if len(pixel_data) == expected + 1 and expected % 2 == 1:
        pixel_data = pixel_data[:expected]  # even-length padding byte
    if len(pixel_data) != expected:
        raise TruncatedPixelData(
            f"PixelData has {len(pixel_data)} bytes, expected {expected}"
        )

    return DicomImage(
        rows=rows,
        cols=cols,
        bits_allocated=bits_allocated,
        bits_stored=bits_stored,
        pixel_representation="signed" if prep == 1 else "unsigned",
        photometric=photometric,
        rescale_slope=float(found.get("rescale_slope", 1.0)),
        rescale_intercept=float(found.get("rescale_intercept", 0.0)),
        patient_id=found.get("patient_id", ""),
        image_id=found.get("image_id", ""),
        pixel_data=pixel_data,
    )


def pixel_array(img: DicomImage) -> np.ndarray:
    """Raw sample array (rows, cols) with the file's signedness applied."""
    if img.bits_allocated == 8:
        dtype = np.int8 if img.pixel_representation == "signed" else np.uint8
    else:
        dtype = np.dtype("<i2") if img.pixel_representation == "signed" else np.dtype("<u2")
    return np.frombuffer(img.pixel_data, dtype=dtype).reshape(img.rows, img.cols)


def to_gray16(img: DicomImage) -> Image16:
    """Rescale, orient, and min-max normalize to the full 16-bit range.

    Applies v' = v * slope + intercept, inverts MONOCHROME1, then stretches
    to [0, 65535]. A constant input maps to all zeros.
    """
    values = pixel_array(img).astype(np.float64)
    values = values * img.rescale_slope + img.rescale_intercept
    if img.photometric == "MONOCHROME1":
        values = values.max() - values
    lo = values.min()
    hi = values.max()
    if hi == lo:
        return Image16(np.zeros(values.shape, dtype=np.uint16))
    scaled = (values - lo) * (65535.0 / (hi - lo))
    return Image16(np.rint(scaled).astype(np.uint16))
