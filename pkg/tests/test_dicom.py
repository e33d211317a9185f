"""Parser and grayscale-conversion checks against a from-scratch encoder
(helpers.encode_dicom writes the wire format independently)."""

import numpy as np
import pytest

from srcodec.dicom import parse_dicom, pixel_array, to_gray16
from srcodec.errors import (
    MissingTag,
    NotDicom,
    SrcodecError,
    TruncatedPixelData,
    UnsupportedDicomFeature,
    UnsupportedPhotometric,
    UnsupportedTransferSyntax,
)

from helpers import UID_EXPLICIT, UID_IMPLICIT, encode_dicom


def _pixels(rows=6, cols=8, seed=0, high=65536):
    rng = np.random.default_rng(seed)
    return rng.integers(0, high, size=(rows, cols), dtype=np.uint16)


@pytest.mark.parametrize("syntax", [UID_EXPLICIT, UID_IMPLICIT])
def test_roundtrip(syntax):
    px = _pixels()
    img = parse_dicom(encode_dicom(px, transfer_syntax=syntax, patient_id="P042"))
    assert (img.rows, img.cols) == px.shape
    assert img.patient_id == "P042"
    assert img.image_id == "1.2.3.4"
    assert img.photometric == "MONOCHROME2"
    assert img.bits_allocated == 16
    assert np.array_equal(pixel_array(img), px)


def test_headerless_explicit():
    px = _pixels(seed=1)
    img = parse_dicom(encode_dicom(px, preamble=False))
    assert np.array_equal(pixel_array(img), px)


def test_headerless_implicit():
    px = _pixels(seed=2)
    img = parse_dicom(encode_dicom(px, transfer_syntax=UID_IMPLICIT, preamble=False))
    assert np.array_equal(pixel_array(img), px)


def test_signed_samples():
    rng = np.random.default_rng(3)
    px = rng.integers(-2000, 2000, size=(5, 5), dtype=np.int16)
    img = parse_dicom(encode_dicom(px, pixel_representation=1))
    assert img.pixel_representation == "signed"
    assert np.array_equal(pixel_array(img), px)


def test_8bit_samples():
    px = _pixels(high=256).astype(np.uint8)
    img = parse_dicom(encode_dicom(px, bits_allocated=8))
    assert img.bits_allocated == 8
    assert np.array_equal(pixel_array(img), px)


def test_rescale_tags():
    img = parse_dicom(encode_dicom(_pixels(), rescale_slope="2.5", rescale_intercept="-100"))
    assert img.rescale_slope == 2.5
    assert img.rescale_intercept == -100.0


def test_gray16_full_range():
    px = np.array([[10, 20], [30, 40]], dtype=np.uint16)
    out = to_gray16(parse_dicom(encode_dicom(px)))
    assert out.pixels.min() == 0
    assert out.pixels.max() == 65535
    # min-max stretch keeps ordering
    assert out.pixels[0, 0] < out.pixels[0, 1] < out.pixels[1, 0] < out.pixels[1, 1]


def test_gray16_monochrome1_inverts():
    px = np.array([[0, 100], [200, 300]], dtype=np.uint16)
    normal = to_gray16(parse_dicom(encode_dicom(px)))
    inverted = to_gray16(parse_dicom(encode_dicom(px, photometric="MONOCHROME1")))
    assert np.array_equal(inverted.pixels, 65535 - normal.pixels)


def test_gray16_affine_invariant():
    # min-max normalization absorbs any positive affine rescale
    px = _pixels(seed=5)
    plain = to_gray16(parse_dicom(encode_dicom(px)))
    scaled = to_gray16(parse_dicom(encode_dicom(px, rescale_slope="3", rescale_intercept="500")))
    assert np.array_equal(plain.pixels, scaled.pixels)


def test_gray16_constant_is_zero():
    px = np.full((4, 4), 777, dtype=np.uint16)
    out = to_gray16(parse_dicom(encode_dicom(px)))
    assert not out.pixels.any()


def test_padded_odd_pixel_data():
    px = np.array([[7, 8, 9]], dtype=np.uint8)
    data = encode_dicom(px, bits_allocated=8)  # encoder pads to even length
    img = parse_dicom(data)
    assert np.array_equal(pixel_array(img), px)


def test_missing_required_tags():
    px = _pixels()
    with pytest.raises(MissingTag):
        parse_dicom(encode_dicom(px, omit=frozenset({(0x0028, 0x0010)})))
    with pytest.raises(MissingTag):
        parse_dicom(encode_dicom(px, omit=frozenset({(0x7FE0, 0x0010)})))


def test_defaults_for_optional_tags():
    px = _pixels()
    img = parse_dicom(encode_dicom(
        px,
        omit=frozenset({(0x0010, 0x0020), (0x0028, 0x0004), (0x0028, 0x0101), (0x0028, 0x0103)}),
    ))
    assert img.patient_id == ""
    assert img.photometric == "MONOCHROME2"
    assert img.bits_stored == 16
    assert img.pixel_representation == "unsigned"


def test_truncated_pixel_data():
    px = _pixels()
    full = px.astype("<u2").tobytes()
    with pytest.raises(TruncatedPixelData):
        parse_dicom(encode_dicom(px, pixel_bytes=full[:-8]))
    with pytest.raises(TruncatedPixelData):
        parse_dicom(encode_dicom(px, pixel_bytes=full + b"\x00" * 6))


def test_unsupported_transfer_syntax():
    # JPEG baseline UID in the file meta
    with pytest.raises(UnsupportedTransferSyntax):
        parse_dicom(encode_dicom(_pixels(), transfer_syntax="1.2.840.10008.1.2.4.50"))


def test_unsupported_photometric():
    with pytest.raises(UnsupportedPhotometric):
        parse_dicom(encode_dicom(_pixels(), photometric="RGB"))


def test_unsupported_sample_layouts():
    with pytest.raises(UnsupportedDicomFeature):
        parse_dicom(encode_dicom(_pixels(), bits_allocated=32))
    with pytest.raises(UnsupportedDicomFeature):
        parse_dicom(encode_dicom(_pixels(), bits_stored=20))


def test_garbage_rejected():
    for blob in (b"", b"\x00" * 4, b"not a dicom file at all", b"\xff" * 200):
        with pytest.raises(SrcodecError):
            parse_dicom(blob)


def test_type_check():
    with pytest.raises(TypeError):
        parse_dicom("a string")  # type: ignore[arg-type]


def test_preamble_without_magic_is_headerless():
    # 132+ bytes that never say DICM must still parse as a bare data set
    # or fail typed, never crash
    px = _pixels()
    data = encode_dicom(px, preamble=False)
    assert len(data) > 132
    img = parse_dicom(data)
    assert np.array_equal(pixel_array(img), px)


def test_implicit_garbage_group_rejected():
    blob = bytes([0x99, 0x99, 0x01, 0x00]) + b"\x00" * 40
    with pytest.raises(NotDicom):
        parse_dicom(blob)
