"""Exception types raised across the toolkit.

Everything derives from SrcodecError so batch runners and the CLI can catch
one base class and report per-item failures without masking real bugs
(KeyboardInterrupt, MemoryError, ...).
"""


class SrcodecError(Exception):
    """Base class for all toolkit errors."""


# --- DICOM ingest ---

class DicomError(SrcodecError):
    """Base class for DICOM parsing failures."""


class NotDicom(DicomError):
    """Input has neither the DICM magic nor a parseable headerless data set."""


class UnsupportedTransferSyntax(DicomError):
    """Encapsulated/compressed pixel data or a non-little-endian syntax."""


class MissingTag(DicomError):
    """A required tag (Rows/Columns/BitsAllocated/PixelData) is absent."""

    def __init__(self, tag: str):
        super().__init__(f"required tag missing: {tag}")
        self.tag = tag


class TruncatedPixelData(DicomError):
    """PixelData length does not match rows x cols x bytes-per-sample."""


class UnsupportedPhotometric(DicomError):
    """PhotometricInterpretation other than MONOCHROME1/MONOCHROME2."""


class UnsupportedDicomFeature(DicomError):
    """Structurally valid DICOM outside the supported subset (e.g. 32-bit
    samples, zero dimensions, BitsStored > BitsAllocated)."""


# --- PNG I/O ---

class PngError(SrcodecError):
    """Base class for PNG codec failures."""


class NotPng(PngError):
    """Missing signature or structurally invalid chunk stream."""


class UnsupportedColorType(PngError):
    """Non-grayscale color type, sub-byte depth, or interlaced layout."""


class IoError(SrcodecError):
    """Filesystem-level failure wrapped with the offending path."""


# --- codec pipeline ---

class CodecError(SrcodecError):
    """Base class for compression/decompression failures."""


class DimensionMismatch(CodecError):
    """Input dimensions violate the operation's contract."""


class DimensionError(CodecError):
    """A backend returned an output of the wrong size; the chain aborts."""


class BackendFailure(CodecError):
    """External process error or wire-protocol violation."""


class ProtocolError(BackendFailure):
    """Malformed protocol line, id mismatch, or bad handshake."""


class BackendError(BackendFailure):
    """Backend replied status=error; message propagated."""


class BackendTimeout(BackendFailure):
    """Backend did not answer within the configured per-image timeout."""


Timeout = BackendTimeout


# --- metrics ---

class MetricError(SrcodecError):
    """Base class for quality-metric failures."""


class TooSmall(MetricError):
    """Image below the 16x16 minimum after downsampling."""


class EmptyIntersection(MetricError):
    """No matching filename stems between reference and test directories."""


# --- manifest / splitting ---

class ManifestError(SrcodecError):
    """Base class for manifest and split failures."""


class EmptyInput(ManifestError):
    """No records to operate on."""


class InsufficientClass(ManifestError):
    """A class has fewer labeled records than requested."""

    def __init__(self, label: str, have: int, need: int):
        super().__init__(f"class {label}: have {have}, need {need}")
        self.label = label
        self.have = have
        self.need = need


# --- scoring / statistics ---

class StatsError(SrcodecError):
    """Base class for classifier-output scoring failures."""


class SingleClass(StatsError):
    """AUC requested on records with only one label present."""


class NoPredictedPositives(StatsError):
    """Precision requested at a threshold yielding zero predicted positives."""


class TooFewValidDraws(StatsError):
    """Bootstrap produced fewer than 2 draws where the metric was defined."""
