"""Lossy image codec benchmark: downscale to compress, chained 2x
super-resolution to decompress, scored with full-reference quality metrics
and classifier statistics on patient-disjoint splits.
"""

from .errors import (
    BackendError,
    BackendFailure,
    BackendTimeout,
    CodecError,
    DicomError,
    DimensionError,
    DimensionMismatch,
    EmptyInput,
    EmptyIntersection,
    InsufficientClass,
    IoError,
    ManifestError,
    MetricError,
    MissingTag,
    NoPredictedPositives,
    NotDicom,
    NotPng,
    PngError,
    ProtocolError,
    SingleClass,
    SrcodecError,
    StatsError,
    TooFewValidDraws,
    TooSmall,
    TruncatedPixelData,
    UnsupportedColorType,
    UnsupportedDicomFeature,
    UnsupportedPhotometric,
    UnsupportedTransferSyntax,
)
from .image import Image16, constant16, quantize16
from .resample import DEFAULT_KERNEL_A, ResizeSpec, resize_bicubic, resize_bicubic_float
from .pngio import decode_png16, encode_png16, load_png16, save_png16
from .dicom import DicomImage, parse_dicom, to_gray16
from .metrics import (
    AggregateReport,
    FsimConfig,
    MetricResult,
    aggregate,
    batch_metrics,
    fsim,
    phase_congruency,
    psnr,
)
from .manifest import (
    EXCLUDED,
    NEGATIVE,
    POSITIVE,
    SplitAssignment,
    StudyRecord,
    apply_labels,
    balance_classes,
    derive_label,
    labeled_subset,
    read_manifest,
    split_patients,
    split_summary,
    write_manifest,
    write_split,
)
from .stats import (
    BootstrapConfig,
    BootstrapResult,
    PredictionRecord,
    SizeReport,
    accuracy,
    auc,
    bootstrap_ci,
    precision,
    read_predictions,
    recall,
    size_report,
    threshold_metrics,
)
from .codec import (
    BackendSpec,
    BatchSummary,
    CodecConfig,
    chain_length,
    compress_image,
    decompress_image,
    derive_image_seed,
    open_backend,
    run_batch,
    write_summary,
)
from .extproc import ExternalBackend, UpscaleRequest, UpscaleResponse
from .report import build_report, write_report

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
