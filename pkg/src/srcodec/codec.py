"""Compression and decompression engine with a deterministic batch runner.

Compression is a bicubic downscale to a power-of-2 fraction of the source
size. Decompression chains a pluggable 2x super-resolution backend until
the target size is reached, re-quantizing to 16 bits at every step. The
batch runner processes images independently on a thread pool; outputs are
byte-identical for any thread count.
"""

from __future__ import annotations

import hashlib
import json
import logging
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import DimensionError, DimensionMismatch, SrcodecError
from .extproc import DEFAULT_TIMEOUT, ExternalBackend, UpscaleRequest
from .image import Image16
from .pngio import load_png16, save_png16
from .resample import ResizeSpec, resize_bicubic

log = logging.getLogger(__name__)

BUILTIN_BICUBIC = "builtin_bicubic"
EXTERNAL_PROCESS = "external_process"


@dataclass(frozen=True)
class CodecConfig:
    """source_size is the native resolution; compressed_size must divide it
    by a power of 2. The pipeline defaults are 1024 down to 512 or 256."""

    source_size: int = 1024
    compressed_size: int = 512
    threads: int = 4

    def __post_init__(self):
        if self.source_size < 1 or self.compressed_size < 1:
            raise ValueError("sizes must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        ratio, rem = divmod(self.source_size, self.compressed_size)
        if rem != 0 or ratio < 1 or ratio & (ratio - 1):
            raise ValueError(
                f"source_size/compressed_size must be a power of 2, got "
                f"{self.source_size}/{self.compressed_size}"
            )


@dataclass(frozen=True)
class BackendSpec:
    """Which 2x upscaler decompression uses, plus its inference knobs."""

    kind: str = BUILTIN_BICUBIC
    command: tuple = ()
    steps: int = 20
    guidance_scale: float = 0.0
    scale_factor: int = 2
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in (BUILTIN_BICUBIC, EXTERNAL_PROCESS):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.scale_factor != 2:
            raise ValueError("backends are strictly 2x; chains handle larger factors")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.kind == EXTERNAL_PROCESS and not self.command:
            raise ValueError("external backend needs a command")

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "command": list(self.command),
            "steps": self.steps,
            "guidance_scale": self.guidance_scale,
            "scale_factor": self.scale_factor,
            "seed": self.seed,
        }


@dataclass
class BatchSummary:
    images_processed: int
    bytes_in: int
    bytes_out: int
    failures: list  # (image_id, message), sorted by image_id
    wall_time: float
    backend_calls: int = 0
    chain_steps: int | None = None


def derive_image_seed(global_seed: int, image_id: str) -> int:
    """Stable per-image seed: global seed XOR a digest of the image id.

    Python's hash() is salted per process, so a keyed digest is used
    instead; the same (seed, id) pair always yields the same value.
    """
    digest = hashlib.blake2s(image_id.encode("utf-8"), digest_size=8).digest()
    return (global_seed ^ int.from_bytes(digest, "big")) & 0x7FFF_FFFF_FFFF_FFFF


def chain_length(input_size: int, target_size: int) -> int:
    """Number of 2x applications to reach target_size; DimensionError for
    non-power-of-2 ratios (checked before any backend call)."""
    if input_size < 1 or target_size < input_size:
        raise DimensionError(f"cannot upscale {input_size} to {target_size}")
    ratio, rem = divmod(target_size, input_size)
    if rem != 0 or ratio & (ratio - 1):
        raise DimensionError(
            f"{target_size}/{input_size} is not a power of 2; refusing the chain"
        )
    return ratio.bit_length() - 1


def compress_image(img: Image16, cfg: CodecConfig) -> Image16:
    """Downscale a source_size^2 image to compressed_size^2 (antialiased)."""
    if img.width != cfg.source_size or img.height != cfg.source_size:
        raise DimensionMismatch(
            f"expected {cfg.source_size}x{cfg.source_size}, got {img.width}x{img.height}"
        )
    spec = ResizeSpec(cfg.compressed_size, cfg.compressed_size, antialias=True)
    return resize_bicubic(img, spec)


class _BuiltinSession:
    """In-process bicubic 2x backend."""

    def __init__(self, spec: BackendSpec):
        self.spec = spec
        self.calls = 0

    def upscale_once(self, img: Image16, image_id: str, step: int) -> Image16:
        self.calls += 1
        return resize_bicubic(img, ResizeSpec(img.width * 2, img.height * 2))

    def close(self) -> None:
        pass


class _ExternalSession:
    """File-based bridge to one external backend process.

    Each call writes the input to a scratch PNG, sends one request, and
    loads the declared output. Scratch files live in a private directory
    removed on close.
    """

    def __init__(self, spec: BackendSpec, timeout: float = DEFAULT_TIMEOUT):
        self.spec = spec
        self._backend = ExternalBackend(spec.command, timeout=timeout)
        self._dir = Path(tempfile.mkdtemp(prefix="sr-backend-"))
        self._serial = 0

    @property
    def calls(self) -> int:
        return self._backend.calls

    def upscale_once(self, img: Image16, image_id: str, step: int) -> Image16:
        self._serial += 1
        stem = f"r{self._serial:06d}"
        in_path = self._dir / f"{stem}-in.png"
        out_path = self._dir / f"{stem}-out.png"
        save_png16(img, in_path)
        seed = None
        if self.spec.seed is not None:
            seed = derive_image_seed(self.spec.seed, image_id)
        request = UpscaleRequest(
            id=f"{image_id}.{step}",
            input=str(in_path),
            output=str(out_path),
            scale=2,
            steps=self.spec.steps,
            guidance_scale=self.spec.guidance_scale,
            seed=seed,
        )
        try:
            self._backend.call(request)
            result = load_png16(out_path)
        finally:
            in_path.unlink(missing_ok=True)
            out_path.unlink(missing_ok=True)
        return result

    def close(self) -> None:
        self._backend.close()
        try:
            self._dir.rmdir()
        except OSError:
            pass


def open_backend(spec: BackendSpec, timeout: float = DEFAULT_TIMEOUT):
    if spec.kind == EXTERNAL_PROCESS:
        return _ExternalSession(spec, timeout=timeout)
    return _BuiltinSession(spec)


def decompress_image(
    img: Image16,
    target_size: int,
    backend: BackendSpec = BackendSpec(),
    session=None,
    image_id: str = "",
) -> Image16:
    """Chain the 2x backend until the image reaches target_size^2.

    The chain length is fixed up front from the size ratio; a backend
    output of any other size aborts with DimensionError. Every step goes
    through the 16-bit raster type, so intermediate results are quantized
    exactly as they would be on disk.
    """
    if img.width != img.height:
        raise DimensionError(f"chain needs square input, got {img.width}x{img.height}")
    steps = chain_length(img.width, target_size)
    own_session = session is None
    if own_session:
        session = open_backend(backend)
    try:
        current = img
        for step in range(steps):
            expected = current.width * 2
            current = session.upscale_once(current, image_id, step)
            if current.width != expected or current.height != expected:
                raise DimensionError(
                    f"backend returned {current.width}x{current.height}, "
                    f"expected {expected}x{expected}"
                )
        return current
    finally:
        if own_session:
            session.close()


class _SessionPool:
    """One backend session per worker thread, torn down with the batch."""

    def __init__(self, spec: BackendSpec, timeout: float):
        self._spec = spec
        self._timeout = timeout
        self._local = threading.local()
        self._all = []
        self._lock = threading.Lock()

    def get(self):
        session = getattr(self._local, "session", None)
        if session is None:
            session = open_backend(self._spec, timeout=self._timeout)
            self._local.session = session
            with self._lock:
                self._all.append(session)
        return session

    def total_calls(self) -> int:
        with self._lock:
            return sum(s.calls for s in self._all)

    def close_all(self) -> None:
        with self._lock:
            sessions, self._all = self._all, []
        for s in sessions:
            s.close()


def run_batch(
    manifest,
    out_dir,
    op: str,
    cfg: CodecConfig,
    backend: BackendSpec | None = None,
    timeout: float = DEFAULT_TIMEOUT,
    png_text: str | None = None,
) -> BatchSummary:
    """Process a list of PNG paths with cfg.threads workers.

    op is "compress" (source -> compressed_size) or "decompress"
    (compressed -> source_size via the backend chain). Failures are
    isolated per image and recorded, never aborting the batch. Output
    files reuse the input stem. png_text, when given, is embedded in every
    output as the codec metadata chunk.
    """
    if op not in ("compress", "decompress"):
        raise ValueError(f"op must be compress or decompress, got {op!r}")
    paths = [Path(p) for p in manifest]
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = backend if backend is not None else BackendSpec()
    pool = _SessionPool(spec, timeout) if op == "decompress" else None
    chain_steps = None

    def work(path: Path):
        img = load_png16(path)
        if op == "compress":
            result = compress_image(img, cfg)
        else:
            result = decompress_image(
                img,
                cfg.source_size,
                spec,
                session=pool.get(),
                image_id=path.stem,
            )
        written = save_png16(result, out_dir / f"{path.stem}.png", text=png_text)
        return path.stat().st_size, written

    started = time.monotonic()
    processed = 0
    bytes_in = 0
    bytes_out = 0
    failures = []
    try:
        with ThreadPoolExecutor(max_workers=cfg.threads) as workers:
            outcomes = workers.map(
                lambda p: _guard(work, p), paths
            )
            for path, outcome in zip(paths, outcomes):
                if isinstance(outcome, tuple):
                    processed += 1
                    bytes_in += outcome[0]
                    bytes_out += outcome[1]
                else:
                    failures.append((path.stem, outcome))
    finally:
        if pool is not None:
            backend_calls = pool.total_calls()
            pool.close_all()
        else:
            backend_calls = 0

    if op == "decompress" and processed:
        # all successful chains share one length; expose it for the summary
        chain_steps = backend_calls // processed if backend_calls % processed == 0 else None

    wall = time.monotonic() - started
    failures.sort(key=lambda f: f[0])
    summary = BatchSummary(
        images_processed=processed,
        bytes_in=bytes_in,
        bytes_out=bytes_out,
        failures=failures,
        wall_time=wall,
        backend_calls=backend_calls,
        chain_steps=chain_steps,
    )
    log.info(
        "%s: %d ok, %d failed, %.2fs wall", op, processed, len(failures), wall
    )
    return summary


def _guard(fn, path):
    try:
        return fn(path)
    except SrcodecError as exc:
        return f"{type(exc).__name__}: {exc}"
    except OSError as exc:
        return f"{type(exc).__name__}: {exc}"


def write_summary(summary: BatchSummary, path, config: dict | None = None) -> None:
    """Persist a batch summary as JSON.

    wall_time is deliberately left out: the file must be byte-identical
    across reruns and thread counts, and elapsed time is neither. It goes
    to the log instead.
    """
    payload = {
        "images_processed": summary.images_processed,
        "bytes_in": summary.bytes_in,
        "bytes_out": summary.bytes_out,
        "failures": [[image_id, msg] for image_id, msg in summary.failures],
        "backend_calls": summary.backend_calls,
    }
    if summary.chain_steps is not None:
        payload["chain_steps"] = summary.chain_steps
    if config:
        payload["config"] = config
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
