"""Command-line entry point wiring the pipeline modules together.

Exit codes: 0 success, 1 setup error (bad paths, unreadable config),
2 nothing succeeded (empty input or every item failed), 64 usage error.

Flags may also be supplied through a TOML config file (--config): top-level
keys cover the global flags, one table per subcommand covers its options,
and explicit command-line flags always win. The effective configuration is
embedded in every artifact this tool writes, except values that must not
influence output bytes (worker count, elapsed time).
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .codec import BackendSpec, CodecConfig, run_batch, write_summary
from .dicom import parse_dicom, to_gray16
from .errors import EmptyIntersection, SrcodecError, StatsError
from .manifest import (
    StudyRecord,
    labeled_subset,
    read_manifest,
    split_patients,
    write_manifest,
    write_split,
)
from .metrics import FsimConfig, batch_metrics
from .pngio import save_png16
from .resample import DEFAULT_KERNEL_A, ResizeSpec, resize_bicubic
from .stats import (
    BootstrapConfig,
    bootstrap_ci,
    read_predictions,
    size_report,
    size_report_dict,
)
from .report import write_report

log = logging.getLogger("srcodec")

EXIT_OK = 0
EXIT_SETUP = 1
EXIT_NO_WORK = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code pinned to 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _compact_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise SrcodecError(f"cannot read config file: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise SrcodecError(f"bad config file {path}: {exc}") from exc


class _Settings:
    """Layered option lookup: command line, then config file, then default."""

    def __init__(self, args, file_cfg: dict, section: str):
        self._args = args
        self._top = file_cfg
        self._table = file_cfg.get(section, {})

    def get(self, name: str, default=None):
        value = getattr(self._args, name, None)
        if value is not None:
            return value
        if name in self._table:
            return self._table[name]
        if name in self._top and not isinstance(self._top.get(name), dict):
            return self._top[name]
        return default

    def threads(self) -> int:
        return int(self.get("threads", 4))

    def seed(self, default=None):
        value = self.get("seed", default)
        return None if value is None else int(value)


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--threads", type=int, default=None,
                     help="worker threads (default 4)")
    sub.add_argument("--seed", type=int, default=None,
                     help="seed for every stochastic step")
    sub.add_argument("--verbose", action="store_true", default=None,
                     help="debug logging")
    sub.add_argument("--config", default=None, metavar="FILE",
                     help="TOML config file; command-line flags override it")
    sub.add_argument("--version", action="version",
                     version=f"%(prog)s {__version__}")


def build_parser() -> _Parser:
    parser = _Parser(prog="srcodec", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = subs.add_parser("ingest", help="convert DICOM files to normalized PNG")
    p.add_argument("--dicom-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--size", type=int, default=None,
                   help="output resolution (default 1024)")
    p.add_argument("--manifest", default=None,
                   help="manifest CSV path (default OUT_DIR/manifest.csv)")
    _common_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("compress", help="downscale a PNG corpus")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--size", type=int, choices=(512, 256), default=None,
                   help="compressed resolution (default 512)")
    p.add_argument("--source-size", type=int, default=None,
                   help="expected input resolution (default 1024)")
    _common_flags(p)
    p.set_defaults(func=cmd_compress)

    p = subs.add_parser("decompress", help="chain a 2x backend up to the target size")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--target", type=int, default=None,
                   help="output resolution (default 1024)")
    p.add_argument("--backend", choices=("bicubic", "external"), default=None)
    p.add_argument("--backend-cmd", default=None,
                   help="command line of the external backend process")
    p.add_argument("--steps", type=int, default=None,
                   help="inference steps per 2x application (default 20)")
    p.add_argument("--guidance", type=float, default=None,
                   help="guidance scale (default 0.0)")
    p.add_argument("--timeout", type=float, default=None,
                   help="seconds per backend request (default 300)")
    _common_flags(p)
    p.set_defaults(func=cmd_decompress)

    p = subs.add_parser("metrics", help="score a decompressed corpus against its reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--max-value", type=int, choices=(255, 65535), default=None,
                   help="PSNR dynamic range (default 255)")
    _common_flags(p)
    p.set_defaults(func=cmd_metrics)

    p = subs.add_parser("split", help="patient-disjoint train/validation/test split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratios", default=None, help="e.g. 60:20:20")
    p.add_argument("--out-dir", default=None,
                   help="output directory (default MANIFEST_DIR/splits)")
    _common_flags(p)
    p.set_defaults(func=cmd_split)

    p = subs.add_parser("score", help="AUC/accuracy/precision/recall with bootstrap CIs")
    p.add_argument("--predictions", required=True)
    p.add_argument("--bootstrap", default=None,
                   help="repeats x sample size, e.g. 100x10 (the default)")
    p.add_argument("--threshold", type=float, default=None,
                   help="decision threshold (default 0.5)")
    p.add_argument("--out", default=None, help="output JSON (default score.json)")
    _common_flags(p)
    p.set_defaults(func=cmd_score)

    p = subs.add_parser("sizes", help="byte totals and ZIP baseline for corpora")
    p.add_argument("--source", required=True)
    p.add_argument("--compressed", nargs="*", default=None)
    p.add_argument("--zip-baseline", action=argparse.BooleanOptionalAction,
                   default=None, help="include the single-archive ZIP baseline")
    p.add_argument("--out", default=None, help="output JSON (default sizes.json)")
    _common_flags(p)
    p.set_defaults(func=cmd_sizes)

    p = subs.add_parser("report", help="merge artifacts into Markdown + JSON")
    p.add_argument("--inputs", nargs="+", required=True)
    p.add_argument("--out", required=True, help="output directory")
    _common_flags(p)
    p.set_defaults(func=cmd_report)

    return parser


def cmd_ingest(args, cfg: _Settings) -> int:
    dicom_dir = Path(args.dicom_dir)
    out_dir = Path(args.out_dir)
    if not dicom_dir.is_dir():
        log.error("not a directory: %s", dicom_dir)
        return EXIT_SETUP
    out_dir.mkdir(parents=True, exist_ok=True)
    size = int(cfg.get("size", 1024))
    manifest_path = cfg.get("manifest") or out_dir / "manifest.csv"
    files = sorted(dicom_dir.glob("*.dcm"))

    text = _compact_json({
        "op": "ingest",
        "size": size,
        "kernel_a": DEFAULT_KERNEL_A,
        "antialias": True,
    })
    spec = ResizeSpec(size, size)

    def work(path: Path):
        parsed = parse_dicom(path.read_bytes())
        resized = resize_bicubic(to_gray16(parsed), spec)
        out_path = out_dir / f"{path.stem}.png"
        save_png16(resized, out_path, text=text)
        patient = parsed.patient_id or path.stem
        # manifest lives next to the images; relative names keep the file
        # independent of where the output tree is mounted
        return StudyRecord(patient_id=patient, image_id=path.stem, path=out_path.name)

    records = []
    failures = 0
    with ThreadPoolExecutor(max_workers=cfg.threads()) as pool:
        def guarded(path):
            try:
                return work(path)
            except (SrcodecError, OSError) as exc:
                return f"{path.name}: {type(exc).__name__}: {exc}"
        for outcome in pool.map(guarded, files):
            if isinstance(outcome, StudyRecord):
                records.append(outcome)
            else:
                failures += 1
                print(f"ingest: {outcome}", file=sys.stderr)

    records.sort(key=lambda r: r.image_id)
    if records:
        write_manifest(records, manifest_path)
    log.info("ingest: %d converted, %d failed", len(records), failures)
    return EXIT_OK if records else EXIT_NO_WORK


def cmd_compress(args, cfg: _Settings) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        log.error("not a directory: %s", in_dir)
        return EXIT_SETUP
    out_dir = Path(args.out_dir)
    size = int(cfg.get("size", 512))
    source_size = int(cfg.get("source_size", 1024))
    codec_cfg = CodecConfig(source_size=source_size, compressed_size=size,
                            threads=cfg.threads())
    config = {"op": "compress", "source_size": source_size, "compressed_size": size,
              "kernel_a": DEFAULT_KERNEL_A, "antialias": True}
    inputs = sorted(in_dir.glob("*.png"))
    summary = run_batch(inputs, out_dir, "compress", codec_cfg,
                        png_text=_compact_json(config))
    for image_id, message in summary.failures:
        print(f"compress: {image_id}: {message}", file=sys.stderr)
    write_summary(summary, out_dir / "compress_summary.json", config=config)
    return EXIT_OK if summary.images_processed else EXIT_NO_WORK


def cmd_decompress(args, cfg: _Settings) -> int:
    in_dir = Path(args.in_dir)
    if not in_dir.is_dir():
        log.error("not a directory: %s", in_dir)
        return EXIT_SETUP
    out_dir = Path(args.out_dir)
    target = int(cfg.get("target", 1024))
    backend_kind = cfg.get("backend", "bicubic")
    steps = int(cfg.get("steps", 20))
    guidance = float(cfg.get("guidance", 0.0))
    timeout = float(cfg.get("timeout", 300.0))
    seed = cfg.seed()

    if backend_kind == "external":
        command = cfg.get("backend_cmd")
        if not command:
            args.parser.error("--backend external requires --backend-cmd")
        spec = BackendSpec(kind="external_process",
                           command=tuple(shlex.split(str(command))),
                           steps=steps, guidance_scale=guidance, seed=seed)
    else:
        spec = BackendSpec(steps=steps, guidance_scale=guidance, seed=seed)

    codec_cfg = CodecConfig(source_size=target, compressed_size=target,
                            threads=cfg.threads())
    config = {"op": "decompress", "target": target, "backend": spec.as_dict()}
    inputs = sorted(in_dir.glob("*.png"))
    summary = run_batch(inputs, out_dir, "decompress", codec_cfg, backend=spec,
                        timeout=timeout, png_text=_compact_json(config))
    for image_id, message in summary.failures:
        print(f"decompress: {image_id}: {message}", file=sys.stderr)
    write_summary(summary, out_dir / "decompress_summary.json", config=config)
    return EXIT_OK if summary.images_processed else EXIT_NO_WORK


def cmd_metrics(args, cfg: _Settings) -> int:
    ref = Path(args.ref)
    test = Path(args.test)
    if not ref.is_dir() or not test.is_dir():
        log.error("reference and test must be directories")
        return EXIT_SETUP
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    max_value = int(cfg.get("max_value", 255))
    fsim_cfg = FsimConfig()
    try:
        results, report = batch_metrics(
            ref, test, fsim_cfg, max_value=max_value, threads=cfg.threads(),
            out_csv=out_dir / "metrics.csv", out_json=out_dir / "metrics.json",
        )
    except EmptyIntersection as exc:
        log.error("%s", exc)
        return EXIT_NO_WORK
    log.info("metrics: %d pairs, fsim mean %.4f, psnr mean %s",
             report.count, report.fsim_mean,
             "inf" if report.psnr_infinite == report.count else f"{report.psnr_mean:.2f}")
    return EXIT_OK


def cmd_split(args, cfg: _Settings) -> int:
    manifest_path = Path(args.manifest)
    try:
        records = read_manifest(manifest_path)
    except (SrcodecError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_SETUP
    ratios_text = str(cfg.get("ratios", "60:20:20"))
    try:
        parts = [float(p) for p in ratios_text.split(":")]
        if len(parts) != 3 or any(p < 0 for p in parts) or sum(parts) == 0:
            raise ValueError
    except ValueError:
        args.parser.error(f"--ratios must be three numbers like 60:20:20, got {ratios_text!r}")
    total = sum(parts)
    ratios = tuple(p / total for p in parts)
    seed = cfg.seed(default=0)

    unlabeled = [r for r in records if r.birads is None]
    if unlabeled:
        log.warning("%d records lack a screening score and are excluded", len(unlabeled))
    labeled = labeled_subset([r for r in records if r.birads is not None])
    if not labeled:
        log.error("no labeled records in %s", manifest_path)
        return EXIT_NO_WORK

    out_dir = Path(cfg.get("out_dir") or manifest_path.parent / "splits")
    assignment = split_patients(labeled, ratios, seed)
    write_split(labeled, assignment, out_dir, config={
        "op": "split", "manifest": manifest_path.name,
        "ratios_flag": ratios_text, "seed": seed,
    })
    log.info("split: %d labeled images over %d patients into %s",
             len(labeled), len(assignment.patient_assignments), out_dir)
    return EXIT_OK


def _parse_bootstrap(text: str, parser):
    try:
        repeats, sample = text.lower().split("x")
        return int(repeats), int(sample)
    except ValueError:
        parser.error(f"--bootstrap must look like 100x10, got {text!r}")


def cmd_score(args, cfg: _Settings) -> int:
    try:
        preds = read_predictions(args.predictions)
    except (SrcodecError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_SETUP
    repeats, sample_size = _parse_bootstrap(str(cfg.get("bootstrap", "100x10")), args.parser)
    threshold = float(cfg.get("threshold", 0.5))
    seed = cfg.seed(default=0)
    try:
        bs_cfg = BootstrapConfig(sample_size=sample_size, repeats=repeats, seed=seed)
    except ValueError as exc:
        args.parser.error(str(exc))

    metrics_out = {}
    computed = 0
    for name in ("auc", "accuracy", "precision", "recall"):
        try:
            result = bootstrap_ci(preds, name, bs_cfg, threshold=threshold)
        except (StatsError, ValueError) as exc:
            metrics_out[name] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        computed += 1
        metrics_out[name] = {
            "point": result.point, "lo": result.lo, "hi": result.hi,
            "skipped": result.skipped,
        }

    payload = {
        "predictions": Path(args.predictions).name,
        "records": len(preds),
        "threshold": threshold,
        "bootstrap": {"sample_size": sample_size, "repeats": repeats,
                      "ci_level": bs_cfg.ci_level, "seed": seed,
                      "resampling": "with replacement"},
        "metrics": metrics_out,
    }
    out_path = Path(cfg.get("out", "score.json"))
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("score: %d/%d metrics computed into %s", computed, 4, out_path)
    return EXIT_OK if computed else EXIT_NO_WORK


def cmd_sizes(args, cfg: _Settings) -> int:
    zip_flag = cfg.get("zip_baseline")
    zip_baseline = True if zip_flag is None else bool(zip_flag)
    compressed = args.compressed if args.compressed is not None else cfg.get("compressed", [])
    try:
        report = size_report(args.source, compressed, zip_baseline=zip_baseline)
    except SrcodecError as exc:
        log.error("%s", exc)
        return EXIT_SETUP
    payload = size_report_dict(report)
    payload["config"] = {"op": "sizes", "zip_baseline": zip_baseline}
    out_path = Path(cfg.get("out", "sizes.json"))
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def cmd_report(args, cfg: _Settings) -> int:
    try:
        write_report(args.inputs, args.out, config={"op": "report"})
    except SrcodecError as exc:
        log.error("%s", exc)
        return EXIT_SETUP
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "func", None) is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    args.parser = parser

    try:
        file_cfg = _load_config_file(getattr(args, "config", None))
    except SrcodecError as exc:
        print(f"srcodec: {exc}", file=sys.stderr)
        return EXIT_SETUP

    cfg = _Settings(args, file_cfg, args.command)
    verbose = bool(cfg.get("verbose", False))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )

    try:
        return args.func(args, cfg)
    except SrcodecError as exc:
        log.error("%s", exc)
        return EXIT_SETUP


if __name__ == "__main__":
    sys.exit(main())
