"""Merge metric, score, and size artifacts into one Markdown + JSON bundle.

Input files are the JSON artifacts the other subcommands emit; the kind of
each is recognized from its top-level keys. Output is deterministic for a
given input set: inputs are ordered by filename and nothing time-dependent
is written.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import IoError


def _load(path: Path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise IoError(str(exc)) from exc
    except ValueError as exc:
        raise IoError(f"{path}: not valid JSON: {exc}") from exc


def _kind(payload: dict) -> str | None:
    if "aggregate" in payload:
        return "quality"
    if "source" in payload and "compressed" in payload:
        return "sizes"
    if "bootstrap" in payload and "metrics" in payload:
        return "classification"
    return None


def _mb(nbytes: int) -> str:
    return f"{nbytes / 1e6:.2f}"


def _num(value, digits: int = 4) -> str:
    if isinstance(value, str):  # "inf" marker survives as-is
        return value
    return f"{value:.{digits}f}"


def build_report(inputs) -> tuple[dict, str]:
    """Returns (JSON payload, Markdown text) for a set of artifact files."""
    sections: dict = {"sizes": [], "quality": [], "classification": []}
    skipped = []
    for path in sorted(Path(p) for p in inputs):
        payload = _load(path)
        kind = _kind(payload)
        if kind is None:
            skipped.append(path.name)
            continue
        sections[kind].append({"source_file": path.name, "data": payload})

    lines = ["# Benchmark report", ""]

    if sections["sizes"]:
        lines += ["## Dataset sizes", ""]
        lines += ["| Dataset | Bytes | MB | Ratio vs source |", "| --- | --- | --- | --- |"]
        for entry in sections["sizes"]:
            data = entry["data"]
            src = data["source"]
            lines.append(
                f"| source ({src['directory']}) | {src['bytes']} | {_mb(src['bytes'])} | 1.000 |"
            )
            for comp in data["compressed"]:
                lines.append(
                    f"| {comp['directory']} | {comp['bytes']} | {_mb(comp['bytes'])} "
                    f"| {_num(comp['ratio_vs_source'], 3)} |"
                )
            zb = data.get("zip_baseline")
            if zb is not None:
                lines.append(
                    f"| ZIP baseline | {zb['bytes']} | {_mb(zb['bytes'])} "
                    f"| {_num(zb['ratio_vs_source'], 3)} |"
                )
        lines.append("")

    if sections["quality"]:
        lines += ["## Quality metrics", ""]
        lines += [
            "| Source | Images | FSIM mean | FSIM variance | PSNR mean (dB) "
            "| PSNR variance | PSNR std | Infinite PSNR |",
            "| --- | --- | --- | --- | --- | --- | --- | --- |",
        ]
        for entry in sections["quality"]:
            agg = entry["data"]["aggregate"]
            lines.append(
                f"| {entry['source_file']} | {agg['count']} | {_num(agg['fsim_mean'])} "
                f"| {_num(agg['fsim_variance'], 6)} | {_num(agg['psnr_mean'], 2)} "
                f"| {_num(agg['psnr_variance'], 2)} | {_num(agg['psnr_std'], 2)} "
                f"| {agg['psnr_infinite']} |"
            )
        lines.append("")

    if sections["classification"]:
        lines += ["## Classification metrics", ""]
        for entry in sections["classification"]:
            data = entry["data"]
            level = data["bootstrap"].get("ci_level", 0.95)
            pct = f"{level * 100:g}%"
            lines.append(f"### {entry['source_file']}")
            lines.append("")
            lines += [f"| Metric | Value ({pct} CI) |", "| --- | --- |"]
            for name in ("auc", "accuracy", "precision", "recall"):
                m = data["metrics"].get(name)
                if m is None:
                    continue
                if "point" not in m:  # metric failed upstream, carries an error note
                    lines.append(f"| {name.upper() if name == 'auc' else name} | n/a ({m.get('error', 'not computed')}) |")
                    continue
                cell = f"{_num(m['point'])} ({_num(m['lo'])} – {_num(m['hi'])})"
                if m.get("skipped"):
                    cell += f", {m['skipped']} draws skipped"
                lines.append(f"| {name.upper() if name == 'auc' else name} | {cell} |")
            lines.append("")
            lines.append(
                f"Threshold {data.get('threshold')}, bootstrap "
                f"{data['bootstrap']['repeats']}x{data['bootstrap']['sample_size']}, "
                f"seed {data['bootstrap']['seed']}."
            )
            lines.append("")

    payload = {
        "sizes": sections["sizes"],
        "quality": sections["quality"],
        "classification": sections["classification"],
        "skipped_inputs": skipped,
    }
    return payload, "\n".join(lines)


def write_report(inputs, out_dir, config: dict | None = None) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload, markdown = build_report(inputs)
    if config:
        payload["config"] = config
    with open(out_dir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out_dir / "report.md", "w") as fh:
        fh.write(markdown)
        if not markdown.endswith("\n"):
            fh.write("\n")
