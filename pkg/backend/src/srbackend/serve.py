"""Stdio loop for the sr-backend/1 line protocol.

One JSON object per line in each direction. The loop must outlive every
per-request failure: anything that goes wrong while handling a request
becomes a status "error" reply (with id null when the line was not even
parseable), and only a closed input stream ends the process.
"""

import json
import sys

from .channels import from_unit, gray_to_rgb, read_gray16, rgb_to_gray, to_unit, write_gray16

PROTOCOL = "sr-backend/1"

DEFAULT_STEPS = 20
DEFAULT_GUIDANCE = 0.0


def upscale_x2(model, input_path, output_path, steps: int = DEFAULT_STEPS,
               guidance_scale: float = DEFAULT_GUIDANCE, seed=None) -> None:
    """Read a grayscale PNG, double it through the model, write the result.

    The model sees replicated RGB in [0, 1]; its output is averaged back
    to one channel and requantized to 16 bits. Dimensions must be even
    and the model must return exactly double, or the request fails.
    """
    gray = read_gray16(input_path)
    h, w = gray.shape
    if h % 2 or w % 2:
        raise ValueError(f"input must have even dimensions, got {w}x{h}")
    rgb = gray_to_rgb(to_unit(gray))
    out = model.upscale(rgb, steps=steps, guidance_scale=guidance_scale, seed=seed)
    if out.ndim != 3 or out.shape[2] != 3 or out.shape[:2] != (2 * h, 2 * w):
        raise ValueError(f"model returned shape {out.shape}, expected ({2 * h}, {2 * w}, 3)")
    write_gray16(from_unit(rgb_to_gray(out)), output_path)


def _reply(stdout, payload: dict) -> None:
    stdout.write(json.dumps(payload) + "\n")
    stdout.flush()


def _handle(model, req: dict) -> None:
    if req.get("op") != "upscale":
        raise ValueError(f"unsupported op {req.get('op')!r}")
    scale = req.get("scale", 2)
    if scale != 2:
        raise ValueError(f"only scale 2 is supported, got {scale!r}")
    if not req.get("input") or not req.get("output"):
        raise ValueError("request needs input and output paths")
    seed = req.get("seed")
    upscale_x2(
        model,
        req["input"],
        req["output"],
        steps=int(req.get("steps", DEFAULT_STEPS)),
        guidance_scale=float(req.get("guidance_scale", DEFAULT_GUIDANCE)),
        seed=None if seed is None else int(seed),
    )


def serve(model, stdin=None, stdout=None) -> int:
    """Handshake, then request/reply until the input stream closes."""
    stdin = sys.stdin if stdin is None else stdin
    stdout = sys.stdout if stdout is None else stdout
    try:
        _reply(stdout, {"protocol": PROTOCOL, "scales": [2]})
        for raw in stdin:
            raw = raw.strip()
            if not raw:
                continue
            try:
                req = json.loads(raw)
                if not isinstance(req, dict):
                    raise ValueError("request is not a JSON object")
            except ValueError as exc:
                _reply(stdout, {"id": None, "status": "error",
                                "message": f"bad request line: {exc}"})
                continue
            req_id = req.get("id")
            try:
                _handle(model, req)
            except Exception as exc:
                _reply(stdout, {"id": req_id, "status": "error",
                                "message": f"{type(exc).__name__}: {exc}"})
                continue
            _reply(stdout, {"id": req_id, "status": "ok",
                            "meta": {"model": model.name, "precision": model.precision}})
    except BrokenPipeError:
        # host went away mid-reply; nothing left to serve
        return 0
    return 0
