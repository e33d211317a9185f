"""Drives the companion srbackend package over the wire protocol, the way
production decompression does. Runs only when that package is installed;
the in-repo stub keeps protocol coverage when it is not."""

import importlib.util
import sys

import numpy as np
import pytest

from srcodec.codec import BackendSpec, CodecConfig, run_batch
from srcodec.errors import BackendError
from srcodec.extproc import ExternalBackend, UpscaleRequest
from srcodec.image import Image16
from srcodec.pngio import load_png16, save_png16

pytestmark = pytest.mark.skipif(
    importlib.util.find_spec("srbackend") is None,
    reason="srbackend not installed",
)

BACKEND_CMD = (sys.executable, "-m", "srbackend", "--model", "bicubic")


def _png(tmp_path, name, side, seed=0):
    rng = np.random.default_rng(seed)
    path = tmp_path / name
    save_png16(Image16(rng.integers(0, 65536, size=(side, side), dtype=np.uint16)), path)
    return path


def test_five_request_conformance(tmp_path):
    """Five scripted requests through one process: ids echo back, statuses
    are right, outputs have doubled dimensions, and an error mid-script
    does not take the process down."""
    plan = [("c1", 64), ("c2", 32), ("c3", None), ("c4", 128), ("c5", 16)]
    with ExternalBackend(BACKEND_CMD) as backend:
        assert 2 in backend.scales
        for req_id, side in plan:
            out = tmp_path / f"{req_id}_out.png"
            if side is None:
                request = UpscaleRequest(id=req_id, input=str(tmp_path / "absent.png"),
                                         output=str(out))
                with pytest.raises(BackendError):
                    backend.call(request)
                continue
            src = _png(tmp_path, f"{req_id}_in.png", side, seed=side)
            response = backend.call(UpscaleRequest(id=req_id, input=str(src),
                                                   output=str(out)))
            assert response.id == req_id
            assert response.status == "ok"
            assert load_png16(out).shape == (2 * side, 2 * side)
        assert backend.calls == 5


def test_chain_from_256_uses_exactly_two_calls(tmp_path):
    src = _png(tmp_path, "img.png", 256, seed=9)
    out_dir = tmp_path / "restored"
    spec = BackendSpec(kind="external_process", command=BACKEND_CMD)
    cfg = CodecConfig(source_size=1024, compressed_size=256, threads=1)
    summary = run_batch([src], out_dir, "decompress", cfg, backend=spec)
    assert summary.images_processed == 1, summary.failures
    assert summary.backend_calls == 2
    assert summary.chain_steps == 2
    assert load_png16(out_dir / "img.png").shape == (1024, 1024)
