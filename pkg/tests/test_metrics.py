"""Quality-metric checks.

The feature-similarity score is verified against tests/reference_fsim.py, a
from-scratch transliteration of the published filter-bank construction that
shares no code with the implementation. PSNR is pinned to hand-derived
closed forms.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from srcodec.errors import DimensionMismatch, TooSmall
from srcodec.image import Image16, constant16
from srcodec.metrics import (
    FsimConfig,
    MetricResult,
    _downsample_factor,
    aggregate,
    batch_metrics,
    fsim,
    phase_congruency,
    psnr,
)
from srcodec.pngio import save_png16

from helpers import textured
from reference_fsim import reference_fsim


# --- PSNR ---

def test_psnr_identical_is_infinite():
    img = textured(32, seed=1)
    assert psnr(img, img) == math.inf
    assert psnr(img, img, max_value=65535) == math.inf


def test_psnr_full_scale_error_is_zero_db():
    a = constant16(16, 16, 0)
    b = constant16(16, 16, 65535)
    assert abs(psnr(a, b, max_value=65535) - 0.0) <= 1e-9


def test_psnr_half_unit_mse():
    # one sample off by 257 (one 8-bit count), the other exact:
    # MSE = 0.5 on the 8-bit scale, PSNR = 10*log10(255^2 / 0.5)
    a = Image16(np.array([[0, 0]], dtype=np.uint16))
    b = Image16(np.array([[257, 0]], dtype=np.uint16))
    expected = 10.0 * math.log10(255.0 ** 2 / 0.5)
    assert abs(psnr(a, b, max_value=255) - expected) <= 1e-9


def test_psnr_scale_modes_agree():
    # 255*257 == 65535, so both dynamic-range conventions give the same
    # ratio up to float rounding
    a = textured(48, seed=2)
    b = textured(48, seed=3)
    assert psnr(a, b, 255) == pytest.approx(psnr(a, b, 65535), abs=1e-9)


def test_psnr_rejects_bad_inputs():
    a = constant16(8, 8, 0)
    with pytest.raises(DimensionMismatch):
        psnr(a, constant16(8, 9, 0))
    with pytest.raises(ValueError):
        psnr(a, a, max_value=1023)


def test_psnr_symmetric():
    a = textured(32, seed=4)
    b = textured(32, seed=5)
    assert psnr(a, b) == psnr(b, a)


# --- feature similarity ---

def test_fsim_identical_is_one():
    img = textured(64, seed=6)
    assert fsim(img, img) == pytest.approx(1.0, abs=1e-9)


def test_fsim_matches_reference():
    cases = [
        (64, 64), (65, 97), (128, 128), (96, 200),
    ]
    for idx, (h, w) in enumerate(cases):
        rng = np.random.default_rng(100 + idx)
        a = Image16(rng.integers(0, 65536, size=(h, w), dtype=np.uint16))
        b = textured(max(h, w), seed=idx)
        b = Image16(b.pixels[:h, :w].copy())
        got = fsim(a, b)
        want = reference_fsim(a.pixels, b.pixels)
        assert got == pytest.approx(want, abs=1e-10), (h, w)


def test_fsim_matches_reference_downsampled():
    # 300 -> factor 1, 384 -> factor 2: both sides of the block-average path
    for size in (300, 384):
        a = textured(size, seed=size)
        b = textured(size, seed=size + 1)
        assert fsim(a, b) == pytest.approx(reference_fsim(a.pixels, b.pixels), abs=1e-10)


def test_fsim_dc_invariant():
    # shifting both images by the same constant must not move the score;
    # halve first so the +3000 shift cannot clip
    a = Image16((textured(64, seed=7).pixels // 2).astype(np.uint16))
    b = Image16((textured(64, seed=8).pixels // 2).astype(np.uint16))
    shift_a = Image16(a.pixels + np.uint16(3000))
    shift_b = Image16(b.pixels + np.uint16(3000))
    assert fsim(shift_a, shift_b) == pytest.approx(fsim(a, b), abs=1e-12)


def test_fsim_degrades_with_noise():
    ref = textured(128, seed=9)
    rng = np.random.default_rng(10)
    noisy = Image16(
        np.clip(ref.pixels + rng.normal(0, 4000, ref.pixels.shape), 0, 65535).astype(np.uint16)
    )
    score = fsim(ref, noisy)
    assert 0.0 < score < 1.0


def test_fsim_rejects_mismatched_shapes():
    with pytest.raises(DimensionMismatch):
        fsim(constant16(32, 32, 0), constant16(32, 33, 0))


def test_fsim_too_small():
    with pytest.raises(TooSmall):
        fsim(constant16(8, 8, 0), constant16(8, 8, 0))
    with pytest.raises(TooSmall):
        fsim(constant16(300, 12, 0), constant16(300, 12, 0))


def test_fsim_constant_pair():
    # structure-free images: energy map is all zero, pooling falls back to
    # the unweighted mean, and identical constants still score 1.0
    a = constant16(32, 32, 20000)
    assert fsim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_phase_congruency_constant_is_zero():
    pc = phase_congruency(constant16(64, 64, 30000))
    assert pc.shape == (64, 64)
    assert np.all(pc == 0.0)


def test_phase_congruency_peaks_at_step_edge():
    arr = np.zeros((64, 64), dtype=np.uint16)
    arr[:, 32:] = 50000
    pc = phase_congruency(Image16(arr))
    col_strength = pc.mean(axis=0)
    best = float(col_strength.max())
    # the FFT periodization makes the wrap seam an edge too, so the true
    # edge columns tie with the border columns and nothing else
    assert col_strength[31] == pytest.approx(best, abs=1e-9)
    assert col_strength[32] == pytest.approx(best, abs=1e-9)
    winners = set(np.flatnonzero(col_strength >= best - 1e-9).tolist())
    assert winners <= {0, 31, 32, 63}


def test_phase_congruency_ramp_seam_is_local_max():
    # periodization turns a ramp into a sawtooth; the jump at the wrap must
    # stand out sharply against the smooth flank next to it
    ramp = np.tile(np.linspace(5000, 60000, 64, dtype=np.uint16), (64, 1))
    cs = phase_congruency(Image16(ramp)).mean(axis=0)
    assert cs[0] > 1.5 * cs[1:9].max()
    assert cs[63] > 1.5 * cs[55:63].max()


def test_downsample_factor_rounds_half_up():
    assert _downsample_factor(255, 255) == 1
    assert _downsample_factor(256, 256) == 1
    assert _downsample_factor(383, 400) == 1
    assert _downsample_factor(384, 400) == 2
    assert _downsample_factor(640, 700) == 3
    assert _downsample_factor(1024, 1024) == 4
    assert _downsample_factor(4096, 100) == 1  # min side rules


def test_fsim_config_validation():
    with pytest.raises(ValueError):
        FsimConfig(scales=0)
    with pytest.raises(ValueError):
        FsimConfig(t2=-1)
    with pytest.raises(ValueError):
        FsimConfig(sigma_on_f=1.5)
    with pytest.raises(ValueError):
        FsimConfig(min_wavelength=1.0)


@given(st.integers(0, 1000))
@settings(max_examples=10, deadline=None)
def test_fsim_bounded(seed):
    a = textured(48, seed=seed)
    b = textured(48, seed=seed + 5000)
    s = fsim(a, b)
    assert 0.0 < s <= 1.0


# --- aggregation ---

def test_aggregate_basic():
    results = [
        MetricResult("a", 40.0, 0.9),
        MetricResult("b", 44.0, 0.8),
        MetricResult("c", math.inf, 1.0),
    ]
    agg = aggregate(results)
    assert agg.count == 3
    assert agg.psnr_infinite == 1
    assert agg.psnr_mean == pytest.approx(42.0)
    assert agg.psnr_variance == pytest.approx(4.0)  # population variance
    assert agg.psnr_std == pytest.approx(2.0)
    assert agg.fsim_mean == pytest.approx(0.9)
    assert agg.fsim_variance == pytest.approx(np.var([0.9, 0.8, 1.0]))


def test_aggregate_all_identical_pairs():
    agg = aggregate([MetricResult("a", math.inf, 1.0), MetricResult("b", math.inf, 1.0)])
    assert agg.psnr_mean == math.inf
    assert agg.psnr_variance == 0.0
    assert agg.psnr_infinite == 2


def test_aggregate_empty():
    agg = aggregate([])
    assert agg.count == 0
    assert agg.psnr_mean == 0.0
    assert agg.fsim_mean == 0.0


def test_aggregate_order_independent():
    results = [MetricResult(f"i{k}", 30.0 + k, 0.5 + k / 100.0) for k in range(20)]
    fwd = aggregate(results)
    rev = aggregate(results[::-1])
    assert fwd.psnr_mean == pytest.approx(rev.psnr_mean, abs=1e-12)
    assert fwd.fsim_variance == pytest.approx(rev.fsim_variance, abs=1e-12)


# --- batch scoring ---

def _quality_dirs(tmp_path, n=3):
    ref_dir = tmp_path / "ref"
    test_dir = tmp_path / "test"
    ref_dir.mkdir()
    test_dir.mkdir()
    rng = np.random.default_rng(0)
    for i in range(n):
        img = textured(64, seed=i)
        save_png16(img, ref_dir / f"im{i}.png")
        noisy = Image16(
            np.clip(img.pixels + rng.normal(0, 800, img.pixels.shape), 0, 65535).astype(np.uint16)
        )
        save_png16(noisy, test_dir / f"im{i}.png")
    return ref_dir, test_dir


def test_batch_metrics_outputs(tmp_path):
    ref_dir, test_dir = _quality_dirs(tmp_path)
    save_png16(textured(64, seed=50), ref_dir / "only_ref.png")
    save_png16(textured(64, seed=51), test_dir / "only_test.png")
    csv_path = tmp_path / "m.csv"
    json_path = tmp_path / "m.json"
    results, report = batch_metrics(
        ref_dir, test_dir, out_csv=csv_path, out_json=json_path
    )
    assert [r.image_id for r in results] == ["im0", "im1", "im2"]
    assert report.count == 3
    text = csv_path.read_text()
    assert text.splitlines()[0] == "image_id,psnr_db,fsim"
    import json as json_mod

    payload = json_mod.loads(json_path.read_text())
    assert payload["unmatched"]["reference_only"] == ["only_ref"]
    assert payload["unmatched"]["test_only"] == ["only_test"]
    assert payload["config"]["psnr_max_value"] == 255
    assert payload["aggregate"]["count"] == 3


def test_batch_metrics_thread_invariant(tmp_path):
    ref_dir, test_dir = _quality_dirs(tmp_path)
    one, _ = batch_metrics(ref_dir, test_dir, threads=1)
    four, _ = batch_metrics(ref_dir, test_dir, threads=4)
    assert one == four


def test_batch_metrics_infinite_marker(tmp_path):
    ref_dir = tmp_path / "r"
    ref_dir.mkdir()
    save_png16(textured(64, seed=1), ref_dir / "same.png")
    csv_path = tmp_path / "m.csv"
    results, report = batch_metrics(ref_dir, ref_dir, out_csv=csv_path)
    assert results[0].psnr_db == math.inf
    assert report.psnr_infinite == 1
    assert ",inf," in csv_path.read_text()


def test_batch_metrics_empty_intersection(tmp_path):
    from srcodec.errors import EmptyIntersection

    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    save_png16(constant16(16, 16, 0), a / "x.png")
    save_png16(constant16(16, 16, 0), b / "y.png")
    with pytest.raises(EmptyIntersection):
        batch_metrics(a, b)
