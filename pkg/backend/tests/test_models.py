"""Model interface contracts for the stand-in and the diffusion wrapper."""

import importlib.util
import types

import numpy as np
import pytest

from srbackend import BicubicUpscaler, DEFAULT_MODEL_ID, LdmUpscaler, create_model

HAVE_DIFFUSERS = importlib.util.find_spec("diffusers") is not None
HAVE_TORCH = importlib.util.find_spec("torch") is not None


def _rgb(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, 1.0, size=(h, w, 3)).astype(np.float32)


def test_bicubic_doubles():
    out = BicubicUpscaler().upscale(_rgb(24, 40), steps=20, guidance_scale=0.0, seed=None)
    assert out.shape == (48, 80, 3)
    assert out.dtype == np.float32
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_bicubic_constant_stays_constant():
    rgb = np.full((16, 16, 3), 0.25, dtype=np.float32)
    out = BicubicUpscaler().upscale(rgb, steps=20, guidance_scale=0.0, seed=None)
    assert np.allclose(out, 0.25, atol=1e-6)


def test_bicubic_ignores_sampling_parameters():
    rgb = _rgb(16, 16, seed=3)
    model = BicubicUpscaler()
    a = model.upscale(rgb, steps=20, guidance_scale=0.0, seed=1)
    b = model.upscale(rgb, steps=5, guidance_scale=9.0, seed=2)
    assert np.array_equal(a, b)


def test_create_model_bicubic():
    assert isinstance(create_model("bicubic"), BicubicUpscaler)


@pytest.mark.skipif(HAVE_DIFFUSERS, reason="diffusers installed")
def test_create_model_without_diffusers_fails_cleanly():
    with pytest.raises(ModuleNotFoundError):
        create_model(DEFAULT_MODEL_ID)


class _FakePipeline:
    """Stands in for the diffusion pipeline: records the call, returns a
    nearest-neighbor doubling of its input tensor."""

    dtype = "fake32"

    def __init__(self):
        self.calls = []

    def __call__(self, prompt, image, num_inference_steps, guidance_scale,
                 generator, output_type):
        self.calls.append({
            "prompt": prompt,
            "image": image,
            "num_inference_steps": num_inference_steps,
            "guidance_scale": guidance_scale,
            "generator": generator,
            "output_type": output_type,
        })
        arr = image[0].permute(1, 2, 0).numpy()
        arr = (arr + 1.0) / 2.0
        doubled = np.repeat(np.repeat(arr, 2, axis=0), 2, axis=1)
        return types.SimpleNamespace(images=[doubled])


@pytest.mark.skipif(not HAVE_TORCH, reason="needs torch for tensor plumbing")
class TestLdmGlue:
    def test_forwards_parameters_verbatim(self):
        pipe = _FakePipeline()
        model = LdmUpscaler(pipeline=pipe, device="cpu")
        out = model.upscale(_rgb(8, 8), steps=20, guidance_scale=0.0, seed=None)
        call = pipe.calls[0]
        assert call["num_inference_steps"] == 20
        assert call["guidance_scale"] == 0.0
        assert call["generator"] is None
        assert call["output_type"] == "np"
        assert out.shape == (16, 16, 3)

    def test_input_tensor_range_and_layout(self):
        pipe = _FakePipeline()
        model = LdmUpscaler(pipeline=pipe, device="cpu")
        rgb = _rgb(8, 12, seed=5)
        model.upscale(rgb, steps=1, guidance_scale=0.0, seed=None)
        tensor = pipe.calls[0]["image"]
        assert tuple(tensor.shape) == (1, 3, 8, 12)
        assert float(tensor.min()) >= -1.0 and float(tensor.max()) <= 1.0
        back = (tensor[0].permute(1, 2, 0).numpy() + 1.0) / 2.0
        assert np.allclose(back, rgb, atol=1e-6)

    def test_seed_reaches_generator(self):
        pipe = _FakePipeline()
        model = LdmUpscaler(pipeline=pipe, device="cpu")
        model.upscale(_rgb(8, 8), steps=1, guidance_scale=0.0, seed=1234)
        generator = pipe.calls[0]["generator"]
        assert generator is not None
        assert generator.initial_seed() == 1234

    def test_metadata_reflects_pipeline(self):
        model = LdmUpscaler(pipeline=_FakePipeline(), device="cpu")
        assert model.precision == "fake32"
        assert model.name == DEFAULT_MODEL_ID


@pytest.fixture(scope="module")
def ldm_model():
    if not (HAVE_DIFFUSERS and HAVE_TORCH):
        pytest.skip("diffusers/torch not installed")
    try:
        return create_model(DEFAULT_MODEL_ID)
    except Exception as exc:
        pytest.skip(f"pretrained model unavailable: {type(exc).__name__}")


def test_pretrained_pinned_seed_is_reproducible(ldm_model, tmp_path):
    from srbackend import read_gray16, upscale_x2, write_gray16

    rng = np.random.default_rng(9)
    arr = rng.integers(0, 65536, size=(512, 512), dtype=np.uint16)
    src = tmp_path / "in.png"
    write_gray16(arr, src)
    a = tmp_path / "a.png"
    b = tmp_path / "b.png"
    upscale_x2(ldm_model, src, a, steps=20, guidance_scale=0.0, seed=77)
    upscale_x2(ldm_model, src, b, steps=20, guidance_scale=0.0, seed=77)
    assert read_gray16(a).shape == (1024, 1024)
    assert a.read_bytes() == b.read_bytes()
