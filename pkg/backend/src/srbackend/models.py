"""The 2x upscalers behind one small interface.

An upscaler takes an (H, W, 3) float32 array in [0, 1] plus the sampling
parameters and returns a (2H, 2W, 3) float array in [0, 1]. BicubicUpscaler
is a dependency-free stand-in; LdmUpscaler wraps a pretrained latent
diffusion pipeline and imports its heavy dependencies only when built.
"""

import numpy as np
from PIL import Image

DEFAULT_MODEL_ID = "stabilityai/sd-x2-latent-upscaler"


class BicubicUpscaler:
    """Plain interpolation with the model interface; accepts and ignores
    the sampling parameters."""

    name = "bicubic"
    precision = "float32"

    def upscale(self, rgb: np.ndarray, steps: int, guidance_scale: float, seed) -> np.ndarray:
        h, w = rgb.shape[:2]
        out = np.empty((2 * h, 2 * w, 3), dtype=np.float32)
        for c in range(3):
            plane = Image.fromarray(np.ascontiguousarray(rgb[:, :, c], dtype=np.float32), mode="F")
            out[:, :, c] = np.asarray(plane.resize((2 * w, 2 * h), Image.BICUBIC))
        return np.clip(out, 0.0, 1.0)


class LdmUpscaler:
    """Latent diffusion 2x upscaling via a diffusers pipeline.

    The pipeline argument exists so tests can inject a double; by default
    the pretrained model is fetched and moved to the requested device.
    Input crosses into the pipeline as a (1, 3, H, W) tensor in [-1, 1],
    output comes back as float arrays so no 8-bit quantization happens on
    the way out.
    """

    def __init__(self, model_id: str = DEFAULT_MODEL_ID, device: str | None = None,
                 pipeline=None):
        if pipeline is None:
            import torch
            from diffusers import StableDiffusionLatentUpscalePipeline

            device = device or ("cuda" if torch.cuda.is_available() else "cpu")
            dtype = torch.float16 if device == "cuda" else torch.float32
            pipeline = StableDiffusionLatentUpscalePipeline.from_pretrained(
                model_id, torch_dtype=dtype)
            pipeline = pipeline.to(device)
            if hasattr(pipeline, "set_progress_bar_config"):
                pipeline.set_progress_bar_config(disable=True)
        self.pipeline = pipeline
        self.device = device or "cpu"
        self.name = model_id
        self.precision = str(getattr(pipeline, "dtype", "float32"))

    def upscale(self, rgb: np.ndarray, steps: int, guidance_scale: float, seed) -> np.ndarray:
        import torch

        tensor = torch.from_numpy(np.ascontiguousarray(rgb, dtype=np.float32))
        tensor = tensor.permute(2, 0, 1).unsqueeze(0) * 2.0 - 1.0
        generator = None
        if seed is not None:
            generator = torch.Generator(self.device).manual_seed(int(seed))
        result = self.pipeline(
            prompt="",
            image=tensor,
            num_inference_steps=steps,
            guidance_scale=guidance_scale,
            generator=generator,
            output_type="np",
        )
        out = np.asarray(result.images[0], dtype=np.float32)
        return np.clip(out, 0.0, 1.0)


def create_model(name: str, device: str | None = None):
    """"bicubic" selects the stand-in; anything else is treated as a
    pretrained model identifier."""
    if name == "bicubic":
        return BicubicUpscaler()
    return LdmUpscaler(model_id=name, device=device)
