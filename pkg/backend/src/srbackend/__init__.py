"""Worker process that doubles image resolution on request.

The package speaks a one-line-JSON protocol on stdio: a handshake
announcing the supported scale, then one upscale request per line, one
reply per request. Images travel as 16-bit grayscale PNG files on disk;
only paths cross the pipe. Two models are available: a dependency-free
bicubic interpolator for hosts without a GPU, and a pretrained 2x latent
diffusion upscaler loaded on demand.
"""

from .channels import from_unit, gray_to_rgb, read_gray16, rgb_to_gray, to_unit, write_gray16
from .models import DEFAULT_MODEL_ID, BicubicUpscaler, LdmUpscaler, create_model
from .serve import PROTOCOL, serve, upscale_x2

__version__ = "0.1.0"

__all__ = [
    "BicubicUpscaler",
    "DEFAULT_MODEL_ID",
    "LdmUpscaler",
    "PROTOCOL",
    "create_model",
    "from_unit",
    "gray_to_rgb",
    "read_gray16",
    "rgb_to_gray",
    "serve",
    "to_unit",
    "upscale_x2",
    "write_gray16",
    "__version__",
]
