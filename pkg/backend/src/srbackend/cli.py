"""Process entry point: parse flags, load the model, hand stdio to serve()."""

import argparse
import sys

from . import __version__
from .models import DEFAULT_MODEL_ID, create_model
from .serve import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sr-backend",
        description="2x super-resolution worker speaking line-delimited JSON on stdio",
    )
    parser.add_argument("--model", default=DEFAULT_MODEL_ID,
                        help='model identifier, or "bicubic" for the interpolation '
                             "stand-in (default %(default)s)")
    parser.add_argument("--device", default=None,
                        help="compute device for pretrained models (default: auto)")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model = create_model(args.model, device=args.device)
    except Exception as exc:
        # fail before the handshake so the host sees a clean startup error
        print(f"sr-backend: cannot load model {args.model!r}: "
              f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return serve(model)


if __name__ == "__main__":
    sys.exit(main())
