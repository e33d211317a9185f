"""Timing comparison of the accelerated kernels against the plain numpy path.

Run twice, once per path:

    python3 benchmarks/bench_kernels.py
    SRCODEC_DISABLE_NUMBA=1 python3 benchmarks/bench_kernels.py

or pass --both to fork the second configuration automatically.
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def _time(fn, repeats):
    fn()  # warmup; also triggers jit compilation on the accelerated path
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return min(samples), statistics.median(samples)


def run(sizes, repeats):
    from srcodec import _accel
    from srcodec.image import Image16
    from srcodec.pngio import decode_png16, encode_png16
    from srcodec.resample import ResizeSpec, resize_bicubic

    label = "numba" if _accel.USING_NUMBA else "numpy"
    print(f"kernel path: {label}")
    print(f"{'benchmark':<28} {'best':>10} {'median':>10}")
    rng = np.random.default_rng(0)
    for size in sizes:
        img = Image16(rng.integers(0, 65536, size=(size, size), dtype=np.uint16))
        half = ResizeSpec(size // 2, size // 2)
        twice = ResizeSpec(size * 2, size * 2)
        png = encode_png16(img)
        for name, fn in [
            (f"downscale {size}->{size // 2}", lambda: resize_bicubic(img, half)),
            (f"upscale {size}->{size * 2}", lambda: resize_bicubic(img, twice)),
            (f"png decode {size}", lambda: decode_png16(png)),
        ]:
            best, median = _time(fn, repeats)
            print(f"{name:<28} {best * 1e3:>8.2f}ms {median * 1e3:>8.2f}ms")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[512, 1024])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--both", action="store_true",
                    help="also run the numpy fallback in a subprocess")
    args = ap.parse_args()

    run(args.sizes, args.repeats)
    if args.both and "SRCODEC_DISABLE_NUMBA" not in os.environ:
        print(flush=True)
        env = dict(os.environ, SRCODEC_DISABLE_NUMBA="1")
        cmd = [sys.executable, __file__, "--sizes", *map(str, args.sizes),
               "--repeats", str(args.repeats)]
        subprocess.run(cmd, env=env, check=True)


if __name__ == "__main__":
    main()
