"""Time single-frame 1080p ERQA and the sequence speedup from worker processes.

Usage: python3 scripts/bench_erqa.py [--frames 100] [--jobs 8]
"""

import argparse
import os
import time

from skimage import data

from srdetail import erqa_score
from srdetail.degrade import bicubic_resize, gaussian_blur, translate
from srdetail.erqa import erqa_sequence


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=100)
    ap.add_argument("--jobs", type=int, default=8)
    ap.add_argument("--width", type=int, default=480)
    ap.add_argument("--height", type=int, default=270)
    args = ap.parse_args()

    hd = bicubic_resize(data.astronaut() / 255.0, 1920, 1080)
    t0 = time.perf_counter()
    erqa_score(hd, gaussian_blur(hd, 1.0))
    print(f"1080p RGB pair: {time.perf_counter() - t0:.2f}s")

    base = bicubic_resize(data.camera() / 255.0, args.width, args.height).data
    gt = [translate(base, i % 3, 0).data for i in range(args.frames)]
    dist = [gaussian_blur(g, 1.0).data for g in gt]
    timings = {}
    for jobs in (1, args.jobs):
        t0 = time.perf_counter()
        erqa_sequence(gt, dist, jobs=jobs)
        timings[jobs] = time.perf_counter() - t0
        print(f"{args.frames} frames, {jobs} worker(s): {timings[jobs]:.2f}s")
    print(f"speedup {timings[1] / timings[args.jobs]:.2f}x on {os.cpu_count()} logical CPU(s)")


if __name__ == "__main__":
    main()
