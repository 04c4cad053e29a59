"""Score a blur and noise degradation chain with ERQA, PSNR and SSIM.

Usage: python3 scripts/degradation_chain.py [--size 256]
"""

import argparse

from skimage import data

from srdetail import erqa_score
from srdetail.degrade import NoiseParams, add_noise, bicubic_resize, gaussian_blur
from srdetail.stats import psnr, ssim


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    args = ap.parse_args()

    gt = bicubic_resize(data.camera() / 255.0, args.size, args.size)
    chain = {"identity": gt}
    for sigma in (0.5, 1.0, 2.0, 3.0):
        chain[f"blur {sigma}"] = gaussian_blur(gt, sigma)
    chain["noise"] = add_noise(gt, NoiseParams(seed=0))
    chain["down-up x4"] = bicubic_resize(bicubic_resize(gt, args.size // 4, args.size // 4), args.size, args.size)

    print(f"{'distortion':<12} {'ERQA':>8} {'PSNR':>8} {'SSIM':>8}")
    for name, dist in chain.items():
        print(f"{name:<12} {erqa_score(gt, dist).value:8.4f} {psnr(gt, dist):8.2f} {ssim(gt, dist):8.4f}")


if __name__ == "__main__":
    main()
