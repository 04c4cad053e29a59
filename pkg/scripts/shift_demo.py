"""Compare ERQA and PSNR on globally shifted copies of one frame.

ERQA absorbs small displacements through its shift search; PSNR does not
unless the best global shift is found first.
"""

from skimage import data

from srdetail import erqa_score
from srdetail.degrade import bicubic_resize, translate
from srdetail.stats import global_shift_psnr, psnr


def main() -> None:
    gt = bicubic_resize(data.astronaut() / 255.0, 256, 256)
    print(f"{'shift':>8} {'ERQA':>8} {'PSNR':>8} {'shift-PSNR':>11} {'found':>8}")
    for d in [(0, 0), (1, 0), (2, -1), (3, 3), (0, 5), (6, 0)]:
        moved = translate(gt, *d)
        dx, dy, best = global_shift_psnr(gt, moved, 5)
        print(f"{str(d):>8} {erqa_score(gt, moved).value:8.4f} {psnr(gt, moved):8.2f} {best:11.2f} {str((dx, dy)):>8}")


if __name__ == "__main__":
    main()
