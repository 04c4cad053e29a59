"""Degradations used to build evaluation inputs.

Bicubic resampling (Keys kernel, a = -0.5, pixel-center alignment),
blur-downsampling, signal-dependent Gaussian sensor noise, and integer
translation for shift fixtures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, sparse

from .frame_io import Frame

HR_SIZE = (1920, 1080)
LR_SIZE = (480, 270)


@dataclass(frozen=True)
class NoiseParams:
    """Noise variance at clean intensity ``L`` is ``sigma_s * L + sigma_c**2``.

    Samples come from numpy's PCG64 generator seeded with ``seed``, drawn in
    row-major (then channel) order, one standard normal per intensity.
    """

    sigma_s: float = 0.001
    sigma_c: float = 0.035
    seed: int = 0

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_c < 0:
            raise ValueError("noise parameters must be non-negative")

    def std(self, level):
        return np.sqrt(self.sigma_s * np.asarray(level) + self.sigma_c**2)


@dataclass(frozen=True)
class DegradeConfig:
    """Blur-downsampling settings.

    Output size along an axis is ``ceil((dim - bd_offset) / scale)``: every
    sample position ``bd_offset + k * scale`` inside the frame is kept.  For
    dimensions divisible by ``scale`` with zero offset this equals
    ``dim // scale``.
    """

    scale: int = 4
    bd_sigma: float = 1.6
    bd_offset: int = 0

    def __post_init__(self):
        if int(self.scale) != self.scale or self.scale < 2:
            raise ValueError("scale must be an integer >= 2")
        if self.bd_sigma <= 0:
            raise ValueError("bd_sigma must be > 0")
        if not 0 <= self.bd_offset < self.scale:
            raise ValueError("bd_offset must be in [0, scale)")


def cubic_kernel(x, a: float = -0.5):
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def resize_weights(n_in: int, n_out: int, a: float = -0.5, antialias: bool = False) -> sparse.csr_matrix:
    """Sparse ``(n_out, n_in)`` interpolation matrix for one axis.

    Taps falling outside the source are folded onto the nearest edge sample
    (replicate boundary).  With ``antialias`` the kernel is stretched by the
    downscale factor, as MATLAB's ``imresize`` does; off by default.
    """
    scale = n_in / n_out
    stretch = scale if (antialias and scale > 1) else 1.0
    support = 2.0 * stretch
    centers = (np.arange(n_out) + 0.5) * scale - 0.5
    left = np.floor(centers - support).astype(np.int64) + 1
    taps = int(math.ceil(2 * support)) + 1
    idx = left[:, None] + np.arange(taps)[None, :]
    w = cubic_kernel((centers[:, None] - idx) / stretch, a)
    w /= w.sum(axis=1, keepdims=True)
    rows = np.repeat(np.arange(n_out), taps)
    cols = np.clip(idx, 0, n_in - 1).ravel()
    # duplicate (row, col) entries are summed by the constructor
    return sparse.csr_matrix((w.ravel(), (rows, cols)), shape=(n_out, n_in))


def _per_channel(data: np.ndarray, fn) -> np.ndarray:
    if data.ndim == 2:
        return fn(data)
    return np.stack([fn(data[:, :, c]) for c in range(data.shape[2])], axis=2)


def bicubic_resize(frame: Frame | np.ndarray, out_w: int, out_h: int, a: float = -0.5, antialias: bool = False) -> Frame:
    frame = Frame.of(frame)
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    if (out_w, out_h) == (frame.width, frame.height) and not antialias:
        return frame
    wy = resize_weights(frame.height, out_h, a, antialias)
    wx = resize_weights(frame.width, out_w, a, antialias)
    out = _per_channel(frame.data, lambda ch: np.asarray(wy @ (wx @ ch.T).T))
    return Frame(np.clip(out, 0.0, 1.0))


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Gaussian taps truncated at ``ceil(4 * sigma)`` and renormalized."""
    radius = max(1, int(math.ceil(4 * sigma)))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(frame: Frame | np.ndarray, sigma: float) -> Frame:
    """Separable Gaussian blur with replicate boundary."""
    frame = Frame.of(frame)
    k = gaussian_kernel1d(sigma)

    def blur(ch):
        tmp = ndimage.correlate1d(ch, k, axis=0, mode="nearest")
        return ndimage.correlate1d(tmp, k, axis=1, mode="nearest")

    return Frame(np.clip(_per_channel(frame.data, blur), 0.0, 1.0))


def bd_downsample(frame: Frame | np.ndarray, cfg: DegradeConfig = DegradeConfig()) -> Frame:
    frame = Frame.of(frame)
    if frame.width < cfg.scale or frame.height < cfg.scale:
        raise ValueError(f"frame {frame.width}x{frame.height} is smaller than scale {cfg.scale}")
    blurred = gaussian_blur(frame, cfg.bd_sigma).data
    o, s = cfg.bd_offset, cfg.scale
    return Frame(blurred[o::s, o::s])


def add_noise(frame: Frame | np.ndarray, params: NoiseParams = NoiseParams()) -> Frame:
    frame = Frame.of(frame)
    clean = frame.data
    rng = np.random.Generator(np.random.PCG64(params.seed))
    z = rng.standard_normal(clean.shape)
    noisy = clean + z * params.std(clean)
    return Frame(np.clip(noisy, 0.0, 1.0))


def prepare_pair(source: Frame | np.ndarray) -> tuple[Frame, Frame]:
    """Bicubic 1920x1080 ground truth and its 4x-smaller 480x270 input."""
    source = Frame.of(source)
    if source.width < HR_SIZE[0] or source.height < HR_SIZE[1]:
        raise ValueError(
            f"source {source.width}x{source.height} is smaller than {HR_SIZE[0]}x{HR_SIZE[1]}"
        )
    hr = bicubic_resize(source, *HR_SIZE)
    lr = bicubic_resize(hr, *LR_SIZE)
    return hr, lr


def translate(frame: Frame | np.ndarray, dx: int, dy: int) -> Frame:
    """Move content by ``(dx, dy)``: ``out[y, x] = in[y - dy, x - dx]``.

    Vacated pixels replicate the nearest edge.
    """
    data = Frame.of(frame).data
    h, w = data.shape[:2]
    ys = np.clip(np.arange(h) - dy, 0, h - 1)
    xs = np.clip(np.arange(w) - dx, 0, w - 1)
    return Frame(data[ys][:, xs])
