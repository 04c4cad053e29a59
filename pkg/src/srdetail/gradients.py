"""Gradient fields, percentile outlier filtering and cosine matching."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .frame_io import Frame


class FilterDirection(str, Enum):
    DROP_ABOVE = "drop-above"
    DROP_BELOW = "drop-below"


@dataclass(frozen=True)
class GradientConfig:
    """Settings for gradient filtering and matching.

    ``filter_direction="drop-above"`` discards gradients stronger than the
    ``percentile_q`` percentile; ``"drop-below"`` discards the weaker ones
    and keeps only the salient tail.
    """

    percentile_q: float = 0.85
    filter_direction: FilterDirection = FilterDirection.DROP_ABOVE
    drop_zero_magnitude: bool = True
    cosine_threshold: float = 0.85

    def __post_init__(self):
        object.__setattr__(self, "filter_direction", FilterDirection(self.filter_direction))
        if not 0.0 < self.percentile_q <= 1.0:
            raise ValueError(f"percentile_q must be in (0, 1], got {self.percentile_q}")
        if not -1.0 < self.cosine_threshold <= 1.0:
            raise ValueError(f"cosine_threshold must be in (-1, 1], got {self.cosine_threshold}")


@dataclass(frozen=True, eq=False)
class GradientField:
    """Per-pixel gradient vectors plus a validity mask, all ``(height, width)``."""

    gx: np.ndarray
    gy: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        if not (self.gx.shape == self.gy.shape == self.valid.shape) or self.gx.ndim != 2:
            raise ValueError("gx, gy and valid must be 2-D arrays of equal shape")
        for name in ("gx", "gy", "valid"):
            getattr(self, name).flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.gx.shape

    @property
    def height(self) -> int:
        return self.gx.shape[0]

    @property
    def width(self) -> int:
        return self.gx.shape[1]

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.gx, self.gy)

    @property
    def valid_count(self) -> int:
        return int(np.count_nonzero(self.valid))

    def with_valid(self, valid: np.ndarray) -> "GradientField":
        return replace(self, valid=np.array(valid, dtype=bool))


def compute_gradients(luma: Frame | np.ndarray) -> GradientField:
    """Central differences with kernels ``[-0.5, 0, 0.5]`` and its transpose.

    Borders use replicate padding, so an edge pixel takes half the difference
    between its inner neighbour and itself.
    """
    img = np.asarray(Frame.of(luma).data)
    if img.ndim != 2:
        raise ValueError("compute_gradients expects a single-channel frame")
    h, w = img.shape
    if h < 3 or w < 3:
        raise ValueError(f"frame too small for gradients: {w}x{h} (need at least 3x3)")
    padded = np.pad(img, 1, mode="edge")
    gx = 0.5 * (padded[1:-1, 2:] - padded[1:-1, :-2])
    gy = 0.5 * (padded[2:, 1:-1] - padded[:-2, 1:-1])
    return GradientField(gx, gy, np.ones((h, w), dtype=bool))


def nearest_rank(values: np.ndarray, q: float) -> float:
    """Nearest-rank ``q``-quantile: the ``ceil(q*n)``-th smallest value."""
    n = values.size
    if n == 0:
        raise ValueError("percentile of an empty set")
    # rounding guards against q*n landing a hair above an integer
    rank = max(1, math.ceil(round(q * n, 9)))
    return float(np.partition(values, rank - 1)[rank - 1])


def percentile_filter(field: GradientField, cfg: GradientConfig = GradientConfig()) -> GradientField:
    """Invalidate outlier gradients relative to this field's own distribution.

    Zero-magnitude pixels are dropped first (when enabled), then the
    nearest-rank percentile of the surviving magnitudes is the cut-off.
    ``gx``/``gy`` are never modified.
    """
    valid = field.valid.copy()
    if not valid.any():
        raise ValueError("percentile_filter: field has no valid pixels")
    mag = field.magnitude
    if cfg.drop_zero_magnitude:
        valid &= mag > 0
        if not valid.any():
            return field.with_valid(valid)
    cut = nearest_rank(mag[valid], cfg.percentile_q)
    if cfg.filter_direction is FilterDirection.DROP_ABOVE:
        valid &= mag <= cut
    else:
        valid &= mag >= cut
    return field.with_valid(valid)


def cosine_match(g_ref, g_in, tau: float = 0.85) -> bool:
    """True when both vectors are nonzero and their cosine strictly exceeds ``tau``."""
    ax, ay = float(g_ref[0]), float(g_ref[1])
    bx, by = float(g_in[0]), float(g_in[1])
    na = math.hypot(ax, ay)
    nb = math.hypot(bx, by)
    if na == 0.0 or nb == 0.0:
        return False
    # normalize before multiplying so tiny vectors cannot underflow
    return (ax / na) * (bx / nb) + (ay / na) * (by / nb) > tau
