"""Edge restoration quality via sequential multi-shift gradient matching.

Both frames are reduced to filtered gradient fields.  Every integer shift
inside a disk of ``shift_radius`` pixels is scored by how many gradient
pairs it aligns; the best ``refine_iterations`` shifts are then applied in
turn, each one claiming the still-unmatched pixel pairs it aligns.  Claimed
ground-truth pixels form the true-positive mask, leftovers become false
negatives (ground truth) and false positives (input), and the score is an
F-beta over the three counts.

Shift convention: a shift ``(dx, dy)`` pairs ground-truth pixel ``(x, y)``
with input pixel ``(x + dx, y + dy)``, i.e. it is the displacement of the
input content relative to the ground truth.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .frame_io import Frame, FrameSequence, to_luma
from .gradients import GradientConfig, GradientField, compute_gradients, percentile_filter

SHIFT_SHAPES = ("disk", "square")


@dataclass(frozen=True)
class ErqaConfig:
    shift_radius: int = 5
    refine_iterations: int = 35
    beta: float = 0.5
    gradient: GradientConfig = field(default_factory=GradientConfig)
    shift_shape: str = "disk"
    # re-score the remaining shifts after every refinement step (ablation only)
    rerank: bool = False

    def __post_init__(self):
        if self.shift_radius < 0:
            raise ValueError("shift_radius must be >= 0")
        if self.refine_iterations < 1:
            raise ValueError("refine_iterations must be >= 1")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.shift_shape not in SHIFT_SHAPES:
            raise ValueError(f"shift_shape must be one of {SHIFT_SHAPES}")
        n = len(enumerate_shifts(self.shift_radius, self.shift_shape))
        if self.refine_iterations > n:
            raise ValueError(
                f"refine_iterations={self.refine_iterations} exceeds the {n} available shifts"
            )


class ShiftCandidate(NamedTuple):
    dx: int
    dy: int
    similarity: int


@dataclass(frozen=True, eq=False)
class MatchMasks:
    """Boolean masks from sequential matching.

    ``tp`` and ``fn`` live in ground-truth coordinates, ``fp`` in input
    coordinates.
    """

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    @property
    def tp_count(self) -> int:
        return int(np.count_nonzero(self.tp))

    @property
    def fp_count(self) -> int:
        return int(np.count_nonzero(self.fp))

    @property
    def fn_count(self) -> int:
        return int(np.count_nonzero(self.fn))

    def counts(self) -> dict[str, int]:
        return {"tp": self.tp_count, "fp": self.fp_count, "fn": self.fn_count}


@dataclass(frozen=True, eq=False)
class ErqaScore:
    value: float
    masks: MatchMasks
    per_shift_trace: list[tuple[ShiftCandidate, int]]


@dataclass(frozen=True)
class SequenceScore:
    per_frame: list[float]
    mean: float


def _shift_key(s: tuple[int, int]) -> tuple[int, int, int]:
    dx, dy = s
    return (dx * dx + dy * dy, dy, dx)


def enumerate_shifts(radius: int, shape: str = "disk") -> list[tuple[int, int]]:
    """Integer shifts within ``radius``, nearest first (then by dy, then dx).

    ``shape="disk"`` keeps ``dx**2 + dy**2 <= radius**2``; ``"square"`` keeps
    the full Chebyshev square.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    r = int(radius)
    out = [
        (dx, dy)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if shape == "square" or dx * dx + dy * dy <= r * r
    ]
    return sorted(out, key=_shift_key)


def _windows(shape: tuple[int, int], dx: int, dy: int):
    """Slices of the overlapping region: (ground truth slice, input slice)."""
    h, w = shape
    y0, y1 = max(0, -dy), min(h, h - dy)
    x0, x1 = max(0, -dx), min(w, w - dx)
    if y0 >= y1 or x0 >= x1:
        return None
    return (
        (slice(y0, y1), slice(x0, x1)),
        (slice(y0 + dy, y1 + dy), slice(x0 + dx, x1 + dx)),
    )


class _Field:
    """Unit gradient directions plus a mutable validity mask."""

    def __init__(self, f: GradientField):
        gx = np.asarray(f.gx, dtype=np.float64)
        gy = np.asarray(f.gy, dtype=np.float64)
        norm = np.hypot(gx, gy)
        self.nonzero = norm > 0
        safe = np.where(self.nonzero, norm, 1.0)
        self.ux = np.ascontiguousarray(gx / safe)
        self.uy = np.ascontiguousarray(gy / safe)
        self.valid = np.array(f.valid, dtype=bool)


def _pair_mask(a: _Field, b: _Field, dx: int, dy: int, tau: float):
    """Matching pairs for one shift, restricted to currently valid pixels."""
    win = _windows(a.valid.shape, dx, dy)
    if win is None:
        return None, None, None
    s, t = win
    m = a.valid[s] & b.valid[t]
    m &= a.nonzero[s]
    m &= b.nonzero[t]
    if not m.any():
        return s, t, m
    cos = a.ux[s] * b.ux[t]
    cos += a.uy[s] * b.uy[t]
    m &= cos > tau
    return s, t, m


def _check_pair(gt: GradientField, inp: GradientField):
    if gt.shape != inp.shape:
        raise ValueError(f"dimension mismatch: {gt.shape} vs {inp.shape}")


def shift_similarity(gt: GradientField, inp: GradientField, shift, tau: float = 0.85) -> int:
    """Number of valid, cosine-matching gradient pairs aligned by ``shift``."""
    _check_pair(gt, inp)
    _, _, m = _pair_mask(_Field(gt), _Field(inp), int(shift[0]), int(shift[1]), tau)
    return 0 if m is None else int(np.count_nonzero(m))


def _rank(a: _Field, b: _Field, shifts, tau: float) -> list[ShiftCandidate]:
    cands = []
    for dx, dy in shifts:
        _, _, m = _pair_mask(a, b, dx, dy, tau)
        cands.append(ShiftCandidate(dx, dy, 0 if m is None else int(np.count_nonzero(m))))
    return sorted(cands, key=lambda c: (-c.similarity, *_shift_key((c.dx, c.dy))))


def rank_shifts(gt: GradientField, inp: GradientField, cfg: ErqaConfig = ErqaConfig()) -> list[ShiftCandidate]:
    """All candidate shifts, most similar first; ties go to the smaller shift."""
    _check_pair(gt, inp)
    shifts = enumerate_shifts(cfg.shift_radius, cfg.shift_shape)
    return _rank(_Field(gt), _Field(inp), shifts, cfg.gradient.cosine_threshold)


def _refine(gt: GradientField, inp: GradientField, cfg: ErqaConfig):
    _check_pair(gt, inp)
    tau = cfg.gradient.cosine_threshold
    a, b = _Field(gt), _Field(inp)
    shifts = enumerate_shifts(cfg.shift_radius, cfg.shift_shape)
    ranked = _rank(a, b, shifts, tau)
    tp = np.zeros(a.valid.shape, dtype=bool)
    trace: list[tuple[ShiftCandidate, int]] = []

    for step in range(cfg.refine_iterations):
        if cfg.rerank and step > 0:
            used = {(c.dx, c.dy) for c, _ in trace}
            ranked = _rank(a, b, [s for s in shifts if s not in used], tau)
            cand = ranked[0]
        elif cfg.rerank:
            cand = ranked[0]
        else:
            cand = ranked[step]
        s, t, m = _pair_mask(a, b, cand.dx, cand.dy, tau)
        added = 0
        if m is not None:
            added = int(np.count_nonzero(m))
            # a shift is a 1:1 pixel correspondence, so claiming all pairs at once
            # equals a row-major scan
            tp[s] |= m
            a.valid[s] &= ~m
            b.valid[t] &= ~m
        trace.append((cand, added))

    masks = MatchMasks(tp=tp, fp=b.valid.copy(), fn=a.valid.copy())
    return masks, trace


def sequential_match(gt: GradientField, inp: GradientField, cfg: ErqaConfig = ErqaConfig()) -> MatchMasks:
    return _refine(gt, inp, cfg)[0]


def f_beta(tp: int, fp: int, fn: int, beta: float = 0.5) -> float:
    """F-beta score from match counts.

    No gradients on either side scores 1.0; no true positives with any
    false positive or negative scores 0.0.
    """
    if tp < 0 or fp < 0 or fn < 0:
        raise ValueError("counts must be non-negative")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    b2 = beta * beta
    return (1 + b2) * precision * recall / (b2 * precision + recall)


def filtered_field(frame: Frame | np.ndarray, cfg: GradientConfig = GradientConfig()) -> GradientField:
    return percentile_filter(compute_gradients(to_luma(frame)), cfg)


def erqa_score(gt: Frame | np.ndarray, dist: Frame | np.ndarray, cfg: ErqaConfig = ErqaConfig()) -> ErqaScore:
    """Score ``dist`` against ground truth ``gt``; 1.0 means every detail restored."""
    gt, dist = Frame.of(gt), Frame.of(dist)
    if gt.shape[:2] != dist.shape[:2]:
        raise ValueError(f"dimension mismatch: {gt.shape} vs {dist.shape}")
    g = filtered_field(gt, cfg.gradient)
    d = filtered_field(dist, cfg.gradient)
    masks, trace = _refine(g, d, cfg)
    value = f_beta(masks.tp_count, masks.fp_count, masks.fn_count, cfg.beta)
    return ErqaScore(value=value, masks=masks, per_shift_trace=trace)


def _score_value(args) -> float:
    gt, dist, cfg = args
    return erqa_score(gt, dist, cfg).value


def default_jobs() -> int:
    return os.cpu_count() or 1


def erqa_sequence(
    gt: FrameSequence | Sequence[Frame],
    dist: FrameSequence | Sequence[Frame],
    cfg: ErqaConfig = ErqaConfig(),
    jobs: int = 1,
) -> SequenceScore:
    """Per-frame scores and their unweighted mean.

    With ``jobs > 1`` frames are scored in a process pool; results keep input
    order.
    """
    gt_frames, dist_frames = list(gt), list(dist)
    if len(gt_frames) != len(dist_frames):
        raise ValueError(f"length mismatch: {len(gt_frames)} vs {len(dist_frames)} frames")
    if not gt_frames:
        raise ValueError("empty sequences")
    for i, (g, d) in enumerate(zip(gt_frames, dist_frames)):
        if Frame.of(g).shape[:2] != Frame.of(d).shape[:2]:
            raise ValueError(f"frame {i}: dimension mismatch")
    tasks = [(g, d, cfg) for g, d in zip(gt_frames, dist_frames)]
    values = map_ordered(_score_value, tasks, jobs)
    return SequenceScore(per_frame=values, mean=math.fsum(values) / len(values))


def map_ordered(fn, tasks: list, jobs: int) -> list:
    """``[fn(t) for t in tasks]``, optionally spread over worker processes."""
    jobs = max(1, min(int(jobs), len(tasks)))
    if jobs == 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


GREEN = (0.0, 1.0, 0.0)
RED = (1.0, 0.0, 0.0)
BLUE = (0.0, 0.0, 1.0)


def render_heatmap(masks: MatchMasks, background: Frame | np.ndarray, overlay: str = "gt", dim: float = 0.5) -> Frame:
    """Color match masks over a dimmed grayscale background.

    ``overlay="gt"`` draws true positives green and false negatives (missing
    detail) red over the ground-truth frame; ``overlay="dist"`` draws false
    positives (hallucinated detail) blue over the distorted frame.
    """
    bg = to_luma(background).data
    if bg.shape != masks.tp.shape:
        raise ValueError(f"dimension mismatch: background {bg.shape} vs masks {masks.tp.shape}")
    out = np.repeat((bg * dim)[:, :, None], 3, axis=2)
    if overlay == "gt":
        out[masks.tp] = GREEN
        out[masks.fn] = RED
    elif overlay == "dist":
        out[masks.fp] = BLUE
    else:
        raise ValueError("overlay must be 'gt' or 'dist'")
    return Frame(out)
