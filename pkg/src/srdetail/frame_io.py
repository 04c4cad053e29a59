"""Frame loading, saving and color conversion.

A :class:`Frame` is an immutable ``float64`` raster with intensities in
``[0, 1]``, shaped ``(height, width)`` for grayscale or
``(height, width, 3)`` for RGB.  PNG files are read through OpenCV so that
8- and 16-bit depths are both supported; everything written is 8-bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import cv2
import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class FrameError(ValueError):
    """Raised for unreadable, malformed or mismatched frames."""


@dataclass(frozen=True, eq=False)
class Frame:
    """Normalized image raster.

    The wrapped array is copied to ``float64`` and made read-only, so a
    frame can be shared freely between threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0].copy()
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise FrameError(f"unsupported frame shape {arr.shape}")
        if arr.shape[0] == 0 or arr.shape[1] == 0:
            raise FrameError("zero-sized frame")
        if not np.all(np.isfinite(arr)):
            raise FrameError("frame contains non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise FrameError("intensities must lie in [0, 1]")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def of(cls, obj: "Frame | np.ndarray") -> "Frame":
        return obj if isinstance(obj, Frame) else cls(obj)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else self.data.shape[2]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))


@dataclass(frozen=True)
class FrameSequence:
    """Ordered, dimension-consistent list of frames."""

    frames: tuple[Frame, ...]
    name: str = ""
    filenames: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        frames = tuple(Frame.of(f) for f in self.frames)
        if not frames:
            raise FrameError("a frame sequence must not be empty")
        shape = frames[0].shape
        for i, f in enumerate(frames):
            if f.shape != shape:
                raise FrameError(
                    f"frame {i} has shape {f.shape}, expected {shape} (dimension mismatch)"
                )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "filenames", tuple(self.filenames))

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self) -> Iterator[Frame]:
        return iter(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.frames[0].shape


def load_frame(path: str | os.PathLike) -> Frame:
    """Read an image file into a normalized :class:`Frame`.

    Intensities are divided by the format's maximum code value (255 or
    65535).  Alpha is dropped; grayscale stays single-channel.
    """
    path = Path(path)
    if not path.is_file():
        raise FrameError(f"cannot read {path}: no such file")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FrameError(f"cannot read {path}: unsupported or corrupt image")
    if raw.size == 0:
        raise FrameError(f"{path} is zero-sized")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise FrameError(f"{path}: unsupported bit depth ({raw.dtype})")

    if raw.ndim == 3:
        if raw.shape[2] == 1:
            raw = raw[:, :, 0]
        elif raw.shape[2] == 4:
            raw = cv2.cvtColor(raw, cv2.COLOR_BGRA2RGB)
        elif raw.shape[2] == 3:
            raw = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB)
        else:
            raise FrameError(f"{path}: unsupported channel count {raw.shape[2]}")
    return Frame(raw.astype(np.float64) / scale)


def quantize(frame: Frame | np.ndarray) -> np.ndarray:
    """8-bit codes for a frame, rounding half up."""
    data = np.asarray(Frame.of(frame).data)
    return np.floor(data * 255.0 + 0.5).astype(np.uint8)


def save_frame(frame: Frame | np.ndarray, path: str | os.PathLike) -> None:
    """Write ``frame`` as an 8-bit PNG."""
    path = Path(path)
    if not path.parent.is_dir():
        raise FrameError(f"cannot write {path}: parent directory does not exist")
    codes = quantize(frame)
    if codes.ndim == 3:
        codes = cv2.cvtColor(codes, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), codes):
        raise OSError(f"failed to write {path}")


def to_luma(frame: Frame | np.ndarray, weights: Sequence[float] = LUMA_WEIGHTS) -> Frame:
    frame = Frame.of(frame)
    if frame.channels == 1:
        return frame
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (3,) or np.any(w < 0):
        raise ValueError("luma weights must be three non-negative numbers")
    luma = frame.data @ (w / w.sum())
    return Frame(np.clip(luma, 0.0, 1.0))


def list_frame_files(directory: str | os.PathLike) -> list[Path]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameError(f"{directory} is not a directory")
    files = sorted(
        (p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )
    if not files:
        raise FrameError(f"{directory} contains no supported images")
    return files


def load_sequence(directory: str | os.PathLike) -> FrameSequence:
    """Load every image in ``directory``, ordered by filename."""
    files = list_frame_files(directory)
    frames = [load_frame(p) for p in files]
    return FrameSequence(
        tuple(frames), name=Path(directory).name, filenames=tuple(p.name for p in files)
    )
