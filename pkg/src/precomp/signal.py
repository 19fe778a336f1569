"""Planar real-valued signal containers and block segmentation.

A signal is one or more equally sized frames of float64 samples, stored
frame-major and row-major within each frame. Buffers are immutable after
construction so they can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class SignalGeometry:
    """Dimensions of a signal: ``frames`` frames of ``height`` x ``width`` pixels."""

    width: int
    height: int
    frames: int = 1

    def __post_init__(self):
        if self.width < 1 or self.height < 1 or self.frames < 1:
            raise ValueError(
                f"invalid geometry {self.width}x{self.height}x{self.frames}"
            )

    @property
    def frame_shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def samples_per_frame(self) -> int:
        return self.width * self.height

    @property
    def total_samples(self) -> int:
        return self.frames * self.samples_per_frame


@dataclass(frozen=True)
class SignalBuffer:
    """Immutable real-valued signal.

    ``data`` has shape (frames, height, width). ``value_range_hint`` is the
    nominal dynamic range of the content; intermediate results of the
    pre-compensation loop routinely exceed it and are never clipped here.
    """

    geometry: SignalGeometry
    data: np.ndarray = field(repr=False)
    value_range_hint: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        shape = (self.geometry.frames, self.geometry.height, self.geometry.width)
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.size != self.geometry.total_samples:
            raise ValueError(
                f"sample count {arr.size} does not match geometry "
                f"({self.geometry.total_samples} expected)"
            )
        if arr.shape != shape or arr.flags.writeable or not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr).reshape(shape).copy()
            arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, array, value_range_hint=(0.0, 1.0)) -> "SignalBuffer":
        """Wrap a 2-D (single frame) or 3-D (frames, height, width) array."""
        arr = np.asarray(array, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got ndim={arr.ndim}")
        t, h, w = arr.shape
        return cls(SignalGeometry(width=w, height=h, frames=t), arr, value_range_hint)

    @classmethod
    def zeros(cls, geometry: SignalGeometry) -> "SignalBuffer":
        return cls(geometry, np.zeros((geometry.frames, geometry.height, geometry.width)))

    @property
    def samples(self) -> np.ndarray:
        """Flat view of the samples, frame-major then row-major."""
        return self.data.reshape(-1)

    def frame(self, k: int) -> np.ndarray:
        """Read-only (height, width) view of frame ``k``."""
        return self.data[k]

    def with_data(self, array) -> "SignalBuffer":
        """New buffer with the same geometry and range hint but different samples."""
        return replace(self, data=np.asarray(array, dtype=np.float64))


@dataclass(frozen=True)
class BlockGrid:
    """Non-overlapping tiling of one frame into ``block_size`` square blocks.

    Edge blocks shrink instead of padding, so every geometry tiles exactly and
    each pixel belongs to exactly one block. Blocks are indexed in raster order.
    """

    frame_width: int
    frame_height: int
    block_size: int

    def __post_init__(self):
        if self.frame_width < 1 or self.frame_height < 1 or self.block_size < 1:
            raise ValueError("grid dimensions and block size must be positive")

    @property
    def blocks_across(self) -> int:
        return -(-self.frame_width // self.block_size)

    @property
    def blocks_down(self) -> int:
        return -(-self.frame_height // self.block_size)

    def __len__(self) -> int:
        return self.blocks_across * self.blocks_down

    def block_slices(self, i: int) -> tuple[slice, slice]:
        """Row/column slices of block ``i`` within the frame."""
        if not 0 <= i < len(self):
            raise IndexError(f"block index {i} out of range [0, {len(self)})")
        by, bx = divmod(i, self.blocks_across)
        y0 = by * self.block_size
        x0 = bx * self.block_size
        return (
            slice(y0, min(y0 + self.block_size, self.frame_height)),
            slice(x0, min(x0 + self.block_size, self.frame_width)),
        )


def _check_grid(signal: SignalBuffer, grid: BlockGrid):
    if (grid.frame_width, grid.frame_height) != (
        signal.geometry.width,
        signal.geometry.height,
    ):
        raise ValueError(
            f"grid {grid.frame_width}x{grid.frame_height} does not match frame "
            f"{signal.geometry.width}x{signal.geometry.height}"
        )


def extract_block(signal: SignalBuffer, grid: BlockGrid, i: int, frame: int = 0) -> np.ndarray:
    """Copy of block ``i`` of the given frame as a 2-D array."""
    _check_grid(signal, grid)
    ys, xs = grid.block_slices(i)
    return signal.frame(frame)[ys, xs].copy()


def place_block(
    signal: SignalBuffer, grid: BlockGrid, i: int, block: np.ndarray, frame: int = 0
) -> SignalBuffer:
    """New signal with block ``i`` of the given frame replaced by ``block``."""
    _check_grid(signal, grid)
    ys, xs = grid.block_slices(i)
    block = np.asarray(block, dtype=np.float64)
    expected = (ys.stop - ys.start, xs.stop - xs.start)
    if block.shape != expected:
        raise ValueError(f"block shape {block.shape} does not fit slot {expected}")
    data = signal.data.copy()
    data[frame, ys, xs] = block
    return signal.with_data(data)
