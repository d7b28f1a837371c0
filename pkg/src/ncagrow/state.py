"""Cell-grid state: seed construction, alive masking, damage and env signals.

A grid is an H x W x C float tensor. Channel layout:

    c0..c2   RGB
    c3       alpha (cell maturity, drives the alive mask)
    c4..     genome bits (seed only), then free hidden channels up to c15
    c16      read-only environment channel (only when env_enabled)

The update network writes the first 16 channels only; the environment
channel is written exclusively by :func:`inject_signal` / :func:`clear_env`.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

STATE_CHANNELS = 16  # channels the update rule reads and writes
ENV_CHANNEL = 16     # index of the read-only environment channel
DUMP_MAGIC = b"NCAG"


@dataclass(frozen=True)
class GridConfig:
    height: int
    width: int
    env_enabled: bool = False
    genome_len: int = 0
    alive_threshold: float = 0.1

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.height}x{self.width}")
        if self.genome_len < 0 or 4 + self.genome_len > STATE_CHANNELS:
            raise ValueError(
                f"genome_len={self.genome_len}: genome must fit in hidden channels c4..c15"
            )
        if not 0.0 < self.alive_threshold < 1.0:
            raise ValueError(f"alive_threshold must lie in (0, 1), got {self.alive_threshold}")

    @property
    def channels(self) -> int:
        return STATE_CHANNELS + (1 if self.env_enabled else 0)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)


@dataclass
class CellGrid:
    """A living organism: config plus its H x W x channels state tensor."""

    config: GridConfig
    data: np.ndarray

    def __post_init__(self):
        if self.data.shape != self.config.shape:
            raise ValueError(f"state shape {self.data.shape} does not match config {self.config.shape}")

    @property
    def rgba(self) -> np.ndarray:
        return self.data[..., :4]

    @property
    def alpha(self) -> np.ndarray:
        return self.data[..., 3]

    @property
    def env(self) -> np.ndarray:
        if not self.config.env_enabled:
            raise ValueError("grid has no environment channel")
        return self.data[..., ENV_CHANNEL]

    def copy(self) -> "CellGrid":
        return CellGrid(self.config, self.data.copy())


def as_genome(bits: Sequence[float], config: GridConfig) -> np.ndarray:
    """Validate and coerce genome bits to a float vector of config.genome_len."""
    genome = np.asarray(bits, dtype=np.float64).reshape(-1)
    if genome.shape[0] != config.genome_len:
        raise ValueError(
            f"genome length {genome.shape[0]} does not match config.genome_len={config.genome_len}"
        )
    return genome


def make_seed(
    config: GridConfig,
    genome: Sequence[float] = (),
    position: tuple[int, int] | None = None,
    dtype=np.float32,
) -> CellGrid:
    """All-zero grid with one seed cell: alpha 1, genome bits, hidden channels 1.

    The environment channel (when present) starts at 0 and stays 0 until a
    signal is injected.
    """
    bits = as_genome(genome, config)
    if position is None:
        position = (config.height // 2, config.width // 2)
    r, c = position
    if not (0 <= r < config.height and 0 <= c < config.width):
        raise ValueError(f"seed position {position} outside {config.height}x{config.width} grid")
    data = np.zeros(config.shape, dtype=dtype)
    cell = np.zeros(config.channels, dtype=dtype)
    cell[3] = 1.0
    cell[4:4 + config.genome_len] = bits
    cell[4 + config.genome_len:STATE_CHANNELS] = 1.0
    data[r, c] = cell
    return CellGrid(config, data)


def max_pool_3x3(field: np.ndarray) -> np.ndarray:
    """3x3 max over the last two axes with zero padding at the borders."""
    h, w = field.shape[-2:]
    pad = [(0, 0)] * (field.ndim - 2) + [(1, 1), (1, 1)]
    padded = np.pad(field, pad)
    out = field.copy()
    for u in range(3):
        for v in range(3):
            if u == 1 and v == 1:
                continue
            np.maximum(out, padded[..., u:u + h, v:v + w], out=out)
    return out


def alive_from_alpha(alpha: np.ndarray, threshold: float) -> np.ndarray:
    """Alive test on a (..., H, W) alpha field: 3x3 neighborhood max > threshold."""
    return max_pool_3x3(alpha) > threshold


def alive_mask(grid: CellGrid) -> np.ndarray:
    """Boolean H x W mask of cells whose 3x3 max alpha exceeds the threshold."""
    return alive_from_alpha(grid.data[..., 3], grid.config.alive_threshold)


@dataclass(frozen=True)
class CircleDamage:
    center: tuple[int, int]  # (row, col)
    radius: float

    def mask(self, height: int, width: int) -> np.ndarray:
        rows = np.arange(height)[:, None]
        cols = np.arange(width)[None, :]
        return (rows - self.center[0]) ** 2 + (cols - self.center[1]) ** 2 <= self.radius ** 2


@dataclass(frozen=True)
class RectDamage:
    corner: tuple[int, int]  # (row, col) of the top-left cell
    extent: tuple[int, int]  # (rows, cols)

    def mask(self, height: int, width: int) -> np.ndarray:
        out = np.zeros((height, width), dtype=bool)
        r0 = max(self.corner[0], 0)
        c0 = max(self.corner[1], 0)
        r1 = min(self.corner[0] + self.extent[0], height)
        c1 = min(self.corner[1] + self.extent[1], width)
        if r0 < r1 and c0 < c1:
            out[r0:r1, c0:c1] = True
        return out


DamageMask = Union[CircleDamage, RectDamage]


@dataclass(frozen=True)
class SignalEvent:
    """One-timestep environment signal near `position`, jittered uniformly
    within the Chebyshev ball of radius `jitter_radius` (clipped to bounds)."""

    position: tuple[int, int]  # (row, col)
    jitter_radius: int = 0


def apply_damage(grid: CellGrid, mask: DamageMask) -> CellGrid:
    """Zero every channel of every cell inside the mask. Out-of-bounds parts
    of the mask are ignored; an empty intersection is a no-op."""
    out = grid.copy()
    region = mask.mask(grid.config.height, grid.config.width)
    out.data[region] = 0.0
    return out


def inject_signal(
    grid: CellGrid,
    position: tuple[int, int],
    jitter_radius: int,
    rng: np.random.Generator,
) -> tuple[CellGrid, tuple[int, int]]:
    """Set the environment channel to 1 at one cell near `position`.

    The actual cell is drawn uniformly from the jitter ball intersected with
    the grid. Returns the new grid and the chosen cell.
    """
    if not grid.config.env_enabled:
        raise ValueError("cannot inject a signal: environment channel absent")
    r, c = position
    h, w = grid.config.height, grid.config.width
    if not (0 <= r < h and 0 <= c < w):
        raise ValueError(f"signal position {position} outside {h}x{w} grid")
    r0, r1 = max(0, r - jitter_radius), min(h - 1, r + jitter_radius)
    c0, c1 = max(0, c - jitter_radius), min(w - 1, c + jitter_radius)
    rr = int(rng.integers(r0, r1 + 1))
    cc = int(rng.integers(c0, c1 + 1))
    out = grid.copy()
    out.data[rr, cc, ENV_CHANNEL] = 1.0
    return out, (rr, cc)


def clear_env(grid: CellGrid) -> CellGrid:
    """Zero the environment channel everywhere; other channels untouched."""
    if not grid.config.env_enabled:
        raise ValueError("cannot clear: environment channel absent")
    out = grid.copy()
    out.data[..., ENV_CHANNEL] = 0.0
    return out


def grid_to_rgba_u8(grid: CellGrid) -> np.ndarray:
    """First four channels clamped to [0,1] and scaled to 8-bit RGBA."""
    rgba = np.clip(grid.data[..., :4], 0.0, 1.0)
    return np.round(rgba * 255.0).astype(np.uint8)


def save_png(grid: CellGrid, path) -> None:
    from PIL import Image

    Image.fromarray(grid_to_rgba_u8(grid), mode="RGBA").save(path)


def dump_channels(grid: CellGrid, path) -> None:
    """Raw channel dump: 16-byte header (magic, u32 h/w/c) then little-endian
    f32 values, row-major with the channel index varying fastest."""
    header = struct.pack("<4sIII", DUMP_MAGIC, grid.config.height,
                         grid.config.width, grid.config.channels)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(grid.data, dtype="<f4").tobytes())


def load_channel_dump(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, h, w, c = struct.unpack("<4sIII", raw[:16])
    if magic != DUMP_MAGIC:
        raise ValueError(f"bad channel-dump magic {magic!r}")
    data = np.frombuffer(raw[16:], dtype="<f4")
    if data.size != h * w * c:
        raise ValueError("channel dump payload does not match header dimensions")
    return data.reshape(h, w, c).astype(np.float32)
