"""The CA update rule: Sobel+identity perception, two 1x1 conv layers,
stochastic per-cell firing and pre/post alive masking.

Conventions (shared with the browser viewer, see README):
  * perception = [state, sobel_x(state), sobel_y(state)] concatenated
    along the channel axis, so its width is 3 * channels (48 or 51);
  * sobel_x detects gradients along columns, sobel_y along rows, both as
    3x3 cross-correlations with zero padding;
  * the delta is applied to the first 16 channels only, then cells failing
    the pre AND post alive test are zeroed; the environment channel is
    copied through from the input untouched.

All array helpers accept an optional leading batch axis, i.e. shapes
(..., H, W, C); the public API works on single CellGrids.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .state import (
    ENV_CHANNEL,
    STATE_CHANNELS,
    CellGrid,
    CircleDamage,
    DamageMask,
    GridConfig,
    RectDamage,
    SignalEvent,
    alive_from_alpha,
    inject_signal,
)

SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()

DEFAULT_HIDDEN_SIZE = 128
DEFAULT_FIRE_RATE = 0.5


@dataclass
class ModelParams:
    """Weights of the two 1x1 convolution layers.

    delta = relu(p @ w1 + b1) @ w2 + b2, applied per cell. The output is
    always 16-wide regardless of the input channel count.
    """

    w1: np.ndarray  # (perception_size, hidden_size)
    b1: np.ndarray  # (hidden_size,)
    w2: np.ndarray  # (hidden_size, 16)
    b2: np.ndarray  # (16,)

    def __post_init__(self):
        p, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape[0] != h:
            raise ValueError("hidden dimensions of w1/b1/w2 disagree")
        if self.w2.shape[1] != STATE_CHANNELS or self.b2.shape != (STATE_CHANNELS,):
            raise ValueError(f"output dimension must be exactly {STATE_CHANNELS}")
        if p % 3 != 0:
            raise ValueError("perception size must be 3 * channels")
        for name, arr in (("w1", self.w1), ("b1", self.b1), ("w2", self.w2), ("b2", self.b2)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")

    @property
    def perception_size(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.w1.shape[1]

    @property
    def channels(self) -> int:
        return self.perception_size // 3

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(self.w1.astype(dtype), self.b1.astype(dtype),
                           self.w2.astype(dtype), self.b2.astype(dtype))

    def copy(self) -> "ModelParams":
        return ModelParams(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def init_params(
    channels: int,
    hidden_size: int = DEFAULT_HIDDEN_SIZE,
    rng: np.random.Generator | None = None,
    dtype=np.float32,
) -> ModelParams:
    """Glorot-uniform first layer, zero-initialized second layer so the
    initial delta is zero and the seed survives early training."""
    rng = rng or np.random.default_rng()
    perception = 3 * channels
    limit = np.sqrt(6.0 / (perception + hidden_size))
    w1 = rng.uniform(-limit, limit, size=(perception, hidden_size)).astype(dtype)
    b1 = np.zeros(hidden_size, dtype=dtype)
    w2 = np.zeros((hidden_size, STATE_CHANNELS), dtype=dtype)
    b2 = np.zeros(STATE_CHANNELS, dtype=dtype)
    return ModelParams(w1, b1, w2, b2)


@dataclass
class StepConfig:
    fire_rate: float = DEFAULT_FIRE_RATE
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    def __post_init__(self):
        if not 0.0 < self.fire_rate <= 1.0:
            raise ValueError(f"fire_rate must lie in (0, 1], got {self.fire_rate}")


def conv3x3(fields: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-channel 3x3 cross-correlation with zero padding.

    fields: (..., H, W, C); kernel: (3, 3). Returns the same shape.
    """
    h, w = fields.shape[-3:-1]
    pad = [(0, 0)] * (fields.ndim - 3) + [(1, 1), (1, 1), (0, 0)]
    padded = np.pad(fields, pad)
    out = np.zeros_like(fields)
    for u in range(3):
        for v in range(3):
            k = kernel[u, v]
            if k != 0.0:
                out += k * padded[..., u:u + h, v:v + w, :]
    return out


def perceive_arrays(x: np.ndarray) -> np.ndarray:
    kx = SOBEL_X.astype(x.dtype)
    ky = SOBEL_Y.astype(x.dtype)
    return np.concatenate([x, conv3x3(x, kx), conv3x3(x, ky)], axis=-1)


def perceive(grid: CellGrid) -> np.ndarray:
    """Per-cell perception vector: [state, sobel_x, sobel_y], width 3*channels."""
    return perceive_arrays(grid.data)


def hidden_preactivation(perception: np.ndarray, params: ModelParams) -> np.ndarray:
    if perception.shape[-1] != params.perception_size:
        raise ValueError(
            f"perception width {perception.shape[-1]} != params.perception_size {params.perception_size}"
        )
    lead = perception.shape[:-1]
    flat = perception.reshape(-1, params.perception_size)
    z = flat @ params.w1 + params.b1
    return z.reshape(lead + (params.hidden_size,))


def delta_from_hidden(z: np.ndarray, params: ModelParams) -> np.ndarray:
    lead = z.shape[:-1]
    h = np.maximum(z, 0.0)
    d = h.reshape(-1, params.hidden_size) @ params.w2 + params.b2
    return d.reshape(lead + (STATE_CHANNELS,))


def update_delta(perception: np.ndarray, params: ModelParams) -> np.ndarray:
    """Per-cell state delta: w2.T @ relu(w1.T @ p + b1) + b2. No spatial mixing."""
    return delta_from_hidden(hidden_preactivation(perception, params), params)


def sample_fire(rng: np.random.Generator, shape: tuple, fire_rate: float, dtype) -> np.ndarray:
    return (rng.random(shape) < fire_rate).astype(dtype)


@dataclass
class StepRecord:
    """Activations of one unrolled step, as needed by the backward pass."""

    perception: np.ndarray  # (..., H, W, 3C); first C columns are the input state
    hidden_pre: np.ndarray  # (..., H, W, hidden)
    fire: np.ndarray        # (..., H, W, 1), 0/1
    alive: np.ndarray       # (..., H, W) bool, pre AND post mask

    @property
    def channels(self) -> int:
        return self.perception.shape[-1] // 3

    @property
    def state_in(self) -> np.ndarray:
        return self.perception[..., :self.channels]


def step_arrays(
    x: np.ndarray,
    params: ModelParams,
    fire: np.ndarray,
    alive_threshold: float,
) -> tuple[np.ndarray, StepRecord]:
    """One update on raw state arrays with an explicit fire mask."""
    if x.shape[-1] * 3 != params.perception_size:
        raise ValueError(
            f"grid has {x.shape[-1]} channels but params expect {params.channels}"
        )
    pre_alive = alive_from_alpha(x[..., 3], alive_threshold)
    p = perceive_arrays(x)
    z = hidden_preactivation(p, params)
    delta = delta_from_hidden(z, params)
    candidate = x[..., :STATE_CHANNELS] + fire * delta
    post_alive = alive_from_alpha(candidate[..., 3], alive_threshold)
    alive = pre_alive & post_alive
    new16 = candidate * alive[..., None].astype(x.dtype)
    if x.shape[-1] > STATE_CHANNELS:
        y = np.concatenate([new16, x[..., STATE_CHANNELS:]], axis=-1)
    else:
        y = new16
    return y, StepRecord(p, z, fire, alive)


def step(grid: CellGrid, params: ModelParams, cfg: StepConfig) -> CellGrid:
    """One stochastic CA update. The environment channel is read, never written."""
    fire = sample_fire(cfg.rng, grid.data.shape[:-1] + (1,), cfg.fire_rate, grid.data.dtype)
    y, _ = step_arrays(grid.data, params, fire, grid.config.alive_threshold)
    return CellGrid(grid.config, y)


Schedule = list[tuple[int, "SignalEvent | DamageMask"]]


@dataclass
class RunResult:
    final: CellGrid
    frames: list[CellGrid]                      # [seed, ..., final] or [seed, final]
    records: list[StepRecord] | None            # present when taping
    signal_positions: list[tuple[int, tuple[int, int]]]  # (step, cell) actually hit


def _check_schedule(schedule: Schedule | None, steps: int) -> dict[int, list]:
    by_time: dict[int, list] = {}
    for t, event in schedule or []:
        if not 0 <= t < steps:
            raise ValueError(f"scheduled event at t={t} outside run of {steps} steps")
        by_time.setdefault(t, []).append(event)
    return by_time


def run(
    seed: CellGrid,
    params: ModelParams,
    steps: int,
    cfg: StepConfig,
    schedule: Schedule | None = None,
    record_frames: bool = False,
    record_tape: bool = False,
) -> RunResult:
    """Iterate `step`, applying scheduled damage/signals before the step they
    are due and clearing the environment channel after every step (signals
    last exactly one timestep)."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    by_time = _check_schedule(schedule, steps)
    env = seed.config.env_enabled
    grid = seed.copy()
    frames = [grid.copy()]
    records: list[StepRecord] | None = [] if record_tape else None
    hits: list[tuple[int, tuple[int, int]]] = []

    for t in range(steps):
        events = by_time.get(t, ())
        # damage is applied before signals so a same-step signal is never erased
        for event in events:
            if isinstance(event, (CircleDamage, RectDamage)):
                region = event.mask(grid.config.height, grid.config.width)
                grid.data[region] = 0.0
        for event in events:
            if isinstance(event, SignalEvent):
                grid, pos = inject_signal(grid, event.position, event.jitter_radius, cfg.rng)
                hits.append((t, pos))
        fire = sample_fire(cfg.rng, grid.data.shape[:-1] + (1,), cfg.fire_rate, grid.data.dtype)
        y, rec = step_arrays(grid.data, params, fire, grid.config.alive_threshold)
        if env:
            y[..., ENV_CHANNEL] = 0.0
        grid = CellGrid(grid.config, y)
        if records is not None:
            records.append(rec)
        if record_frames:
            frames.append(grid.copy())

    if not record_frames:
        frames.append(grid.copy())
    return RunResult(final=grid, frames=frames, records=records, signal_positions=hits)


def rollout(
    seed: CellGrid,
    params: ModelParams,
    steps: int,
    cfg: StepConfig,
    schedule: Schedule | None = None,
    record_frames: bool = False,
) -> list[CellGrid]:
    """Trajectory of a run: the full frame list when recording, otherwise
    [seed, final]."""
    if steps < 1:
        raise ValueError("rollout needs at least one step")
    return run(seed, params, steps, cfg, schedule, record_frames=record_frames).frames


def run_arrays(
    x0: np.ndarray,
    params: ModelParams,
    steps: int,
    cfg: StepConfig,
    alive_threshold: float,
    env_enabled: bool,
    record_tape: bool = False,
) -> tuple[np.ndarray, list[StepRecord]]:
    """Batched run on a (B, H, W, C) state stack; used by the training loop.

    Any scheduled damage or signal must already be baked into x0; the
    environment channel is cleared after every step as in `run`.
    """
    x = x0.copy()
    records: list[StepRecord] = []
    for _ in range(steps):
        fire = sample_fire(cfg.rng, x.shape[:-1] + (1,), cfg.fire_rate, x.dtype)
        x, rec = step_arrays(x, params, fire, alive_threshold)
        if env_enabled:
            x[..., ENV_CHANNEL] = 0.0
        if record_tape:
            records.append(rec)
    return x, records
