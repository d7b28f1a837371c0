"""Loss, optimizer and the four training regimes: growing, persistent,
regenerating and signal (pool bookkeeping, worst-k reseeding, damage
injection, signal parity and target swapping)."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import ParamGrads, Tape, backward
from .checkpoint import Checkpoint
from .model import ModelParams, StepConfig, init_params, run_arrays
from .state import (
    STATE_CHANNELS,
    CellGrid,
    CircleDamage,
    GridConfig,
    inject_signal,
    make_seed,
)
from .targets import TargetFamily, TargetImage

REGIMES = ("growing", "persistent", "regenerating", "signal")


class TrainingDivergedError(RuntimeError):
    def __init__(self, iteration: int):
        super().__init__(f"training diverged (non-finite loss) at iteration {iteration}")
        self.iteration = iteration


@dataclass
class LossValue:
    scalar: float
    per_pixel: np.ndarray | None = None  # (H, W) mean squared RGBA error per cell


def mse_rgba(state: np.ndarray, target_rgba: np.ndarray) -> float:
    """Mean squared error between state channels c0..c3 and a target, over
    all H*W*4 entries."""
    diff = state[..., :4].astype(np.float64) - target_rgba.astype(np.float64)
    return float(np.mean(diff * diff))


def loss(final: CellGrid, target: TargetImage, per_pixel: bool = True) -> tuple[LossValue, np.ndarray]:
    """MSE on RGBA plus its gradient w.r.t. the 16 written channels of the
    final state (zero beyond c3)."""
    if final.data.shape[:2] != target.rgba.shape[:2]:
        raise ValueError(
            f"grid {final.data.shape[:2]} and target {target.rgba.shape[:2]} dimensions differ"
        )
    diff = final.data[..., :4] - target.rgba.astype(final.data.dtype)
    n = diff.size
    grad = np.zeros(final.data.shape[:2] + (STATE_CHANNELS,), dtype=final.data.dtype)
    grad[..., :4] = (2.0 / n) * diff
    pp = np.mean(diff.astype(np.float64) ** 2, axis=-1) if per_pixel else None
    return LossValue(scalar=float(np.mean(diff.astype(np.float64) ** 2)), per_pixel=pp), grad


def _batch_loss_grads(final: np.ndarray, targets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample scalar losses (B,) and loss gradients (B, H, W, 16)."""
    diff = final[..., :4] - targets.astype(final.dtype)
    n_per = diff[0].size
    losses = np.mean(diff.astype(np.float64) ** 2, axis=(1, 2, 3))
    grads = np.zeros(final.shape[:3] + (STATE_CHANNELS,), dtype=final.dtype)
    grads[..., :4] = (2.0 / n_per) * diff
    return losses, grads


@dataclass
class AdamState:
    m: ParamGrads
    v: ParamGrads
    step: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m=ParamGrads.zeros_like(params), v=ParamGrads.zeros_like(params))


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
GRAD_NORM_EPS = 1e-8


def adam_update(
    params: ModelParams,
    grads: ParamGrads,
    state: AdamState,
    lr: float,
) -> tuple[ModelParams, AdamState]:
    """One Adam step on globally L2-normalized gradients.

    The gradient is divided by its L2 norm over all four arrays combined
    before the moment updates, then standard bias-corrected Adam applies.
    """
    for arr in grads.arrays():
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite gradient passed to adam_update")
    norm = grads.global_norm()
    scale = 1.0 / (norm + GRAD_NORM_EPS)
    t = state.step + 1
    new_params = []
    new_m = []
    new_v = []
    for p, g, m, v in zip((params.w1, params.b1, params.w2, params.b2),
                          grads.arrays(), state.m.arrays(), state.v.arrays()):
        gn = g * scale
        m2 = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * gn
        v2 = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * gn * gn
        m_hat = m2 / (1.0 - ADAM_BETA1 ** t)
        v_hat = v2 / (1.0 - ADAM_BETA2 ** t)
        new_params.append((p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)).astype(p.dtype))
        new_m.append(m2)
        new_v.append(v2)
    return (ModelParams(*new_params),
            AdamState(m=ParamGrads(*new_m), v=ParamGrads(*new_v), step=t))


@dataclass
class PoolEntry:
    grid: CellGrid
    genome: np.ndarray
    target_id: str
    signal_count: int = 0
    last_loss: float = float("inf")


@dataclass
class TrainConfig:
    regime: str
    grid: GridConfig
    iterations: int
    hidden_size: int = 128
    batch_size: int = 8
    pool_size: int = 256
    steps_min: int = 64
    steps_max: int = 96
    learning_rate: float = 2e-3
    fire_rate: float = 0.5
    damage_fraction: float = 3 / 8      # regenerating: share of the surviving batch damaged
    worst_replace: int = 3              # signal regime: reseeded entries per iteration
    signal_fraction: float = 1 / 3      # signal regime: share of survivors signalled
    jitter_radius: int = 3
    signal_position: tuple[int, int] | None = None  # default: grid center
    seed: int = 0

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; pick one of {REGIMES}")
        if self.steps_min > self.steps_max or self.steps_min < 1:
            raise ValueError("need 1 <= steps_min <= steps_max")
        if not 0 < self.batch_size <= self.pool_size:
            raise ValueError("need 0 < batch_size <= pool_size")
        if self.regime == "signal" and self.worst_replace >= self.batch_size:
            raise ValueError("worst_replace must be smaller than batch_size")
        if not 0.0 <= self.damage_fraction <= 1.0 or not 0.0 <= self.signal_fraction <= 1.0:
            raise ValueError("damage_fraction and signal_fraction must lie in [0, 1]")


@dataclass
class IterationStats:
    iteration: int
    mean_loss: float
    min_loss: float
    max_loss: float


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[IterationStats]

    @property
    def params(self) -> ModelParams:
        return self.checkpoint.params


def write_loss_csv(history: list[IterationStats], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "mean_loss", "min_loss", "max_loss"])
        for s in history:
            writer.writerow([s.iteration, f"{s.mean_loss:.8g}", f"{s.min_loss:.8g}", f"{s.max_loss:.8g}"])


def _train_step(
    x0: np.ndarray,
    target_stack: np.ndarray,
    params: ModelParams,
    opt: AdamState,
    steps: int,
    cfg: TrainConfig,
    rng: np.random.Generator,
    iteration: int,
) -> tuple[np.ndarray, np.ndarray, ModelParams, AdamState]:
    """Shared inner update: batched rollout, batch-mean gradient, Adam."""
    step_cfg = StepConfig(fire_rate=cfg.fire_rate, rng=rng)
    final, records = run_arrays(x0, params, steps, step_cfg,
                                cfg.grid.alive_threshold, cfg.grid.env_enabled,
                                record_tape=True)
    losses, lgrads = _batch_loss_grads(final, target_stack)
    if not np.all(np.isfinite(losses)):
        raise TrainingDivergedError(iteration)
    tape = Tape(records, params, x0, final, cfg.grid.alive_threshold)
    grads = backward(tape, lgrads / x0.shape[0])
    params, opt = adam_update(params, grads, opt, cfg.learning_rate)
    return final, losses, params, opt


def _make_checkpoint(params, cfg: TrainConfig, description: str, iterations_done: int) -> Checkpoint:
    return Checkpoint(grid=cfg.grid, params=params, metadata={
        "regime": cfg.regime,
        "family": description,
        "iterations": iterations_done,
        "seed": cfg.seed,
        "fire_rate": cfg.fire_rate,
    })


def _check_family(family: TargetFamily, cfg: TrainConfig) -> None:
    if not family.domain:
        raise ValueError("target family is empty")
    if family.genome_len != cfg.grid.genome_len:
        raise ValueError(
            f"family genome_len {family.genome_len} != grid genome_len {cfg.grid.genome_len}"
        )
    th, tw = family.grid_shape()
    if (th, tw) != (cfg.grid.height, cfg.grid.width):
        raise ValueError(f"targets are {th}x{tw} but the grid is {cfg.grid.height}x{cfg.grid.width}")


def train_growing(
    family: TargetFamily,
    cfg: TrainConfig,
    params: ModelParams | None = None,
    progress=None,
) -> TrainResult:
    """Growing regime: every sample restarts from a seed whose genome picks
    the target; rollout length is drawn fresh per iteration."""
    _check_family(family, cfg)
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = init_params(cfg.grid.channels, cfg.hidden_size, rng)
    opt = AdamState.for_params(params)
    history: list[IterationStats] = []

    for it in range(cfg.iterations):
        steps = int(rng.integers(cfg.steps_min, cfg.steps_max + 1))
        genomes = [family.sample_genome(rng) for _ in range(cfg.batch_size)]
        x0 = np.stack([make_seed(cfg.grid, g).data for g in genomes])
        targets = np.stack([family.target_for(g).rgba for g in genomes])
        _, losses, params, opt = _train_step(x0, targets, params, opt, steps, cfg, rng, it)
        stats = IterationStats(it, float(losses.mean()), float(losses.min()), float(losses.max()))
        history.append(stats)
        if progress is not None:
            progress(it, params, stats)

    return TrainResult(_make_checkpoint(params, cfg, family.description, cfg.iterations), history)


def _alive_bounding_box(grid: CellGrid) -> tuple[int, int, int, int]:
    alive = grid.data[..., 3] > grid.config.alive_threshold
    rows, cols = np.nonzero(alive)
    if rows.size == 0:
        r = grid.config.height // 2
        c = grid.config.width // 2
        return r, r, c, c
    return int(rows.min()), int(rows.max()), int(cols.min()), int(cols.max())


def _random_damage(grid: CellGrid, rng: np.random.Generator) -> CellGrid:
    """Circle of radius ~ U[side/8, side/4] centered uniformly inside the
    organism's bounding box, zeroing every channel underneath."""
    side = min(grid.config.height, grid.config.width)
    radius = float(rng.uniform(side / 8.0, side / 4.0))
    r0, r1, c0, c1 = _alive_bounding_box(grid)
    center = (int(rng.integers(r0, r1 + 1)), int(rng.integers(c0, c1 + 1)))
    out = grid.copy()
    region = CircleDamage(center, radius).mask(grid.config.height, grid.config.width)
    out.data[region] = 0.0
    return out


def _init_pool(family: TargetFamily, cfg: TrainConfig, rng: np.random.Generator) -> list[PoolEntry]:
    pool = []
    for _ in range(cfg.pool_size):
        genome = family.sample_genome(rng)
        seed = make_seed(cfg.grid, genome)
        tid = family.lookup(genome)
        pool.append(PoolEntry(grid=seed, genome=genome, target_id=tid,
                              last_loss=mse_rgba(seed.data, family.targets[tid].rgba)))
    return pool


def train_pool(
    family: TargetFamily,
    cfg: TrainConfig,
    params: ModelParams | None = None,
    progress=None,
) -> TrainResult:
    """Persistent / regenerating regimes: organisms live in a pool and are
    re-sampled into batches; the worst sampled entry is reseeded each
    iteration and (when regenerating) a fraction of the best survivors is
    damaged before stepping."""
    if cfg.regime not in ("persistent", "regenerating"):
        raise ValueError(f"train_pool handles persistent/regenerating, not {cfg.regime!r}")
    _check_family(family, cfg)
    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = init_params(cfg.grid.channels, cfg.hidden_size, rng)
    opt = AdamState.for_params(params)
    pool = _init_pool(family, cfg, rng)
    history: list[IterationStats] = []

    for it in range(cfg.iterations):
        idx = rng.choice(cfg.pool_size, size=cfg.batch_size, replace=False)
        entries = [pool[i] for i in idx]
        worst = max(range(len(entries)), key=lambda k: entries[k].last_loss)
        genome = family.sample_genome(rng)
        entries[worst] = PoolEntry(grid=make_seed(cfg.grid, genome), genome=genome,
                                   target_id=family.lookup(genome))

        batch_grids = [e.grid for e in entries]
        if cfg.regime == "regenerating":
            survivors = [k for k in range(len(entries)) if k != worst]
            survivors.sort(key=lambda k: entries[k].last_loss)
            n_damage = int(round(cfg.damage_fraction * len(survivors)))
            for k in survivors[:n_damage]:
                batch_grids[k] = _random_damage(batch_grids[k], rng)

        x0 = np.stack([g.data for g in batch_grids])
        targets = np.stack([family.targets[e.target_id].rgba for e in entries])
        steps = int(rng.integers(cfg.steps_min, cfg.steps_max + 1))
        final, losses, params, opt = _train_step(x0, targets, params, opt, steps, cfg, rng, it)

        for k, i in enumerate(idx):
            entries[k].grid = CellGrid(cfg.grid, final[k].copy())
            entries[k].last_loss = float(losses[k])
            pool[i] = entries[k]

        stats = IterationStats(it, float(losses.mean()), float(losses.min()), float(losses.max()))
        history.append(stats)
        if progress is not None:
            progress(it, params, stats)

    return TrainResult(_make_checkpoint(params, cfg, family.description, cfg.iterations), history)


def train_signal(
    base_target: TargetImage,
    alt_target: TargetImage,
    cfg: TrainConfig,
    params: ModelParams | None = None,
    progress=None,
) -> TrainResult:
    """Signal regime: pool training where each sampled batch drops its
    worst_replace entries for fresh seeds, a fraction of the survivors gets a
    one-timestep environment signal, and every entry trains toward
    base/alt according to the parity of the signals it has received."""
    if cfg.regime != "signal":
        raise ValueError(f"train_signal requires regime 'signal', not {cfg.regime!r}")
    if not cfg.grid.env_enabled:
        raise ValueError("signal training needs env_enabled=True (17 channels)")
    if cfg.grid.genome_len != 0:
        raise ValueError("signal training uses plain seeds (genome_len must be 0)")
    if base_target.rgba.shape != alt_target.rgba.shape:
        raise ValueError("base and alt targets must share dimensions")

    rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = init_params(cfg.grid.channels, cfg.hidden_size, rng)
    opt = AdamState.for_params(params)
    center = cfg.signal_position or (cfg.grid.height // 2, cfg.grid.width // 2)
    targets_by_parity = (base_target, alt_target)

    pool = []
    seed_loss = None
    for _ in range(cfg.pool_size):
        seed = make_seed(cfg.grid)
        if seed_loss is None:
            seed_loss = mse_rgba(seed.data, base_target.rgba)
        pool.append(PoolEntry(grid=seed, genome=np.zeros(0), target_id=base_target.id,
                              last_loss=seed_loss))
    history: list[IterationStats] = []

    for it in range(cfg.iterations):
        idx = rng.choice(cfg.pool_size, size=cfg.batch_size, replace=False)
        entries = [pool[i] for i in idx]
        order = sorted(range(len(entries)), key=lambda k: entries[k].last_loss)
        for k in order[len(order) - cfg.worst_replace:]:
            entries[k] = PoolEntry(grid=make_seed(cfg.grid), genome=np.zeros(0),
                                   target_id=base_target.id, last_loss=seed_loss)
        survivors = order[:len(order) - cfg.worst_replace]
        n_signal = int(round(cfg.signal_fraction * len(survivors)))
        signalled = rng.choice(len(survivors), size=n_signal, replace=False) if n_signal else []
        batch_grids = [e.grid for e in entries]
        for s in signalled:
            k = survivors[int(s)]
            batch_grids[k], _ = inject_signal(batch_grids[k], center, cfg.jitter_radius, rng)
            entries[k].signal_count += 1

        target_stack = np.stack([targets_by_parity[e.signal_count % 2].rgba for e in entries])
        x0 = np.stack([g.data for g in batch_grids])
        steps = int(rng.integers(cfg.steps_min, cfg.steps_max + 1))
        final, losses, params, opt = _train_step(x0, target_stack, params, opt, steps, cfg, rng, it)

        for k, i in enumerate(idx):
            entries[k].grid = CellGrid(cfg.grid, final[k].copy())
            entries[k].last_loss = float(losses[k])
            entries[k].target_id = targets_by_parity[entries[k].signal_count % 2].id
            pool[i] = entries[k]

        stats = IterationStats(it, float(losses.mean()), float(losses.min()), float(losses.max()))
        history.append(stats)
        if progress is not None:
            progress(it, params, stats)

    description = f"signal: {base_target.id} <-> {alt_target.id}"
    return TrainResult(_make_checkpoint(params, cfg, description, cfg.iterations), history)
