"""Named experiment configurations: target family, grid geometry and the
training setup for each, with caller overrides for desk-scale runs."""
from __future__ import annotations

from dataclasses import dataclass

from .state import GridConfig
from .training import TrainConfig, TrainResult, train_growing, train_pool, train_signal
from .targets import (
    GREEN,
    RED,
    TargetFamily,
    TargetImage,
    family_from_table,
    glyph,
    single_target_family,
)

PRESET_NAMES = (
    "plain-heart",
    "heart-size",
    "heart-rotation",
    "six-organisms",
    "gecko-legs",
    "signal-color",
)


@dataclass
class Preset:
    name: str
    regime: str
    grid: GridConfig
    family: TargetFamily | None = None          # genome-driven presets
    signal_targets: tuple[TargetImage, TargetImage] | None = None  # signal preset
    hidden_size: int = 128
    batch_size: int = 8
    iterations: int = 4000
    steps_min: int = 64
    steps_max: int = 96
    notes: str = ""


def _size_family(height: int, width: int, box: int) -> TargetFamily:
    small = glyph("heart", RED, size_scale=0.5, height=height, width=width, box=box,
                  id="heart-small")
    large = glyph("heart", RED, size_scale=1.0, height=height, width=width, box=box,
                  id="heart-large")
    return TargetFamily(
        genome_len=1,
        targets={t.id: t for t in (small, large)},
        genome_to_id={(0,): small.id, (1,): large.id},
        description="heart size: c4=0 small, c4=1 large",
    )


def _rotation_family(height: int, width: int, box: int) -> TargetFamily:
    upright = glyph("heart", RED, rotation=0, height=height, width=width, box=box,
                    id="heart-up")
    flipped = glyph("heart", RED, rotation=180, height=height, width=width, box=box,
                    id="heart-rot180")
    return TargetFamily(
        genome_len=1,
        targets={t.id: t for t in (upright, flipped)},
        genome_to_id={(0,): upright.id, (1,): flipped.id},
        description="heart orientation: c4=0 upright, c4=1 rotated 180",
    )


def get_preset(
    name: str,
    height: int | None = None,
    width: int | None = None,
    hidden_size: int | None = None,
    batch_size: int | None = None,
    iterations: int | None = None,
    steps_min: int | None = None,
    steps_max: int | None = None,
) -> Preset:
    """Build a preset, optionally overriding grid size and trainer scale.

    Target glyphs are rendered for whatever grid size ends up selected, so
    shrinking the grid shrinks the organism with it.
    """
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")

    if name == "plain-heart":
        h = height or 24
        w = width or h
        grid = GridConfig(h, w, env_enabled=False, genome_len=0)
        fam = single_target_family(glyph("heart", RED, height=h, width=w, id="heart"))
        preset = Preset(name, "growing", grid, family=fam,
                        hidden_size=hidden_size or 64,
                        batch_size=batch_size or 4,
                        iterations=iterations or 1500,
                        notes="single red heart, no genome")
    elif name == "heart-size":
        h = height or 32
        w = width or h
        grid = GridConfig(h, w, env_enabled=False, genome_len=1)
        preset = Preset(name, "growing", grid,
                        family=_size_family(h, w, box=round(0.7 * min(h, w))),
                        hidden_size=hidden_size or 96,
                        batch_size=batch_size or 8,
                        iterations=iterations or 4000,
                        notes="one genome bit selects heart size")
    elif name == "heart-rotation":
        h = height or 32
        w = width or h
        grid = GridConfig(h, w, env_enabled=False, genome_len=1)
        preset = Preset(name, "growing", grid,
                        family=_rotation_family(h, w, box=round(0.7 * min(h, w))),
                        hidden_size=hidden_size or 96,
                        batch_size=batch_size or 8,
                        iterations=iterations or 4000,
                        notes="one genome bit selects heart orientation")
    elif name == "six-organisms":
        h = height or 40
        w = width or h
        grid = GridConfig(h, w, env_enabled=False, genome_len=4)
        preset = Preset(name, "growing", grid,
                        family=family_from_table("six-organisms", height=h, width=w),
                        hidden_size=hidden_size or 128,
                        batch_size=batch_size or 8,
                        iterations=iterations or 8000,
                        notes="c4 shape bit + c5..c7 one-hot colour, 6 genomes")
    elif name == "gecko-legs":
        h = height or 40
        w = width or h
        grid = GridConfig(h, w, env_enabled=False, genome_len=4)
        preset = Preset(name, "regenerating", grid,
                        family=family_from_table("gecko-legs", height=h, width=w),
                        hidden_size=hidden_size or 128,
                        batch_size=batch_size or 8,
                        iterations=iterations or 8000,
                        notes="c4..c7 gate the four legs, 16 green geckos")
    else:  # signal-color
        h = height or 24
        w = width or h
        grid = GridConfig(h, w, env_enabled=True, genome_len=0)
        box = round(0.7 * min(h, w))
        base = glyph("heart", GREEN, height=h, width=w, box=box, id="heart-green")
        alt = glyph("heart", RED, height=h, width=w, box=box, id="heart-red")
        preset = Preset(name, "signal", grid, signal_targets=(base, alt),
                        hidden_size=hidden_size or 96,
                        batch_size=batch_size or 12,
                        iterations=iterations or 6000,
                        steps_min=steps_min or 50,
                        steps_max=steps_max or 100,
                        notes="env pulse flips heart colour green <-> red")

    if steps_min is not None:
        preset.steps_min = steps_min
    if steps_max is not None:
        preset.steps_max = steps_max
    return preset


def train_config_for(
    preset: Preset,
    seed: int = 0,
    learning_rate: float = 2e-3,
    iterations: int | None = None,
) -> TrainConfig:
    return TrainConfig(
        regime=preset.regime,
        grid=preset.grid,
        iterations=iterations if iterations is not None else preset.iterations,
        hidden_size=preset.hidden_size,
        batch_size=preset.batch_size,
        steps_min=preset.steps_min,
        steps_max=preset.steps_max,
        learning_rate=learning_rate,
        seed=seed,
    )


def run_preset(
    preset: Preset,
    seed: int = 0,
    learning_rate: float = 2e-3,
    iterations: int | None = None,
    progress=None,
) -> TrainResult:
    """Train a preset with the regime-appropriate loop."""
    cfg = train_config_for(preset, seed, learning_rate, iterations)
    if preset.regime == "growing":
        return train_growing(preset.family, cfg, progress=progress)
    if preset.regime in ("persistent", "regenerating"):
        return train_pool(preset.family, cfg, progress=progress)
    base, alt = preset.signal_targets
    return train_signal(base, alt, cfg, progress=progress)
