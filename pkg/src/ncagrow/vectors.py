"""Emit the shared single-step test vectors the browser viewer replays to
prove numeric parity with this engine.

Each case carries a grid config, model weights, an input state, the fire
mask (both as explicit values and as the splitmix64 seed that regenerates
it) and the engine's output state.  All arrays are base64 little-endian
f32, flattened row-major with the channel index fastest, matching the
checkpoint weight encoding.
"""
from __future__ import annotations

import base64
import json

import numpy as np

from .model import ModelParams, init_params, sample_fire, step_arrays
from .rng import fire_mask_from_seed
from .state import GridConfig, make_seed

VECTOR_VERSION = 1


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _case(
    name: str,
    grid: GridConfig,
    params: ModelParams,
    state: np.ndarray,
    fire_seed: int,
    fire_rate: float = 0.5,
) -> dict:
    fire2d = fire_mask_from_seed(fire_seed, grid.height, grid.width, fire_rate)
    out, _ = step_arrays(state.astype(np.float32), params,
                         fire2d[..., None], grid.alive_threshold)
    return {
        "name": name,
        "grid": {
            "height": grid.height,
            "width": grid.width,
            "channels": grid.channels,
            "env_enabled": grid.env_enabled,
            "genome_len": grid.genome_len,
            "alive_threshold": grid.alive_threshold,
        },
        "hidden_size": params.hidden_size,
        "weights": {
            "w1": _b64(params.w1),
            "b1": _b64(params.b1),
            "w2": _b64(params.w2),
            "b2": _b64(params.b2),
        },
        "fire_rate": fire_rate,
        # Decimal string: these seeds use the full 64-bit range and JSON
        # numbers lose exactness past 2**53 in most parsers.
        "fire_seed": str(fire_seed),
        "fire": _b64(fire2d),
        "input": _b64(state),
        "expected": _b64(out),
    }


def _grown_state(grid: GridConfig, params: ModelParams, steps: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x = make_seed(grid).data.copy()
    for _ in range(steps):
        fire = sample_fire(rng, x.shape[:-1] + (1,), 0.5, x.dtype)
        x, _ = step_arrays(x, params, fire, grid.alive_threshold)
        if grid.env_enabled:
            x[..., grid.channels - 1] = 0.0
    return x


def generate_vectors(n_cases: int = 20, master_seed: int = 2024) -> dict:
    rng = np.random.default_rng(master_seed)
    cases = []

    plain = GridConfig(8, 8, env_enabled=False, genome_len=0)
    env_grid = GridConfig(8, 8, env_enabled=True, genome_len=0)
    genome_grid = GridConfig(9, 7, env_enabled=True, genome_len=4)

    for i in range(n_cases):
        kind = i % 5
        fire_seed = int(rng.integers(1, 2**62))
        if kind == 0:
            # fresh seed state, 16 channels
            params = init_params(plain.channels, 12, rng)
            cases.append(_case(f"seed16_{i}", plain, params,
                               make_seed(plain).data, fire_seed))
        elif kind == 1:
            # fresh seed with env channel and genome bits
            params = init_params(genome_grid.channels, 8, rng)
            genome = rng.integers(0, 2, size=4).astype(np.float64)
            cases.append(_case(f"seed17_{i}", genome_grid, params,
                               make_seed(genome_grid, genome).data, fire_seed))
        elif kind == 2:
            # dense random state: every cell alive-ish, exercises all slots
            params = init_params(env_grid.channels, 10, rng)
            state = rng.uniform(-1, 1, size=env_grid.shape).astype(np.float32)
            state[..., 3] = rng.uniform(0, 1, size=(8, 8))
            state[..., env_grid.channels - 1] = rng.integers(0, 2, size=(8, 8))
            cases.append(_case(f"dense_{i}", env_grid, params, state, fire_seed))
        elif kind == 3:
            # mid-growth state from a short rollout
            params = init_params(plain.channels, 12, rng)
            state = _grown_state(plain, params, 6, int(rng.integers(2**31)))
            cases.append(_case(f"grown_{i}", plain, params, state, fire_seed))
        else:
            # alpha values straddling the alive threshold
            params = init_params(plain.channels, 8, rng)
            state = np.zeros(plain.shape, dtype=np.float32)
            state[..., 3] = rng.choice(
                [0.0, 0.0999, 0.1, 0.1001, 0.5, 1.0], size=(8, 8))
            state[..., :3] = rng.uniform(0, 1, size=(8, 8, 3))
            state[..., 4:] = rng.uniform(-0.5, 0.5, size=(8, 8, 12))
            cases.append(_case(f"threshold_{i}", plain, params, state, fire_seed))

    return {
        "version": VECTOR_VERSION,
        "tolerance": 1e-5,
        "note": "single engine steps; arrays are base64 little-endian f32, "
                "row-major, channel fastest",
        "cases": cases,
    }


def write_vectors(path, n_cases: int = 20, master_seed: int = 2024) -> None:
    payload = generate_vectors(n_cases, master_seed)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


if __name__ == "__main__":
    import sys

    write_vectors(sys.argv[1] if len(sys.argv) > 1 else "testdata/viewer_vectors.json")
