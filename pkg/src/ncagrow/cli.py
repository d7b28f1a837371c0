"""Command line front end: train presets, grow organisms from checkpoints,
and poke grown organisms with signals and damage.

Exit codes: 0 success, 2 usage error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, CheckpointError
from .checkpoint import load as load_checkpoint
from .checkpoint import save as save_checkpoint
from .model import RunResult, StepConfig, run
from .presets import PRESET_NAMES, get_preset, run_preset
from .state import CircleDamage, SignalEvent, make_seed, save_png
from .training import REGIMES, TrainingDivergedError, write_loss_csv


class UsageError(Exception):
    pass


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise UsageError(f"--size wants HxW, got {text!r}")


def _parse_steps_range(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        lo, hi = int(a), int(b)
    except ValueError:
        raise UsageError(f"--steps wants A:B, got {text!r}")
    if not 1 <= lo <= hi:
        raise UsageError(f"--steps needs 1 <= A <= B, got {text!r}")
    return lo, hi


def _parse_genome(text: str, genome_len: int) -> np.ndarray:
    """Accept a bit string ('0010') or comma-separated reals ('0.5' or
    '0.5,1,0,0'); length must match the checkpoint."""
    if genome_len == 0:
        if text in ("", "-"):
            return np.zeros(0)
        raise UsageError("checkpoint has no genome channels; drop --genome")
    if set(text) <= {"0", "1"} and len(text) == genome_len:
        return np.array([float(ch) for ch in text])
    try:
        values = np.array([float(tok) for tok in text.split(",")])
    except ValueError:
        raise UsageError(f"cannot parse genome {text!r}")
    if values.size != genome_len:
        raise UsageError(
            f"genome has {values.size} entries but the checkpoint expects {genome_len}"
        )
    return values


def _parse_at_event(text: str, n_fields: int, flag: str) -> tuple[tuple[int, ...], int]:
    """Parse 'a,b@t' or 'a,b,r@t' into ((a, b, ...), t)."""
    try:
        coords, at = text.split("@")
        fields = tuple(int(tok) for tok in coords.split(","))
        t = int(at)
    except ValueError:
        raise UsageError(f"{flag} wants {'x,y' if n_fields == 2 else 'cx,cy,r'}@t, got {text!r}")
    if len(fields) != n_fields:
        raise UsageError(f"{flag} wants {n_fields} coordinates, got {text!r}")
    return fields, t


def _family_for_checkpoint(ckpt: Checkpoint):
    """Rebuild the target family / signal pair a checkpoint was trained on,
    using the preset name recorded in its metadata."""
    name = ckpt.metadata.get("preset")
    if not name or name not in PRESET_NAMES:
        return None
    preset = get_preset(name, height=ckpt.grid.height, width=ckpt.grid.width)
    if preset.signal_targets is not None:
        base, alt = preset.signal_targets
        return {base.id: base, alt.id: alt}
    return dict(preset.family.targets)


def _report_closest(state: np.ndarray, targets: dict, label: str) -> None:
    diffs = {tid: float(np.mean((state[..., :4] - t.rgba) ** 2)) for tid, t in targets.items()}
    best = min(diffs, key=diffs.get)
    parts = ", ".join(f"{tid}={val:.5f}" for tid, val in sorted(diffs.items()))
    print(f"{label}: closest={best}  ({parts})")


def _write_frames(result: RunResult, frames_dir: str, every: int) -> int:
    out = Path(frames_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for i, frame in enumerate(result.frames):
        if i % every == 0 or i == len(result.frames) - 1:
            save_png(frame, out / f"frame_{i:04d}.png")
            written += 1
    return written


def cmd_train(args) -> int:
    if args.regime == "signal" and args.preset != "signal-color":
        raise UsageError("--regime signal only pairs with --preset signal-color")
    if args.preset == "signal-color" and args.regime != "signal":
        raise UsageError("--preset signal-color requires --regime signal")
    height = width = None
    if args.size:
        height, width = _parse_size(args.size)
    steps_min = steps_max = None
    if args.steps:
        steps_min, steps_max = _parse_steps_range(args.steps)
    try:
        preset = get_preset(args.preset, height=height, width=width,
                            hidden_size=args.hidden, iterations=args.iters,
                            steps_min=steps_min, steps_max=steps_max)
    except KeyError as exc:
        raise UsageError(str(exc))
    preset.regime = args.regime

    def progress(it, params, stats):
        if it % 50 == 0 or it == preset.iterations - 1:
            print(f"iter {it:5d}  loss mean {stats.mean_loss:.5f}  "
                  f"min {stats.min_loss:.5f}  max {stats.max_loss:.5f}", flush=True)

    result = run_preset(preset, seed=args.seed, learning_rate=args.lr,
                        progress=progress if args.verbose else None)
    result.checkpoint.metadata["preset"] = preset.name
    out = Path(args.out)
    save_checkpoint(result.checkpoint, out)
    csv_path = out.with_name(out.name.replace(".nca.json", "") + ".loss.csv")
    write_loss_csv(result.history, csv_path)
    print(f"checkpoint: {out}")
    print(f"loss history: {csv_path}")
    print(f"final loss (mean of last 10): "
          f"{np.mean([s.mean_loss for s in result.history[-10:]]):.5f}")
    return 0


def cmd_grow(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    genome = _parse_genome(args.genome, ckpt.grid.genome_len) if args.genome is not None \
        else np.zeros(ckpt.grid.genome_len)
    seed_grid = make_seed(ckpt.grid, genome)
    cfg = StepConfig(rng=np.random.default_rng(args.seed))
    result = run(seed_grid, ckpt.params, args.steps, cfg, record_frames=True)
    if args.frames:
        n = _write_frames(result, args.frames, args.every)
        print(f"wrote {n} frames to {args.frames}")
    targets = _family_for_checkpoint(ckpt)
    if targets:
        _report_closest(result.final.data, targets, f"final (t={args.steps})")
    else:
        alive = int(np.sum(result.final.data[..., 3] > ckpt.grid.alive_threshold))
        print(f"final (t={args.steps}): {alive} cells alive")
    return 0


def cmd_poke(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    signals = [_parse_at_event(s, 2, "--signal-at") for s in (args.signal_at or [])]
    damages = [_parse_at_event(d, 3, "--damage") for d in (args.damage or [])]
    if signals and not ckpt.grid.env_enabled:
        raise UsageError("checkpoint has no environment channel; --signal-at unavailable")
    total = args.grow + args.steps_after
    schedule: list[tuple[int, object]] = []
    for (r, c), t in signals:
        if not 0 <= t < total:
            raise UsageError(f"signal time {t} is outside the {total}-step run")
        schedule.append((t, SignalEvent((r, c), jitter_radius=args.jitter)))
    for (cy, cx, radius), t in damages:
        if not 0 <= t < total:
            raise UsageError(f"damage time {t} is outside the {total}-step run")
        schedule.append((t, CircleDamage((cy, cx), float(radius))))

    genome = _parse_genome(args.genome, ckpt.grid.genome_len) if args.genome is not None \
        else np.zeros(ckpt.grid.genome_len)
    seed_grid = make_seed(ckpt.grid, genome)
    cfg = StepConfig(rng=np.random.default_rng(args.seed))
    result = run(seed_grid, ckpt.params, total, cfg, schedule=schedule, record_frames=True)
    if args.frames:
        n = _write_frames(result, args.frames, args.every)
        print(f"wrote {n} frames to {args.frames}")

    targets = _family_for_checkpoint(ckpt)
    if targets:
        by_time: dict[int, list] = {}
        for t, event in schedule:
            by_time.setdefault(t, []).append(event)
        _report_closest(result.frames[args.grow].data, targets, f"grown (t={args.grow})")
        for t in sorted(by_time):
            kinds = "+".join(type(e).__name__ for e in by_time[t])
            _report_closest(result.frames[t].data, targets, f"before {kinds} (t={t})")
            t_after = min(t + args.report_after, total)
            _report_closest(result.frames[t_after].data, targets,
                            f"after  {kinds} (t={t_after})")
        _report_closest(result.final.data, targets, f"final (t={total})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nca",
                                     description="Grow and steer neural cellular automata.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a preset experiment")
    p_train.add_argument("--regime", required=True, choices=REGIMES)
    p_train.add_argument("--preset", required=True)
    p_train.add_argument("--iters", type=int, default=None)
    p_train.add_argument("--lr", type=float, default=2e-3)
    p_train.add_argument("--size", default=None, help="grid as HxW")
    p_train.add_argument("--hidden", type=int, default=None)
    p_train.add_argument("--steps", default=None, help="rollout range as A:B")
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="checkpoint path (.nca.json)")
    p_train.add_argument("--verbose", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_grow = sub.add_parser("grow", help="grow an organism from a checkpoint")
    p_grow.add_argument("--ckpt", required=True)
    p_grow.add_argument("--genome", default=None, help="bit string like 0010, or reals like 0.5")
    p_grow.add_argument("--steps", type=int, default=200)
    p_grow.add_argument("--frames", default=None, help="directory for PNG frames")
    p_grow.add_argument("--every", type=int, default=1)
    p_grow.add_argument("--seed", type=int, default=0)
    p_grow.set_defaults(func=cmd_grow)

    p_poke = sub.add_parser("poke", help="grow, then inject signals or damage")
    p_poke.add_argument("--ckpt", required=True)
    p_poke.add_argument("--genome", default=None,
                        help="bit string like 0010, or reals like 0.5")
    p_poke.add_argument("--grow", type=int, default=200)
    p_poke.add_argument("--signal-at", action="append", default=None, metavar="X,Y@T")
    p_poke.add_argument("--damage", action="append", default=None, metavar="CX,CY,R@T")
    p_poke.add_argument("--steps-after", type=int, default=150)
    p_poke.add_argument("--jitter", type=int, default=0)
    p_poke.add_argument("--report-after", type=int, default=100)
    p_poke.add_argument("--frames", default=None)
    p_poke.add_argument("--every", type=int, default=1)
    p_poke.add_argument("--seed", type=int, default=0)
    p_poke.set_defaults(func=cmd_poke)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (CheckpointError, TrainingDivergedError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
