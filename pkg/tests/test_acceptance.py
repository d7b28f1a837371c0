"""End-to-end acceptance checks: gradient correctness, the four training
regimes at desk scale, and the structural invariants of the engine.

Every test prints one PASS/FAIL summary line (shown even under captured
output). The training tests run real optimizations with fixed seeds;
expect the whole file to take tens of minutes on one CPU.
"""
import os
import tempfile
import time

import numpy as np

from ncagrow.autodiff import grad_check
from ncagrow.checkpoint import Checkpoint, load, save
from ncagrow.model import ModelParams, StepConfig, run, step_arrays
from ncagrow.presets import get_preset, run_preset
from ncagrow.rng import fire_mask_from_seed
from ncagrow.state import CircleDamage, GridConfig, SignalEvent, make_seed
from ncagrow.targets import GREEN, RED, TargetFamily, glyph, single_target_family
from ncagrow.training import (
    TrainConfig,
    mse_rgba,
    train_growing,
    train_pool,
    train_signal,
)


def announce(capsys, ok: bool, label: str, detail: str) -> None:
    with capsys.disabled():
        print(f"\n[{'PASS' if ok else 'FAIL'}] {label}: {detail}")


# ---------------------------------------------------------------------------
# gradient correctness


def test_backward_matches_finite_differences(capsys):
    """Ten random instances, steps 1/4/16, f64 central differences with
    frozen fire masks. Weight scales are kept small so no ReLU or alive
    threshold sits within eps of a kink (which would poison the oracle,
    not the backward pass)."""
    instances = [
        (6, 6, 0, 1, 1000), (8, 8, 0, 4, 1001), (12, 12, 0, 16, 1002),
        (7, 9, 2, 1, 1003), (10, 10, 3, 4, 1004), (9, 7, 0, 16, 1105),
        (8, 8, 1, 1, 1006), (11, 11, 0, 4, 1007), (6, 10, 1, 16, 1008),
        (12, 8, 2, 4, 1009),
    ]
    t0 = time.time()
    worst = 0.0
    for i, (h, w, genome_len, steps, inst_seed) in enumerate(instances):
        rng = np.random.default_rng(inst_seed)
        grid = GridConfig(h, w, env_enabled=False, genome_len=genome_len)
        params = ModelParams(
            w1=rng.standard_normal((3 * grid.channels, 8)).astype(np.float32) * 0.15,
            b1=rng.standard_normal(8).astype(np.float32) * 0.02,
            w2=rng.standard_normal((8, 16)).astype(np.float32) * 0.05,
            b2=rng.standard_normal(16).astype(np.float32) * 0.02,
        )
        genome = rng.integers(0, 2, genome_len).astype(float)
        seed = make_seed(grid, genome)
        report = grad_check(seed, params, steps, StepConfig(rng=rng), tolerance=1e-3)
        worst = max(worst, report.max_rel_err)
        assert report.passed, f"instance {i} ({h}x{w}, {steps} steps): {report}"
    elapsed = time.time() - t0
    ok = elapsed < 60.0
    announce(capsys, ok, "gradient check",
             f"10 instances, max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok, f"gradient checks took {elapsed:.1f}s, budget is 60s"


# ---------------------------------------------------------------------------
# growing regime


def test_growing_loss_drops(capsys):
    """Plain heart, 24x24, hidden 64, batch 4, 1500 iterations: the last-50
    mean loss must fall below 10% of the first-10 mean."""
    preset = get_preset("plain-heart")
    assert (preset.grid.height, preset.grid.width) == (24, 24)
    assert preset.hidden_size == 64 and preset.batch_size == 4
    t0 = time.process_time()
    result = run_preset(preset, seed=0)
    cpu_minutes = (time.process_time() - t0) / 60.0
    losses = [s.mean_loss for s in result.history]
    assert len(losses) == 1500
    first = float(np.mean(losses[:10]))
    last = float(np.mean(losses[-50:]))
    ratio = last / first
    ok = ratio < 0.10 and cpu_minutes <= 30.0
    announce(capsys, ok, "growing convergence",
             f"first10 {first:.5f}, last50 {last:.5f}, ratio {ratio:.4f} "
             f"(need <0.10), {cpu_minutes:.1f} CPU-min (cap 30)")
    assert ratio < 0.10
    assert cpu_minutes <= 30.0


# ---------------------------------------------------------------------------
# internal signals


def _closest_losses(params, grid, genome, targets, steps, seed):
    rng = np.random.default_rng(seed)
    res = run(make_seed(grid, genome), params, steps, StepConfig(rng=rng))
    return {tid: mse_rgba(res.final.data, t.rgba) for tid, t in targets.items()}


def test_size_genome_selects_target(capsys):
    """Two-genome size family: each genome's organism must sit much closer
    to its own target than to the other one, across 5 rollout seeds."""
    preset = get_preset("heart-size", height=20, width=20, hidden_size=48,
                        batch_size=4, iterations=600, steps_min=48, steps_max=64)
    result = run_preset(preset, seed=0)
    fam = preset.family
    worst = 0.0
    for genome, own_id in ((np.array([0.0]), "heart-small"),
                           (np.array([1.0]), "heart-large")):
        other_id = "heart-large" if own_id == "heart-small" else "heart-small"
        for s in range(5):
            losses = _closest_losses(result.params, preset.grid, genome,
                                     fam.targets, 64, 40 + s)
            ratio = losses[own_id] / losses[other_id]
            worst = max(worst, ratio)
    ok = worst < 0.5
    announce(capsys, ok, "size discrimination",
             f"worst own/other loss ratio {worst:.3f} over 2 genomes x 5 seeds (need <0.5)")
    assert ok

    # Out-of-training probe: c4 = 0.5 must run cleanly; report only.
    half = _closest_losses(result.params, preset.grid, np.array([0.5]),
                           fam.targets, 64, 45)
    with capsys.disabled():
        print(f"       c4=0.5 probe (not asserted): "
              f"small {half['heart-small']:.4f}, large {half['heart-large']:.4f}")


def _shape_color_family() -> TargetFamily:
    kw = dict(height=20, width=20)
    targets = {
        "red-gecko": glyph("gecko", RED, id="red-gecko", **kw),
        "green-gecko": glyph("gecko", GREEN, id="green-gecko", **kw),
        "red-heart": glyph("heart", RED, id="red-heart", **kw),
        "green-heart": glyph("heart", GREEN, id="green-heart", **kw),
    }
    genome_to_id = {
        (0, 1, 0): "red-gecko",
        (0, 0, 1): "green-gecko",
        (1, 1, 0): "red-heart",
        (1, 0, 1): "green-heart",
    }
    return TargetFamily(genome_len=3, targets=targets, genome_to_id=genome_to_id,
                        description="2 shapes x 2 colors, one network")


def test_four_genomes_one_network(capsys):
    """Shape bit plus one-hot color: all four organisms from one set of
    weights, each discriminated by the criterion-3 margin."""
    fam = _shape_color_family()
    grid = GridConfig(20, 20, env_enabled=False, genome_len=3)
    cfg = TrainConfig(regime="growing", grid=grid, iterations=1200,
                      hidden_size=64, batch_size=8, steps_min=48, steps_max=64,
                      seed=0)
    result = train_growing(fam, cfg)
    worst = 0.0
    for genome, own_id in sorted(fam.genome_to_id.items()):
        for s in range(5):
            losses = _closest_losses(result.params, grid, np.array(genome, float),
                                     fam.targets, 64, 60 + s)
            own = losses[own_id]
            others = min(v for k, v in losses.items() if k != own_id)
            worst = max(worst, own / others)
    ok = worst < 0.5
    announce(capsys, ok, "multi-genome capacity",
             f"worst own/nearest-other ratio {worst:.3f} over 4 genomes x 5 seeds (need <0.5)")
    assert ok


# ---------------------------------------------------------------------------
# persistence and regeneration

POOL_GRID = GridConfig(16, 16, env_enabled=False, genome_len=0)
POOL_TARGET = glyph("heart", RED, height=16, width=16, box=11, id="heart")


def _pool_model(regime: str, iterations: int, seed: int):
    fam = single_target_family(POOL_TARGET, "heart")
    cfg = TrainConfig(regime=regime, grid=POOL_GRID, iterations=iterations,
                      hidden_size=48, batch_size=6, pool_size=64,
                      steps_min=64, steps_max=96, seed=seed)
    return train_pool(fam, cfg)


def test_long_rollout_stays_stable(capsys):
    """Persistent regime: running to 400 steps (double the evaluation
    point) must not blow the loss past 2x its step-200 value."""
    result = _pool_model("persistent", 2500, seed=1)
    worst = 0.0
    details = []
    for s in (20, 21, 22):
        rng = np.random.default_rng(s)
        r = run(make_seed(POOL_GRID), result.params, 400, StepConfig(rng=rng),
                record_frames=True)
        l200 = mse_rgba(r.frames[200].data, POOL_TARGET.rgba)
        l400 = mse_rgba(r.frames[400].data, POOL_TARGET.rgba)
        worst = max(worst, l400 / l200)
        details.append(f"seed {s}: {l400/l200:.2f}")
    ok = worst <= 2.0
    announce(capsys, ok, "persistence",
             f"loss400/loss200 worst {worst:.2f} ({', '.join(details)}; need <=2)")
    assert ok


def test_damage_repairs_within_fifty_steps(capsys):
    """Regenerating regime: a limb-scale hole cut at step 200 must be
    repaired by step 250 (loss back within 2x the undamaged value)."""
    result = _pool_model("regenerating", 2500, seed=3)
    worst = 0.0
    details = []
    for s in (20, 21, 22):
        rng = np.random.default_rng(s)
        sched = [(200, CircleDamage((8, 4), 3.0))]
        r = run(make_seed(POOL_GRID), result.params, 250, StepConfig(rng=rng),
                schedule=sched, record_frames=True)
        l200 = mse_rgba(r.frames[200].data, POOL_TARGET.rgba)
        l201 = mse_rgba(r.frames[201].data, POOL_TARGET.rgba)
        l250 = mse_rgba(r.frames[250].data, POOL_TARGET.rgba)
        assert l201 > l200, "damage should hurt the loss before repair"
        worst = max(worst, l250 / l200)
        details.append(f"seed {s}: {l250/l200:.2f}")
    ok = worst <= 2.0
    announce(capsys, ok, "regeneration",
             f"repaired/undamaged worst {worst:.2f} ({', '.join(details)}; need <=2)")
    assert ok


# ---------------------------------------------------------------------------
# external signals

SIGNAL_GRID = GridConfig(16, 16, env_enabled=True, genome_len=0)
SIGNAL_BASE = glyph("heart", GREEN, height=16, width=16, box=11, id="heart-green")
SIGNAL_ALT = glyph("heart", RED, height=16, width=16, box=11, id="heart-red")


def _toggles_correctly(params, seed, pos, jitter, spacing):
    """Grow 200 steps, send 4 signals `spacing` apart, and check that the
    closest target after each one matches the signal-count parity."""
    sched = [(200 + (k - 1) * spacing, SignalEvent(pos, jitter)) for k in range(1, 5)]
    checks = [(200 + k * spacing, k % 2) for k in range(1, 5)]
    rng = np.random.default_rng(seed)
    res = run(make_seed(SIGNAL_GRID), params, checks[-1][0], StepConfig(rng=rng),
              schedule=sched, record_frames=True)
    outcomes = []
    for t, parity in checks:
        st = res.frames[t].data
        closer_to_alt = mse_rgba(st, SIGNAL_ALT.rgba) < mse_rgba(st, SIGNAL_BASE.rgba)
        outcomes.append((1 if closer_to_alt else 0) == parity)
    return all(outcomes), outcomes


def test_signal_toggles_color(capsys):
    """Signal regime (batch 12, 3 worst reseeded): each one-step signal to
    the grown organism flips the closest target, back and forth, for 3
    rollout seeds, with jittered and slightly off-region signals too."""
    cfg = TrainConfig(regime="signal", grid=SIGNAL_GRID, iterations=3000,
                      hidden_size=64, batch_size=12, pool_size=64,
                      steps_min=50, steps_max=100, worst_replace=3,
                      signal_fraction=0.5, jitter_radius=2, seed=100)
    result = train_signal(SIGNAL_BASE, SIGNAL_ALT, cfg)
    center = (8, 8)
    rows = []
    ok = True
    for s in (10, 11, 12):
        good, outcome = _toggles_correctly(result.params, s, center, 0, 100)
        ok &= good
        rows.append(f"seed {s} {'ok' if good else outcome}")
    good, outcome = _toggles_correctly(result.params, 13, center, 2, 100)
    ok &= good
    rows.append(f"jittered {'ok' if good else outcome}")
    # One cell outside the trained jitter ball, still on living tissue; a
    # signal into dead cells has no alive neighborhood to perceive it.
    good, outcome = _toggles_correctly(result.params, 14, (8, 11), 0, 200)
    ok &= good
    rows.append(f"off-region {'ok' if good else outcome}")
    announce(capsys, ok, "signal toggling", "; ".join(rows))
    assert ok


# ---------------------------------------------------------------------------
# structural invariants


def _random_params(rng, channels: int, hidden: int) -> ModelParams:
    return ModelParams(
        w1=rng.standard_normal((3 * channels, hidden)).astype(np.float32) * 0.2,
        b1=rng.standard_normal(hidden).astype(np.float32) * 0.05,
        w2=rng.standard_normal((hidden, 16)).astype(np.float32) * 0.2,
        b2=rng.standard_normal(16).astype(np.float32) * 0.05,
    )


def test_structural_invariants(capsys):
    checks = []

    # Environment channel is read-only through a step.
    rng = np.random.default_rng(0)
    grid17 = GridConfig(10, 10, env_enabled=True, genome_len=2)
    params = _random_params(rng, grid17.channels, 24)
    state = rng.uniform(-1, 1, grid17.shape).astype(np.float32)
    fire = fire_mask_from_seed(5, 10, 10, 0.5)[..., None]
    out, _ = step_arrays(state, params, fire, grid17.alive_threshold)
    checks.append(("env immutability", np.array_equal(out[..., 16], state[..., 16])))

    # A fully dead grid stays exactly zero, whatever the biases say.
    dead = np.zeros(GridConfig(9, 9).shape, dtype=np.float32)
    params16 = _random_params(rng, 16, 24)
    out, _ = step_arrays(dead, params16, np.ones((9, 9, 1), np.float32), 0.1)
    checks.append(("dead stays zero", not out.any()))

    # A scheduled signal is visible for exactly one step.
    res = run(make_seed(grid17, [1, 0]), params, 8,
              StepConfig(rng=np.random.default_rng(3)),
              schedule=[(3, SignalEvent((5, 5)))], record_tape=True)
    env_steps = [i for i, rec in enumerate(res.records)
                 if rec.state_in[..., 16].any()]
    one_step = (env_steps == [3]
                and res.records[3].state_in[5, 5, 16] == 1.0
                and res.records[3].state_in[..., 16].sum() == 1.0
                and not res.final.data[..., 16].any())
    checks.append(("one-timestep signal", one_step))

    # Fire statistic over >= 10^4 cell-steps.
    res = run(make_seed(GridConfig(20, 20)), params16, 30,
              StepConfig(rng=np.random.default_rng(4)), record_tape=True)
    fires = np.concatenate([rec.fire.ravel() for rec in res.records])
    rate = float(fires.mean())
    checks.append((f"fire rate {rate:.4f}", fires.size >= 10_000 and abs(rate - 0.5) <= 0.02))

    # Checkpoint round-trip is byte-identical.
    ckpt = Checkpoint(grid=grid17, params=params, metadata={"regime": "growing"})
    with tempfile.TemporaryDirectory() as tmp:
        p1, p2 = os.path.join(tmp, "a.nca.json"), os.path.join(tmp, "b.nca.json")
        save(ckpt, p1)
        save(load(p1), p2)
        with open(p1, "rb") as f1, open(p2, "rb") as f2:
            checks.append(("checkpoint bit-identity", f1.read() == f2.read()))

    # Fixed seeds replay bit-for-bit; a different seed draws different masks.
    a = run(make_seed(grid17, [1, 0]), params, 20,
            StepConfig(rng=np.random.default_rng(9)), record_tape=True)
    b = run(make_seed(grid17, [1, 0]), params, 20,
            StepConfig(rng=np.random.default_rng(9)), record_tape=True)
    c = run(make_seed(grid17, [1, 0]), params, 20,
            StepConfig(rng=np.random.default_rng(10)), record_tape=True)
    fires = lambda r: np.stack([rec.fire for rec in r.records])
    checks.append(("deterministic replay",
                   np.array_equal(a.final.data, b.final.data)
                   and np.array_equal(fires(a), fires(b))
                   and not np.array_equal(fires(a), fires(c))))

    ok = all(passed for _, passed in checks)
    announce(capsys, ok, "structural invariants",
             "; ".join(f"{name} {'ok' if passed else 'FAILED'}" for name, passed in checks))
    assert ok, [name for name, passed in checks if not passed]
