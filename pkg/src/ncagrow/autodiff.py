"""Reverse-mode differentiation of a loss through the unrolled CA run.

Two conventions make the gradient exact for the *realized* stochastic
computation, and are the reason finite differences (replayed with frozen
masks) agree with the backward pass:

  * the sampled fire mask is a constant 0/1 multiplier on the delta;
  * the combined pre/post alive mask is a constant 0/1 multiplier on the
    candidate state (no gradient through the threshold comparison).

`replay_final` re-runs the recorded computation with those masks (and the
environment channel) frozen, which is the differentiable map the tape
represents; the finite-difference oracle perturbs parameters through it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    SOBEL_X,
    SOBEL_Y,
    ModelParams,
    Schedule,
    StepConfig,
    StepRecord,
    conv3x3,
    delta_from_hidden,
    hidden_preactivation,
    run,
)
from .state import ENV_CHANNEL, STATE_CHANNELS, CellGrid


class NonFiniteGradientError(RuntimeError):
    """Backward produced NaN/Inf; carries the unrolled step index."""

    def __init__(self, step_index: int):
        super().__init__(f"non-finite gradient while backpropagating step {step_index}")
        self.step_index = step_index


@dataclass
class Tape:
    """Recorded activations of one forward run, oldest step first."""

    records: list[StepRecord]
    params: ModelParams
    x0: np.ndarray           # initial state (events at t=0 not yet applied)
    final: np.ndarray
    alive_threshold: float

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class ParamGrads:
    dw1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: np.ndarray

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "ParamGrads":
        return cls(np.zeros_like(params.w1), np.zeros_like(params.b1),
                   np.zeros_like(params.w2), np.zeros_like(params.b2))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return (self.dw1, self.db1, self.dw2, self.db2)

    def global_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(a.astype(np.float64) ** 2)) for a in self.arrays())))

    def scaled(self, factor: float) -> "ParamGrads":
        return ParamGrads(*(a * factor for a in self.arrays()))

    def add_(self, other: "ParamGrads") -> "ParamGrads":
        self.dw1 += other.dw1
        self.db1 += other.db1
        self.dw2 += other.dw2
        self.db2 += other.db2
        return self


def forward_recorded(
    seed: CellGrid,
    params: ModelParams,
    steps: int,
    cfg: StepConfig,
    schedule: Schedule | None = None,
) -> tuple[CellGrid, Tape]:
    """Run forward like `rollout` while recording the tape for backward."""
    result = run(seed, params, steps, cfg, schedule, record_tape=True)
    tape = Tape(records=result.records, params=params, x0=seed.data.copy(),
                final=result.final.data, alive_threshold=seed.config.alive_threshold)
    return result.final, tape


def tape_from_records(
    records: list[StepRecord],
    params: ModelParams,
    x0: np.ndarray,
    final: np.ndarray,
    alive_threshold: float,
) -> Tape:
    return Tape(records, params, x0, final, alive_threshold)


def backward(tape: Tape, loss_grad_wrt_final: np.ndarray) -> ParamGrads:
    """Exact reverse-mode gradient of the recorded forward computation.

    `loss_grad_wrt_final` has shape (..., H, W, 16) matching the recorded
    run (a leading batch axis is summed into the parameter gradients, so a
    batch-mean gradient is obtained by feeding per-sample grads / B).
    """
    params = tape.params
    grads = ParamGrads.zeros_like(params)
    d = np.asarray(loss_grad_wrt_final)
    if d.shape[-1] != STATE_CHANNELS:
        raise ValueError(f"loss gradient must cover the {STATE_CHANNELS} written channels")
    kx = np.flip(SOBEL_X).astype(d.dtype)
    ky = np.flip(SOBEL_Y).astype(d.dtype)

    for index in reversed(range(len(tape.records))):
        rec = tape.records[index]
        channels = rec.channels
        d_candidate = d * rec.alive[..., None].astype(d.dtype)
        d_delta = d_candidate * rec.fire
        hid = np.maximum(rec.hidden_pre, 0.0)
        flat_dd = d_delta.reshape(-1, STATE_CHANNELS)
        grads.dw2 += hid.reshape(-1, params.hidden_size).T @ flat_dd
        grads.db2 += flat_dd.sum(axis=0)
        dz = (flat_dd @ params.w2.T).reshape(rec.hidden_pre.shape)
        dz *= rec.hidden_pre > 0.0
        flat_dz = dz.reshape(-1, params.hidden_size)
        grads.dw1 += rec.perception.reshape(-1, params.perception_size).T @ flat_dz
        grads.db1 += flat_dz.sum(axis=0)
        dp = (flat_dz @ params.w1.T).reshape(rec.perception.shape)
        dx = dp[..., :channels].copy()
        dx += conv3x3(dp[..., channels:2 * channels], kx)
        dx += conv3x3(dp[..., 2 * channels:], ky)
        # candidate = state_in[:16] + fire*delta, so d_candidate flows straight
        # through to the previous step's written channels
        d = d_candidate + dx[..., :STATE_CHANNELS]
        if not np.all(np.isfinite(d)):
            raise NonFiniteGradientError(index)

    for arr in grads.arrays():
        if not np.all(np.isfinite(arr)):
            raise NonFiniteGradientError(0)
    return grads


def replay_final(tape: Tape, params: ModelParams) -> np.ndarray:
    """Re-run the recorded computation with frozen fire/alive masks and the
    recorded environment inputs, under (possibly different) parameters.

    With the tape's own parameters this reproduces the recorded final state
    bit-exactly.
    """
    if not tape.records:
        return tape.final.copy()
    x = tape.records[0].state_in.copy()
    for rec in tape.records:
        channels = rec.channels
        # the recorded input already contains any scheduled signal/damage
        if channels > STATE_CHANNELS:
            x[..., STATE_CHANNELS:] = rec.state_in[..., STATE_CHANNELS:]
        p = np.concatenate(
            [x,
             conv3x3(x, SOBEL_X.astype(x.dtype)),
             conv3x3(x, SOBEL_Y.astype(x.dtype))],
            axis=-1,
        )
        z = hidden_preactivation(p, params)
        delta = delta_from_hidden(z, params)
        candidate = x[..., :STATE_CHANNELS] + rec.fire * delta
        new16 = candidate * rec.alive[..., None].astype(x.dtype)
        if channels > STATE_CHANNELS:
            x = np.concatenate([new16, np.zeros_like(x[..., STATE_CHANNELS:])], axis=-1)
        else:
            x = new16
    if x.shape[-1] > STATE_CHANNELS:
        x[..., ENV_CHANNEL] = tape.final[..., ENV_CHANNEL]
    return x


def finite_diff_grads(
    tape: Tape,
    loss_grad_wrt_final: np.ndarray,
    eps: float = 1e-4,
) -> ParamGrads:
    """Central-difference gradient of L(params) = sum(loss_grad * final16)
    through the frozen-mask replay; the independent oracle for `backward`."""
    params = tape.params
    probe = np.asarray(loss_grad_wrt_final)

    def loss_of(p: ModelParams) -> float:
        final = replay_final(tape, p)
        return float(np.sum(probe.astype(np.float64) * final[..., :STATE_CHANNELS].astype(np.float64)))

    grads = ParamGrads.zeros_like(params)
    for arr, out in zip((params.w1, params.b1, params.w2, params.b2), grads.arrays()):
        flat = arr.reshape(-1)
        gflat = out.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_of(params)
            flat[i] = orig - eps
            lo = loss_of(params)
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * eps)
    return grads


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_err: float
    worst_param: str            # e.g. "w1[12,3]"
    tolerance: float
    n_params: int

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"grad check {status}: max relative error {self.max_rel_err:.3e} "
                f"at {self.worst_param} over {self.n_params} parameters "
                f"(tolerance {self.tolerance:g})")


def grad_check(
    seed: CellGrid,
    params: ModelParams,
    steps: int,
    cfg: StepConfig,
    tolerance: float = 1e-3,
    eps: float = 1e-4,
    abs_floor: float = 1e-12,
    abs_tolerance: float = 1e-10,
    backward_grads: ParamGrads | None = None,
    probe_seed: int = 0,
) -> GradCheckReport:
    """Compare backward against central differences in f64 with frozen masks.

    Uses a random linear probe on the final state; since backward is linear
    in the loss gradient this exercises every path. Gradients whose backward
    and oracle values are both below `abs_floor` fall back to an absolute
    comparison (flat directions, e.g. a zero-initialized second layer).
    """
    if seed.config.height > 12 or seed.config.width > 12 or steps > 16:
        raise ValueError("grad_check is meant for small instances (<=12x12, <=16 steps)")
    seed64 = CellGrid(seed.config, seed.data.astype(np.float64))
    params64 = params.astype(np.float64)
    _, tape = forward_recorded(seed64, params64, steps, cfg)
    probe_rng = np.random.default_rng(probe_seed)
    probe = probe_rng.standard_normal(tape.final.shape[:-1] + (STATE_CHANNELS,))
    if backward_grads is None:
        backward_grads = backward(tape, probe)
    oracle = finite_diff_grads(tape, probe, eps=eps)

    max_rel = 0.0
    worst = "none"
    count = 0
    for name, got, want in zip(("w1", "b1", "w2", "b2"),
                               backward_grads.arrays(), oracle.arrays()):
        count += got.size
        for idx in np.ndindex(got.shape):
            g, f = float(got[idx]), float(want[idx])
            if abs(g) < abs_floor and abs(f) < abs_floor:
                continue
            if abs(g - f) <= abs_tolerance:
                continue
            rel = abs(g - f) / max(abs(g), abs(f))
            if rel > max_rel:
                max_rel = rel
                worst = f"{name}[{','.join(map(str, idx))}]"
    return GradCheckReport(passed=max_rel < tolerance, max_rel_err=max_rel,
                           worst_param=worst, tolerance=tolerance, n_params=count)
