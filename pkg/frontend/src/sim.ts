// Session state for the viewer: one loaded checkpoint, the evolving grid,
// and a queue of user events (clicks, damage) that are applied right
// before the next update step. Kept free of DOM references so the whole
// thing can run under a test harness.

import { Checkpoint } from "./checkpoint.js";
import {
  Grid,
  cloneGrid,
  makeSeed,
  stepGrid,
  clearEnv,
  injectSignal,
  applyCircleDamage,
  aliveFromAlpha,
} from "./engine.js";
import { SplitMix64, fireMaskFromSeed } from "./rng.js";

export interface SignalRequest {
  kind: "signal";
  row: number;
  col: number;
}

export interface DamageRequest {
  kind: "damage";
  row: number;
  col: number;
  radius: number;
}

export type EventRequest = SignalRequest | DamageRequest;

export interface LogEntry {
  step: number;
  kind: string;
  detail: string;
}

export class Session {
  readonly checkpoint: Checkpoint;
  readonly sessionSeed: number;

  grid: Grid;
  stepCount = 0;
  genome: number[];
  log: LogEntry[] = [];

  private seedRng: SplitMix64;
  private pending: EventRequest[] = [];

  constructor(checkpoint: Checkpoint, genome: number[] | null = null, sessionSeed = 1) {
    this.checkpoint = checkpoint;
    this.sessionSeed = sessionSeed;
    this.genome = genome ?? new Array(checkpoint.grid.genomeLen).fill(0);
    this.seedRng = new SplitMix64(sessionSeed);
    this.grid = makeSeed(checkpoint.grid, this.genome);
    this.pushLog("reset", `seed cell, genome=[${this.genome.join(", ")}]`);
  }

  /** Back to the single seed cell. The fire sequence starts over too. */
  reset(genome: number[] | null = null): void {
    if (genome !== null) {
      this.genome = genome;
    }
    this.seedRng = new SplitMix64(this.sessionSeed);
    this.grid = makeSeed(this.checkpoint.grid, this.genome);
    this.stepCount = 0;
    this.pending = [];
    this.pushLog("reset", `seed cell, genome=[${this.genome.join(", ")}]`);
  }

  /** Queue a one-step environment signal at a cell. */
  queueSignal(row: number, col: number): void {
    if (!this.checkpoint.grid.envEnabled) {
      this.pushLog("ignored", "checkpoint has no environment channel, click ignored");
      return;
    }
    this.pending.push({ kind: "signal", row, col });
  }

  /** Queue circular damage centred on a cell. */
  queueDamage(row: number, col: number, radius: number): void {
    this.pending.push({ kind: "damage", row, col, radius });
  }

  /**
   * Apply queued events, then run one stochastic update. Damage lands
   * before signals so a click on a freshly damaged spot still counts.
   * The environment channel is cleared again after the step: a signal
   * is visible to the model for exactly one update.
   */
  stepOnce(): void {
    const damages = this.pending.filter((e) => e.kind === "damage") as DamageRequest[];
    const signals = this.pending.filter((e) => e.kind === "signal") as SignalRequest[];
    this.pending = [];
    for (const d of damages) {
      applyCircleDamage(this.grid, d.row, d.col, d.radius);
      this.pushLog("damage", `circle r=${d.radius} at (${d.row}, ${d.col})`);
    }
    for (const s of signals) {
      injectSignal(this.grid, s.row, s.col);
      this.pushLog("signal", `env pulse at (${s.row}, ${s.col})`);
    }

    const fireSeed = this.seedRng.nextU64();
    const fire = fireMaskFromSeed(
      fireSeed,
      this.grid.height,
      this.grid.width,
      this.fireRate(),
    );
    this.grid = stepGrid(this.grid, this.checkpoint.params, fire, this.aliveThreshold());
    clearEnv(this.grid);
    this.stepCount += 1;
  }

  steps(n: number): void {
    for (let i = 0; i < n; i++) this.stepOnce();
  }

  aliveCount(): number {
    const alive = aliveFromAlpha(this.grid, this.aliveThreshold());
    let n = 0;
    for (let i = 0; i < alive.length; i++) n += alive[i];
    return n;
  }

  snapshot(): Grid {
    return cloneGrid(this.grid);
  }

  exportLog(): string {
    return JSON.stringify(this.log, null, 2);
  }

  aliveThreshold(): number {
    return this.checkpoint.grid.aliveThreshold;
  }

  fireRate(): number {
    const meta = this.checkpoint.metadata;
    const rate = meta ? (meta["fire_rate"] as number | undefined) : undefined;
    return typeof rate === "number" ? rate : 0.5;
  }

  private pushLog(kind: string, detail: string): void {
    this.log.push({ step: this.stepCount, kind, detail });
  }
}
