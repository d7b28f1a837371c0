// Cellular automata update rule, ported to plain typed arrays so a browser
// can replay checkpoints produced by the trainer.
//
// Conventions (must match the reference implementation exactly):
//   perception = [cell state, sobel-x response, sobel-y response]
//   both sobel filters are 3x3 cross-correlations with zero padding
//   delta = relu(p @ w1 + b1) @ w2 + b2, always 16 wide
//   a per-cell 0/1 fire mask scales the whole delta
//   cells failing the alive test before AND after the update are zeroed
//   alive test: 3x3 max of alpha (channel 3) strictly above the threshold
//   the environment channel (index 16, when present) is read but never
//   written by the update; the caller clears it after every step

import { GridConfig, ModelParams, STATE_CHANNELS, ENV_CHANNEL } from "./checkpoint.js";

export const SOBEL_X = [
  [-1, 0, 1],
  [-2, 0, 2],
  [-1, 0, 1],
];
export const SOBEL_Y = [
  [-1, -2, -1],
  [0, 0, 0],
  [1, 2, 1],
];

/** Row-major (h, w, c) state buffer. */
export interface Grid {
  height: number;
  width: number;
  channels: number;
  data: Float32Array;
}

export function makeGrid(height: number, width: number, channels: number): Grid {
  return { height, width, channels, data: new Float32Array(height * width * channels) };
}

export function cloneGrid(grid: Grid): Grid {
  return {
    height: grid.height,
    width: grid.width,
    channels: grid.channels,
    data: grid.data.slice(),
  };
}

/** All-zero grid with one seed cell: alpha 1, genome bits, hidden channels 1. */
export function makeSeed(config: GridConfig, genome: number[]): Grid {
  if (genome.length !== config.genomeLen) {
    throw new Error(`genome has ${genome.length} entries, grid expects ${config.genomeLen}`);
  }
  const grid = makeGrid(config.height, config.width, config.channels);
  const r = Math.floor(config.height / 2);
  const c = Math.floor(config.width / 2);
  const base = (r * config.width + c) * config.channels;
  grid.data[base + 3] = 1.0;
  for (let i = 0; i < config.genomeLen; i++) {
    grid.data[base + 4 + i] = genome[i];
  }
  for (let ch = 4 + config.genomeLen; ch < STATE_CHANNELS; ch++) {
    grid.data[base + ch] = 1.0;
  }
  return grid;
}

/** Alive test: 3x3 neighborhood max of alpha strictly above the threshold.
 * The comparison happens in float32 like the reference engine's, so a
 * stored alpha of exactly float32(0.1) counts as dead at threshold 0.1. */
export function aliveFromAlpha(grid: Grid, threshold: number): Uint8Array {
  const thr = Math.fround(threshold);
  const { height: h, width: w, channels: c, data } = grid;
  const out = new Uint8Array(h * w);
  for (let r = 0; r < h; r++) {
    for (let col = 0; col < w; col++) {
      let best = 0.0;
      for (let dr = -1; dr <= 1; dr++) {
        const rr = r + dr;
        if (rr < 0 || rr >= h) continue;
        for (let dc = -1; dc <= 1; dc++) {
          const cc = col + dc;
          if (cc < 0 || cc >= w) continue;
          const a = data[(rr * w + cc) * c + 3];
          if (a > best) best = a;
        }
      }
      out[r * w + col] = best > thr ? 1 : 0;
    }
  }
  return out;
}

/**
 * Perception vectors for every cell: identity, sobel-x, sobel-y stacked
 * along the channel axis. Output is (h, w, 3c) row-major. Accumulation
 * runs through the float32 buffer in kernel order so results agree with
 * the reference convolution bit for bit.
 */
export function perceive(grid: Grid): Float32Array {
  const { height: h, width: w, channels: c, data } = grid;
  const out = new Float32Array(h * w * 3 * c);
  for (let r = 0; r < h; r++) {
    for (let col = 0; col < w; col++) {
      const dst = (r * w + col) * 3 * c;
      const src = (r * w + col) * c;
      for (let ch = 0; ch < c; ch++) {
        out[dst + ch] = data[src + ch];
      }
      for (let u = 0; u < 3; u++) {
        const rr = r + u - 1;
        if (rr < 0 || rr >= h) continue;
        for (let v = 0; v < 3; v++) {
          const cc = col + v - 1;
          if (cc < 0 || cc >= w) continue;
          const kx = SOBEL_X[u][v];
          const ky = SOBEL_Y[u][v];
          const nb = (rr * w + cc) * c;
          for (let ch = 0; ch < c; ch++) {
            const val = data[nb + ch];
            if (kx !== 0) out[dst + c + ch] += kx * val;
            if (ky !== 0) out[dst + 2 * c + ch] += ky * val;
          }
        }
      }
    }
  }
  return out;
}

/**
 * One update with an explicit per-cell fire mask (h*w entries of 0/1).
 * Returns a fresh grid; the input is left untouched.
 */
export function stepGrid(
  grid: Grid,
  params: ModelParams,
  fire: Float32Array,
  aliveThreshold: number,
): Grid {
  const { height: h, width: w, channels: c } = grid;
  if (3 * c !== params.perceptionSize) {
    throw new Error(`grid has ${c} channels but params expect ${params.perceptionSize / 3}`);
  }
  const hid = params.hiddenSize;
  const p = perceive(grid);
  const preAlive = aliveFromAlpha(grid, aliveThreshold);

  const out = cloneGrid(grid);
  const hiddenBuf = new Float64Array(hid);
  for (let cell = 0; cell < h * w; cell++) {
    const pOff = cell * 3 * c;
    for (let j = 0; j < hid; j++) {
      let z = params.b1[j];
      for (let k = 0; k < 3 * c; k++) {
        z += p[pOff + k] * params.w1[k * hid + j];
      }
      hiddenBuf[j] = z > 0 ? z : 0;
    }
    const sOff = cell * c;
    const f = fire[cell];
    for (let ch = 0; ch < STATE_CHANNELS; ch++) {
      let d = params.b2[ch];
      for (let j = 0; j < hid; j++) {
        d += hiddenBuf[j] * params.w2[j * STATE_CHANNELS + ch];
      }
      out.data[sOff + ch] = grid.data[sOff + ch] + f * Math.fround(d);
    }
  }

  const postAlive = aliveFromAlpha(out, aliveThreshold);
  for (let cell = 0; cell < h * w; cell++) {
    if (preAlive[cell] && postAlive[cell]) continue;
    const sOff = cell * c;
    for (let ch = 0; ch < STATE_CHANNELS; ch++) {
      out.data[sOff + ch] = 0.0;
    }
  }
  return out;
}

/** Zero the environment channel everywhere (no-op on 16-channel grids). */
export function clearEnv(grid: Grid): void {
  if (grid.channels <= ENV_CHANNEL) return;
  const { height: h, width: w, channels: c, data } = grid;
  for (let cell = 0; cell < h * w; cell++) {
    data[cell * c + ENV_CHANNEL] = 0.0;
  }
}

/** Set the environment channel to 1 at one cell; lasts for a single step. */
export function injectSignal(grid: Grid, row: number, col: number): void {
  if (grid.channels <= ENV_CHANNEL) {
    throw new Error("grid has no environment channel");
  }
  if (row < 0 || row >= grid.height || col < 0 || col >= grid.width) {
    throw new Error(`signal position (${row}, ${col}) outside grid`);
  }
  grid.data[(row * grid.width + col) * grid.channels + ENV_CHANNEL] = 1.0;
}

/** Zero every channel (environment included) inside a circle. */
export function applyCircleDamage(grid: Grid, row: number, col: number, radius: number): void {
  const { height: h, width: w, channels: c, data } = grid;
  const r2 = radius * radius;
  for (let r = 0; r < h; r++) {
    for (let cc = 0; cc < w; cc++) {
      const dr = r - row;
      const dc = cc - col;
      if (dr * dr + dc * dc <= r2) {
        data.fill(0.0, (r * w + cc) * c, (r * w + cc) * c + c);
      }
    }
  }
}
