// Pixel generation for the canvas view. Kept separate from the DOM so the
// compositing rules can be unit tested: channels are clamped to [0, 1],
// colors are premultiplied by alpha, and everything is drawn over a gray
// checkerboard so transparent regions are visible.

import { Grid } from "./engine.js";

const CHECKER_LIGHT = 230;
const CHECKER_DARK = 204;
const CHECKER_PERIOD = 4; // cells per checker square

function clamp01(v: number): number {
  if (v < 0) return 0;
  if (v > 1) return 1;
  return v;
}

export function checkerValue(row: number, col: number): number {
  const parity =
    (Math.floor(row / CHECKER_PERIOD) + Math.floor(col / CHECKER_PERIOD)) % 2;
  return parity === 0 ? CHECKER_LIGHT : CHECKER_DARK;
}

/**
 * RGBA bytes (h*w*4) of the organism composited over the checkerboard.
 * State colors are premultiplied, so: out = rgb + bg * (1 - alpha).
 */
export function compositeBytes(grid: Grid): Uint8ClampedArray {
  const { height: h, width: w, channels: c, data } = grid;
  const out = new Uint8ClampedArray(h * w * 4);
  for (let r = 0; r < h; r++) {
    for (let col = 0; col < w; col++) {
      const src = (r * w + col) * c;
      const dst = (r * w + col) * 4;
      const a = clamp01(data[src + 3]);
      const bg = checkerValue(r, col) * (1 - a);
      out[dst] = clamp01(data[src]) * 255 + bg;
      out[dst + 1] = clamp01(data[src + 1]) * 255 + bg;
      out[dst + 2] = clamp01(data[src + 2]) * 255 + bg;
      out[dst + 3] = 255;
    }
  }
  return out;
}

/** Grayscale RGBA bytes of a single channel, clamped to [0, 1]. */
export function channelBytes(grid: Grid, channel: number): Uint8ClampedArray {
  if (channel < 0 || channel >= grid.channels) {
    throw new Error(`channel ${channel} out of range (grid has ${grid.channels})`);
  }
  const { height: h, width: w, channels: c, data } = grid;
  const out = new Uint8ClampedArray(h * w * 4);
  for (let cell = 0; cell < h * w; cell++) {
    const v = clamp01(data[cell * c + channel]) * 255;
    out[cell * 4] = v;
    out[cell * 4 + 1] = v;
    out[cell * 4 + 2] = v;
    out[cell * 4 + 3] = 255;
  }
  return out;
}
