import { describe, expect, it } from "vitest";
import { SplitMix64, fireMaskFromSeed } from "../src/rng.js";

describe("SplitMix64", () => {
  it("matches the published reference sequence for seed 0", () => {
    const rng = new SplitMix64(0);
    expect(rng.nextU64()).toBe(0xe220a8397b1dcdafn);
    expect(rng.nextU64()).toBe(0x6e789e6aa1b965f4n);
    expect(rng.nextU64()).toBe(0x06c45d188009454fn);
  });

  it("produces floats in [0, 1)", () => {
    const rng = new SplitMix64(12345);
    for (let i = 0; i < 1000; i++) {
      const f = rng.nextFloat();
      expect(f).toBeGreaterThanOrEqual(0);
      expect(f).toBeLessThan(1);
    }
  });

  it("is deterministic for equal seeds", () => {
    const a = new SplitMix64(99);
    const b = new SplitMix64(99n);
    for (let i = 0; i < 20; i++) {
      expect(a.nextU64()).toBe(b.nextU64());
    }
  });
});

describe("fireMaskFromSeed", () => {
  it("fills row-major with one draw per cell", () => {
    // The mask must consume draws in scan order: cell (r, c) uses draw
    // index r*width + c. Verified by comparing against a manual replay.
    const mask = fireMaskFromSeed(42, 3, 5, 0.5);
    const rng = new SplitMix64(42);
    for (let i = 0; i < 15; i++) {
      expect(mask[i]).toBe(rng.nextFloat() < 0.5 ? 1 : 0);
    }
  });

  it("is all ones at rate 1 and all zeros at rate 0", () => {
    expect(Array.from(fireMaskFromSeed(7, 4, 4, 1.0))).toEqual(new Array(16).fill(1));
    expect(Array.from(fireMaskFromSeed(7, 4, 4, 0.0))).toEqual(new Array(16).fill(0));
  });

  it("hits the requested rate on average", () => {
    const mask = fireMaskFromSeed(2024, 100, 100, 0.5);
    let fired = 0;
    for (let i = 0; i < mask.length; i++) fired += mask[i];
    expect(fired / mask.length).toBeGreaterThan(0.48);
    expect(fired / mask.length).toBeLessThan(0.52);
  });
});
