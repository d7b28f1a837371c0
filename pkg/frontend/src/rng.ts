// Deterministic counter RNG shared with the training side. The fire mask
// for every step is derived from a 64-bit seed with splitmix64, so the
// viewer can replay a rollout bit-for-bit given the same seeds.

const MASK64 = (1n << 64n) - 1n;
const GAMMA = 0x9e3779b97f4a7c15n;
const MIX1 = 0xbf58476d1ce4e5b9n;
const MIX2 = 0x94d049bb133111ebn;

const FLOAT_SCALE = Math.pow(2, -53);

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint | number) {
    this.state = BigInt(seed) & MASK64;
  }

  nextU64(): bigint {
    this.state = (this.state + GAMMA) & MASK64;
    let z = this.state;
    z = ((z ^ (z >> 30n)) * MIX1) & MASK64;
    z = ((z ^ (z >> 27n)) * MIX2) & MASK64;
    z = z ^ (z >> 31n);
    return z;
  }

  nextFloat(): number {
    // Top 53 bits give a uniform double in [0, 1).
    return Number(this.nextU64() >> 11n) * FLOAT_SCALE;
  }
}

/** Per-cell fire mask for one update step, row-major, one draw per cell. */
export function fireMaskFromSeed(
  seed: bigint | number,
  height: number,
  width: number,
  fireRate: number,
): Float32Array {
  const rng = new SplitMix64(seed);
  const mask = new Float32Array(height * width);
  for (let i = 0; i < mask.length; i++) {
    mask[i] = rng.nextFloat() < fireRate ? 1.0 : 0.0;
  }
  return mask;
}
