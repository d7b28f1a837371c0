// Parser for .nca.json checkpoint files.
//
// Weights are stored as base64 little-endian float32 in C order and the
// whole blob (w1+b1+w2+b2) is covered by a CRC-32 checksum, so we can
// tell apart "file is garbage" from "file got corrupted in transit".

export const FORMAT_VERSION = 1;
export const STATE_CHANNELS = 16;
export const ENV_CHANNEL = 16;

export class CheckpointError extends Error {}
export class CheckpointFormatError extends CheckpointError {}
export class CheckpointVersionError extends CheckpointError {}
export class CheckpointChecksumError extends CheckpointError {}
export class CheckpointShapeError extends CheckpointError {}

export interface GridConfig {
  height: number;
  width: number;
  channels: number;
  envEnabled: boolean;
  genomeLen: number;
  aliveThreshold: number;
}

export interface ModelParams {
  w1: Float32Array; // (3*channels, hidden) row-major
  b1: Float32Array; // (hidden,)
  w2: Float32Array; // (hidden, 16) row-major
  b2: Float32Array; // (16,)
  hiddenSize: number;
  perceptionSize: number;
}

export interface Checkpoint {
  grid: GridConfig;
  params: ModelParams;
  metadata: Record<string, unknown>;
  version: number;
}

const CRC_TABLE = buildCrcTable();

function buildCrcTable(): Uint32Array {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
}

export function crc32(bytes: Uint8Array, seed = 0): number {
  let c = (seed ^ 0xffffffff) >>> 0;
  for (let i = 0; i < bytes.length; i++) {
    c = CRC_TABLE[(c ^ bytes[i]) & 0xff] ^ (c >>> 8);
  }
  return (c ^ 0xffffffff) >>> 0;
}

function base64ToBytes(b64: string, name: string): Uint8Array {
  let binary: string;
  try {
    binary = atob(b64);
  } catch (exc) {
    throw new CheckpointFormatError(`weight ${name} is not valid base64: ${exc}`);
  }
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}

export function decodeF32(b64: string, count: number, name: string): Float32Array {
  const bytes = base64ToBytes(b64, name);
  if (bytes.length !== count * 4) {
    throw new CheckpointShapeError(
      `weight ${name}: got ${bytes.length} bytes, expected ${count * 4}`,
    );
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    out[i] = view.getFloat32(i * 4, true);
  }
  return out;
}

function f32Bytes(arr: Float32Array): Uint8Array {
  const bytes = new Uint8Array(arr.length * 4);
  const view = new DataView(bytes.buffer);
  for (let i = 0; i < arr.length; i++) {
    view.setFloat32(i * 4, arr[i], true);
  }
  return bytes;
}

export function checksumOf(params: ModelParams): number {
  let c = 0;
  for (const arr of [params.w1, params.b1, params.w2, params.b2]) {
    c = crc32(f32Bytes(arr), c);
  }
  return c;
}

function requireField(obj: Record<string, unknown>, key: string): unknown {
  if (!(key in obj)) {
    throw new CheckpointFormatError(`checkpoint missing field '${key}'`);
  }
  return obj[key];
}

export function parseCheckpoint(text: string): Checkpoint {
  let obj: Record<string, unknown>;
  try {
    obj = JSON.parse(text);
  } catch (exc) {
    throw new CheckpointFormatError(`cannot parse checkpoint: ${exc}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new CheckpointFormatError("checkpoint is not a JSON object");
  }

  for (const key of ["version", "grid", "hidden_size", "weights", "checksum"]) {
    requireField(obj, key);
  }
  const version = obj["version"];
  if (version !== FORMAT_VERSION) {
    throw new CheckpointVersionError(
      `unsupported checkpoint version ${version} (expected ${FORMAT_VERSION})`,
    );
  }

  const g = obj["grid"] as Record<string, unknown>;
  for (const key of ["height", "width", "channels", "env_enabled", "genome_len", "alive_threshold"]) {
    if (!(key in g)) {
      throw new CheckpointFormatError(`bad grid config: missing '${key}'`);
    }
  }
  const grid: GridConfig = {
    height: g["height"] as number,
    width: g["width"] as number,
    channels: g["channels"] as number,
    envEnabled: g["env_enabled"] as boolean,
    genomeLen: g["genome_len"] as number,
    aliveThreshold: g["alive_threshold"] as number,
  };
  if (grid.height < 3 || grid.width < 3 || grid.genomeLen < 0) {
    throw new CheckpointFormatError("bad grid config: degenerate dimensions");
  }
  const expectChannels = grid.envEnabled ? STATE_CHANNELS + 1 : STATE_CHANNELS;
  if (grid.channels !== expectChannels) {
    throw new CheckpointShapeError(
      `grid channels field ${grid.channels} inconsistent with env_enabled=${grid.envEnabled}`,
    );
  }
  if (grid.genomeLen > 11) {
    throw new CheckpointFormatError(`genome_len ${grid.genomeLen} leaves no hidden channels`);
  }

  const hidden = obj["hidden_size"] as number;
  const perception = 3 * grid.channels;
  const w = obj["weights"] as Record<string, string>;
  for (const key of ["w1", "b1", "w2", "b2"]) {
    if (!(key in w)) {
      throw new CheckpointFormatError(`checkpoint missing weight '${key}'`);
    }
  }
  const params: ModelParams = {
    w1: decodeF32(w["w1"], perception * hidden, "w1"),
    b1: decodeF32(w["b1"], hidden, "b1"),
    w2: decodeF32(w["w2"], hidden * STATE_CHANNELS, "w2"),
    b2: decodeF32(w["b2"], STATE_CHANNELS, "b2"),
    hiddenSize: hidden,
    perceptionSize: perception,
  };

  const actual = checksumOf(params);
  if (actual !== obj["checksum"]) {
    throw new CheckpointChecksumError(
      `weight checksum mismatch: file says ${obj["checksum"]}, computed ${actual}`,
    );
  }
  return {
    grid,
    params,
    metadata: (obj["metadata"] as Record<string, unknown>) ?? {},
    version: FORMAT_VERSION,
  };
}
