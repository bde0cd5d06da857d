/**
 * Embedding store binary format shared with the mining pipeline.
 *
 * Layout (little-endian): magic "PMEB0001", u32 row count, u32 dimension,
 * u8 dtype (0 = f32, 1 = u8-quantized), 3 zero pad bytes, null-terminated
 * UTF-8 ids, then (for dtype 1) per-dimension f32 min/max bounds, then the
 * row-major payload.
 */

export const MAGIC = "PMEB0001";
export const DTYPE_F32 = 0;
export const DTYPE_U8 = 1;

export interface EmbeddingStore {
  ids: string[];
  dim: number;
  dtype: number;
  /** f32 rows (dtype 0) or u8 codes (dtype 1), row-major. */
  data: Float32Array | Uint8Array;
  mins?: Float32Array;
  maxs?: Float32Array;
}

export class FormatError extends Error {}

export function writeStore(store: EmbeddingStore): Buffer {
  const n = store.ids.length;
  const d = store.dim;
  const expected = n * d;
  if (store.data.length !== expected) {
    throw new FormatError(`payload holds ${store.data.length} values, expected ${expected}`);
  }
  const idBufs = store.ids.map((id) => {
    const raw = Buffer.from(id, "utf-8");
    if (raw.includes(0)) throw new FormatError(`id ${JSON.stringify(id)} contains NUL`);
    return Buffer.concat([raw, Buffer.from([0])]);
  });

  const header = Buffer.alloc(8 + 4 + 4 + 1 + 3);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(n, 8);
  header.writeUInt32LE(d, 12);
  header.writeUInt8(store.dtype, 16);

  const parts: Buffer[] = [header, ...idBufs];
  if (store.dtype === DTYPE_U8) {
    if (!store.mins || !store.maxs) throw new FormatError("quantized store needs bounds");
    parts.push(f32buf(store.mins), f32buf(store.maxs));
    parts.push(Buffer.from(store.data as Uint8Array));
  } else {
    parts.push(f32buf(store.data as Float32Array));
  }
  return Buffer.concat(parts);
}

function f32buf(arr: Float32Array | ArrayLike<number>): Buffer {
  const out = Buffer.alloc(arr.length * 4);
  for (let i = 0; i < arr.length; i++) out.writeFloatLE(arr[i] as number, i * 4);
  return out;
}

export function readStore(buf: Buffer): EmbeddingStore {
  if (buf.length < 20) throw new FormatError("truncated header");
  const magic = buf.toString("ascii", 0, 8);
  if (magic !== MAGIC) throw new FormatError(`bad magic ${JSON.stringify(magic)}`);
  const n = buf.readUInt32LE(8);
  const d = buf.readUInt32LE(12);
  const dtype = buf.readUInt8(16);
  if (dtype !== DTYPE_F32 && dtype !== DTYPE_U8) throw new FormatError(`unknown dtype ${dtype}`);

  let offset = 20;
  const ids: string[] = [];
  for (let i = 0; i < n; i++) {
    const end = buf.indexOf(0, offset);
    if (end < 0) throw new FormatError("truncated id table");
    ids.push(buf.toString("utf-8", offset, end));
    offset = end + 1;
  }

  let mins: Float32Array | undefined;
  let maxs: Float32Array | undefined;
  if (dtype === DTYPE_U8) {
    mins = readF32(buf, offset, d);
    offset += 4 * d;
    maxs = readF32(buf, offset, d);
    offset += 4 * d;
    if (buf.length - offset < n * d) throw new FormatError("truncated payload");
    const data = new Uint8Array(buf.subarray(offset, offset + n * d));
    return { ids, dim: d, dtype, data, mins, maxs };
  }
  if (buf.length - offset < 4 * n * d) throw new FormatError("truncated payload");
  const data = readF32(buf, offset, n * d);
  return { ids, dim: d, dtype, data };
}

function readF32(buf: Buffer, offset: number, count: number): Float32Array {
  if (buf.length - offset < 4 * count) throw new FormatError("truncated f32 block");
  const out = new Float32Array(count);
  for (let i = 0; i < count; i++) out[i] = buf.readFloatLE(offset + i * 4);
  return out;
}

/** Header sanity check without materializing the payload. */
export function validateHeader(buf: Buffer): { n: number; d: number; dtype: number } {
  if (buf.length < 20) throw new FormatError("truncated header");
  if (buf.toString("ascii", 0, 8) !== MAGIC) throw new FormatError("bad magic");
  const n = buf.readUInt32LE(8);
  const d = buf.readUInt32LE(12);
  const dtype = buf.readUInt8(16);
  if (dtype !== DTYPE_F32 && dtype !== DTYPE_U8) throw new FormatError(`unknown dtype ${dtype}`);
  if (buf.readUInt8(17) !== 0 || buf.readUInt8(18) !== 0 || buf.readUInt8(19) !== 0) {
    throw new FormatError("nonzero padding");
  }
  return { n, d, dtype };
}
