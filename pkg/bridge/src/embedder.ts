/**
 * Sentence embedding backends.
 *
 * "hash-v1/<dim>" is the built-in deterministic encoder: character trigrams
 * feature-hashed into <dim> buckets with FNV-1a, L2-normalized. It needs no
 * weights, so the pipeline can be exercised anywhere; identical lines embed
 * to identical rows.
 *
 * Any other identifier is resolved to a user module
 * $PARAMINE_MODEL_DIR/<identifier>.mjs exporting
 *   embedBatch(lines: string[]): Promise<number[][]> | number[][]
 * which is where a real encoder (ONNX, tfjs, a remote service) plugs in.
 */

import path from "node:path";
import { pathToFileURL } from "node:url";

export type EmbedBatch = (lines: string[]) => Promise<number[][]> | number[][];

const FNV_OFFSET = 0x811c9dc5;
const FNV_PRIME = 0x01000193;

function fnv1a(text: string): number {
  let hash = FNV_OFFSET;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, FNV_PRIME) >>> 0;
  }
  return hash >>> 0;
}

export function hashEmbed(line: string, dim: number): Float32Array {
  const vec = new Float32Array(dim);
  const padded = `  ${line.toLowerCase()}  `;
  for (let i = 0; i + 3 <= padded.length; i++) {
    const h = fnv1a(padded.slice(i, i + 3));
    const bucket = h % dim;
    const sign = (h >>> 31) === 0 ? 1 : -1;
    vec[bucket] += sign;
  }
  let norm = 0;
  for (let i = 0; i < dim; i++) norm += vec[i] * vec[i];
  norm = Math.sqrt(norm);
  if (norm > 0) for (let i = 0; i < dim; i++) vec[i] /= norm;
  return vec;
}

const HASH_RE = /^hash-v1\/(\d+)$/;

export async function loadEmbedder(identifier: string): Promise<{ dim: number | null; embedBatch: EmbedBatch }> {
  const hashMatch = HASH_RE.exec(identifier);
  if (hashMatch) {
    const dim = parseInt(hashMatch[1], 10);
    if (!(dim >= 1)) throw new Error(`bad hash embedder dimension in ${identifier}`);
    return {
      dim,
      embedBatch: (lines) => lines.map((l) => Array.from(hashEmbed(l, dim))),
    };
  }
  const modelDir = process.env.PARAMINE_MODEL_DIR;
  if (!modelDir) {
    throw new Error(
      `unknown model ${JSON.stringify(identifier)}: not a hash-v1/<dim> identifier and PARAMINE_MODEL_DIR is unset`
    );
  }
  const modulePath = path.join(modelDir, `${identifier}.mjs`);
  let mod;
  try {
    mod = await import(pathToFileURL(modulePath).href);
  } catch (err) {
    throw new Error(`failed to load model module ${modulePath}: ${(err as Error).message}`);
  }
  if (typeof mod.embedBatch !== "function") {
    throw new Error(`model module ${modulePath} does not export embedBatch()`);
  }
  return { dim: null, embedBatch: mod.embedBatch as EmbedBatch };
}
