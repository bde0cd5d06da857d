/**
 * Embed a text file, one row per line, into the pipeline's binary store.
 *
 * Usage: node dist/embed-cli.js input.txt --output out.pmeb
 *          [--model hash-v1/64] [--batch-size 32] [--no-normalize]
 *
 * Row ids are line numbers ("0", "1", ...); output dtype is f32.
 */

import fs from "node:fs";
import { pathToFileURL } from "node:url";
import { loadEmbedder } from "./embedder.js";
import { DTYPE_F32, writeStore } from "./pmeb.js";

interface Args {
  input: string;
  output: string;
  model: string;
  batchSize: number;
  normalize: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    input: "",
    output: "",
    model: "hash-v1/64",
    batchSize: 32,
    normalize: true,
  };
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--output" || a === "-o") args.output = argv[++i] ?? "";
    else if (a === "--model" || a === "-m") args.model = argv[++i] ?? "";
    else if (a === "--batch-size") args.batchSize = parseInt(argv[++i] ?? "", 10);
    else if (a === "--no-normalize") args.normalize = false;
    else if (a === "--normalize") args.normalize = true;
    else if (!a.startsWith("-") && !args.input) args.input = a;
    else throw new Error(`unknown argument ${a}`);
  }
  if (!args.input || !args.output) throw new Error("need an input file and --output");
  if (!(args.batchSize >= 1)) throw new Error("--batch-size must be >= 1");
  return args;
}

async function run(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const lines = fs.readFileSync(args.input, "utf-8").split("\n");
  if (lines.length && lines[lines.length - 1] === "") lines.pop();

  const { embedBatch } = await loadEmbedder(args.model);

  const rows: number[][] = [];
  for (let start = 0; start < lines.length; start += args.batchSize) {
    const batch = lines.slice(start, start + args.batchSize);
    const embedded = await embedBatch(batch);
    if (embedded.length !== batch.length) {
      throw new Error(`model returned ${embedded.length} rows for ${batch.length} inputs`);
    }
    rows.push(...embedded);
  }

  const dim = rows.length > 0 ? rows[0].length : 0;
  const data = new Float32Array(rows.length * dim);
  for (let r = 0; r < rows.length; r++) {
    if (rows[r].length !== dim) throw new Error("model returned ragged rows");
    let norm = 0;
    for (const v of rows[r]) norm += v * v;
    norm = Math.sqrt(norm);
    const scale = args.normalize && norm > 0 ? 1 / norm : 1;
    for (let c = 0; c < dim; c++) data[r * dim + c] = rows[r][c] * scale;
  }

  const store = {
    ids: lines.map((_, i) => String(i)),
    dim,
    dtype: DTYPE_F32,
    data,
  };
  fs.writeFileSync(args.output, writeStore(store));
  process.stderr.write(`embedded ${lines.length} lines at dim ${dim} -> ${args.output}\n`);
}

const isMain =
  process.argv[1] !== undefined &&
  pathToFileURL(process.argv[1]).href === import.meta.url;

if (isMain) {
  run().catch((err: Error) => {
    process.stderr.write(`error: ${err.message}\n`);
    process.exit(1);
  });
}
