/**
 * Simplifier server speaking newline-delimited JSON on stdio.
 *
 * Requests:  {"id": string, "source": string}
 * Responses: {"id": string, "simplification": string}
 *            {"id": string, "error": string} for malformed requests
 *
 * Responses may be emitted in any order; every id is answered exactly once.
 * --echo answers with the source stripped of leading control tokens, which
 * makes the server compose with evaluation into an identity baseline. Any
 * other model is loaded from $PARAMINE_MODEL_DIR/<identifier>.mjs exporting
 *   simplify(source: string): Promise<string> | string
 */

import path from "node:path";
import readline from "node:readline";
import { pathToFileURL } from "node:url";

const CONTROL_TOKENS =
  /^(?:<(?:NumChars|LevSim|WordFreq|DepTreeDepth)_\d+%> )+/;

export function stripControlTokens(source: string): string {
  return source.replace(CONTROL_TOKENS, "");
}

type Simplify = (source: string) => Promise<string> | string;

async function loadModel(identifier: string): Promise<Simplify> {
  if (identifier === "echo") return (source) => stripControlTokens(source);
  const modelDir = process.env.PARAMINE_MODEL_DIR;
  if (!modelDir) {
    throw new Error(
      `unknown model ${JSON.stringify(identifier)} and PARAMINE_MODEL_DIR is unset`
    );
  }
  const modulePath = path.join(modelDir, `${identifier}.mjs`);
  const mod = await import(pathToFileURL(modulePath).href);
  if (typeof mod.simplify !== "function") {
    throw new Error(`model module ${modulePath} does not export simplify()`);
  }
  return mod.simplify as Simplify;
}

function parseModelArg(argv: string[]): string {
  let model = "";
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--echo") model = "echo";
    else if (a === "--model" || a === "-m") model = argv[i + 1] ?? "";
  }
  if (!model) throw new Error("pass --echo or --model <identifier>");
  return model;
}

async function run(): Promise<void> {
  const simplify = await loadModel(parseModelArg(process.argv.slice(2)));
  const rl = readline.createInterface({ input: process.stdin, terminal: false });
  const pending: Promise<void>[] = [];
  rl.on("line", (line) => {
    if (!line.trim()) return;
    pending.push(handle(line, simplify));
  });
  await new Promise<void>((resolve) => rl.on("close", resolve));
  await Promise.all(pending);
}

async function handle(line: string, simplify: Simplify): Promise<void> {
  let id = "";
  try {
    const req = JSON.parse(line);
    id = typeof req.id === "string" ? req.id : String(req.id ?? "");
    if (typeof req.source !== "string") throw new Error("missing source field");
    const simplification = await simplify(req.source);
    emit({ id, simplification });
  } catch (err) {
    emit({ id, error: (err as Error).message });
  }
}

function emit(obj: object): void {
  process.stdout.write(JSON.stringify(obj) + "\n");
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
