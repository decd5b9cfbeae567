/**
 * Bridge entry point.
 *
 *   node dist/main.js --model stub --addr 127.0.0.1:8765   # TCP
 *   node dist/main.js --model stub --stdio                 # stdio pipe
 *   node dist/main.js --model roberta-base --addr ...      # real model
 *
 * Any --model other than "stub" is loaded through transformers.js, which
 * must be installed separately (npm install @huggingface/transformers).
 */

import { MlmBackend } from "./protocol.js";
import { serveStdio, serveTcp } from "./server.js";
import { StubBackend } from "./stub.js";

interface Args {
  model: string;
  addr: string | null;
  stdio: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = { model: "stub", addr: null, stdio: false };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    if (arg === "--model") args.model = argv[++i] ?? args.model;
    else if (arg === "--addr") args.addr = argv[++i] ?? null;
    else if (arg === "--stdio") args.stdio = true;
    else {
      process.stderr.write(`unknown argument: ${arg}\n`);
      process.exit(1);
    }
  }
  if (!args.stdio && args.addr === null) args.stdio = true;
  return args;
}

async function loadBackend(model: string): Promise<MlmBackend> {
  if (model === "stub") return new StubBackend();
  try {
    const { RobertaBackend } = await import("./roberta.js");
    return await RobertaBackend.load(model);
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    process.stderr.write(
      `cannot load model ${model}: ${message}\n` +
        `(real models need: npm install @huggingface/transformers, plus weight access)\n`,
    );
    process.exit(2);
  }
}

async function main(): Promise<void> {
  const args = parseArgs(process.argv.slice(2));
  const backend = await loadBackend(args.model);
  if (args.stdio) {
    await serveStdio(backend);
    return;
  }
  const [host, portText] = (args.addr as string).split(":");
  const port = Number(portText);
  if (!host || !Number.isInteger(port)) {
    process.stderr.write(`--addr must be host:port, got ${args.addr}\n`);
    process.exit(1);
  }
  const server = serveTcp(backend, host, port);
  server.on("listening", () => {
    process.stderr.write(`bridge (${backend.name}) listening on ${host}:${port}\n`);
  });
}

main();
