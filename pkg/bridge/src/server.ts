/**
 * NDJSON server over TCP or stdio. One worker per connection, strict FIFO:
 * responses are written in request order even when the backend resolves
 * out of order, which is what lets clients pipeline safely.
 */

import net from "node:net";
import { Readable, Writable } from "node:stream";

import { MlmBackend, createLineSplitter, handleRequestLine } from "./protocol.js";

export function attach(backend: MlmBackend, input: Readable, output: Writable): Promise<void> {
  let pipeline: Promise<void> = Promise.resolve();
  const splitter = createLineSplitter((line) => {
    pipeline = pipeline.then(async () => {
      const response = await handleRequestLine(backend, line);
      if (output.writable) output.write(response);
    });
  });
  return new Promise((resolve) => {
    input.setEncoding("utf-8");
    input.on("data", (chunk: string) => splitter.push(chunk));
    input.on("end", () => {
      splitter.flush();
      pipeline.then(() => resolve());
    });
    input.on("error", () => resolve());
  });
}

export function serveTcp(backend: MlmBackend, host: string, port: number): net.Server {
  const server = net.createServer((connection) => {
    connection.on("error", () => connection.destroy());
    attach(backend, connection, connection).then(() => connection.end());
  });
  server.listen(port, host);
  return server;
}

export async function serveStdio(backend: MlmBackend): Promise<void> {
  await attach(backend, process.stdin, process.stdout);
}
