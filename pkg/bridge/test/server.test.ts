import net from "node:net";
import { once } from "node:events";

import { afterEach, describe, expect, it } from "vitest";

import { serveTcp } from "../src/server.js";
import { StubBackend } from "../src/stub.js";
import { MlmBackend, WordScores } from "../src/protocol.js";

let server: net.Server | null = null;

afterEach(() => {
  server?.close();
  server = null;
});

async function startServer(backend: MlmBackend = new StubBackend()): Promise<number> {
  server = serveTcp(backend, "127.0.0.1", 0);
  await once(server, "listening");
  return (server.address() as net.AddressInfo).port;
}

function collectLines(socket: net.Socket, count: number): Promise<string[]> {
  return new Promise((resolve, reject) => {
    let buffer = "";
    const lines: string[] = [];
    socket.on("data", (chunk) => {
      buffer += chunk.toString("utf-8");
      for (;;) {
        const idx = buffer.indexOf("\n");
        if (idx === -1) break;
        lines.push(buffer.slice(0, idx));
        buffer = buffer.slice(idx + 1);
        if (lines.length === count) resolve(lines);
      }
    });
    socket.on("error", reject);
  });
}

/** Backend whose first request resolves slower than later ones. */
class SlowFirstBackend implements MlmBackend {
  name = "slow-first";
  private calls = 0;

  async scoreAnswer(_p: string, _q: string, answer: string): Promise<WordScores> {
    const call = this.calls++;
    if (call === 0) await new Promise((r) => setTimeout(r, 120));
    const words = answer.trim().split(/\s+/);
    return { words, wordLogliks: words.map(() => -1.0) };
  }

  async embed(): Promise<number[][]> {
    return [[1]];
  }
}

describe("tcp server", () => {
  it("answers pipelined requests strictly in order", async () => {
    const port = await startServer(new SlowFirstBackend());
    const socket = net.connect(port, "127.0.0.1");
    await once(socket, "connect");
    const pending = collectLines(socket, 3);
    const requests = ["a", "b", "c"]
      .map((id) => JSON.stringify({ id, passage: "p", question: "q", answer: "w" }))
      .join("\n");
    socket.write(requests + "\n");
    const responses = (await pending).map((line) => JSON.parse(line));
    expect(responses.map((r) => r.id)).toEqual(["a", "b", "c"]);
    socket.destroy();
  });

  it("serves scoring and embedding over one connection", async () => {
    const port = await startServer();
    const socket = net.connect(port, "127.0.0.1");
    await once(socket, "connect");
    const pending = collectLines(socket, 2);
    socket.write(
      JSON.stringify({ id: "s", passage: "p", question: "q", answer: "old mill" }) + "\n" +
        JSON.stringify({ id: "e", mode: "embed", text: "one two three" }) + "\n",
    );
    const [score, embed] = (await pending).map((line) => JSON.parse(line));
    expect(score.id).toBe("s");
    expect(score.words).toEqual(["old", "mill"]);
    expect(embed.id).toBe("e");
    expect(embed.vectors).toHaveLength(3);
    socket.destroy();
  });

  it("answers garbage with bad-request and keeps serving", async () => {
    const port = await startServer();
    const socket = net.connect(port, "127.0.0.1");
    await once(socket, "connect");
    const pending = collectLines(socket, 2);
    socket.write("garbage!!!\n" + JSON.stringify({ id: "ok", passage: "p", question: "q", answer: "w" }) + "\n");
    const [bad, good] = (await pending).map((line) => JSON.parse(line));
    expect(bad).toEqual({ id: null, error: "bad-request" });
    expect(good.id).toBe("ok");
    socket.destroy();
  });

  it("isolates concurrent connections", async () => {
    const port = await startServer();
    const sockets = [net.connect(port, "127.0.0.1"), net.connect(port, "127.0.0.1")];
    await Promise.all(sockets.map((s) => once(s, "connect")));
    const pendings = sockets.map((s) => collectLines(s, 1));
    sockets[0].write(JSON.stringify({ id: "c0", passage: "p", question: "q", answer: "x" }) + "\n");
    sockets[1].write(JSON.stringify({ id: "c1", passage: "p", question: "q", answer: "y" }) + "\n");
    const [r0] = (await pendings[0]).map((line) => JSON.parse(line));
    const [r1] = (await pendings[1]).map((line) => JSON.parse(line));
    expect(r0.id).toBe("c0");
    expect(r1.id).toBe("c1");
    sockets.forEach((s) => s.destroy());
  });
});
