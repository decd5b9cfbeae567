/**
 * Deterministic stand-in backend for protocol work and tests.
 *
 * Word log-likelihoods and embedding components derive from SHA-256 of the
 * same passage/question/masked-answer layout a real model would see, using
 * only exactly-rounded float arithmetic (no transcendentals), so output
 * bytes are reproducible across platforms and Node versions.
 */

import { createHash } from "node:crypto";

import { MlmBackend, WordScores } from "./protocol.js";

const EOS = "<eos>";
const MASK = "<mask>";

const hashU32 = (text: string): number =>
  createHash("sha256").update(text, "utf8").digest().readUInt32BE(0);

export class StubBackend implements MlmBackend {
  readonly name: string;
  private readonly seed: number;
  private readonly dim: number;

  constructor(seed = 0, dim = 8) {
    this.seed = seed;
    this.dim = dim;
    this.name = `stub(seed=${seed})`;
  }

  private maskedInput(passage: string, question: string, words: string[], index: number): string {
    const masked = words.slice();
    masked[index] = MASK;
    return `${passage} ${EOS} ${question} ${EOS} ${masked.join(" ")}`;
  }

  async scoreAnswer(passage: string, question: string, answer: string): Promise<WordScores> {
    const words = answer.trim().split(/\s+/);
    const wordLogliks = words.map((word, index) => {
      const context = this.maskedInput(passage, question, words, index);
      const h = hashU32(`${this.seed}|loglik|${context}|${word}`);
      return -((h % 4000) + 1) / 1000; // in [-4.0, -0.001]
    });
    return { words, wordLogliks };
  }

  async embed(text: string): Promise<number[][]> {
    const tokens = text.trim() === "" ? [] : text.trim().split(/\s+/);
    return tokens.map((token, position) => {
      const raw: number[] = [];
      for (let k = 0; k < this.dim; k++) {
        const h = hashU32(`${this.seed}|embed|${position}|${token}|${k}`);
        raw.push(((h % 2001) - 1000) / 1000); // in [-1, 1]
      }
      let normSq = 0;
      for (const v of raw) normSq += v * v;
      if (normSq === 0) {
        raw[0] = 1;
        normSq = 1;
      }
      const norm = Math.sqrt(normSq);
      return raw.map((v) => v / norm);
    });
  }
}
