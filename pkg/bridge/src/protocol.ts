/**
 * Wire protocol: one JSON object per line, UTF-8.
 *
 * Scoring:   {"id", "passage", "question", "answer"}
 *         -> {"id", "word_logliks": [...], "words": [...]}
 * Embedding: {"id", "mode": "embed", "text"}
 *         -> {"id", "vectors": [[...], ...]}   (unit-normalized rows)
 * Errors:    {"id", "error": "..."}  ("bad-request", "too-long", ...)
 *
 * Responses are emitted strictly in request order (FIFO), so clients may
 * pipeline requests; response objects use a fixed key order so identical
 * requests produce byte-identical frames.
 */

export interface ScoreRequest {
  id: string;
  passage: string;
  question: string;
  answer: string;
}

export interface EmbedRequest {
  id: string;
  mode: "embed";
  text: string;
}

export interface WordScores {
  words: string[];
  wordLogliks: number[];
}

export interface MlmBackend {
  name: string;
  scoreAnswer(passage: string, question: string, answer: string): Promise<WordScores>;
  embed(text: string): Promise<number[][]>;
}

/** Backend-thrown marker for inputs exceeding the model's context window. */
export class TooLongError extends Error {
  constructor() {
    super("too-long");
  }
}

export const encodeLine = (value: unknown): string => `${JSON.stringify(value)}\n`;

/** Buffering newline splitter; emits complete lines without the newline. */
export const createLineSplitter = (onLine: (line: string) => void) => {
  let buffer = "";
  return {
    push(chunk: string) {
      buffer += chunk;
      for (;;) {
        const idx = buffer.indexOf("\n");
        if (idx === -1) break;
        const line = buffer.slice(0, idx);
        buffer = buffer.slice(idx + 1);
        if (line.trim()) onLine(line);
      }
    },
    flush() {
      const line = buffer.trim();
      buffer = "";
      if (line) onLine(line);
    },
  };
};

const isString = (v: unknown): v is string => typeof v === "string";

/** Parse + dispatch one raw request line; always resolves to a response line. */
export async function handleRequestLine(backend: MlmBackend, rawLine: string): Promise<string> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(rawLine);
  } catch {
    return encodeLine({ id: null, error: "bad-request" });
  }
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    return encodeLine({ id: null, error: "bad-request" });
  }
  const obj = parsed as Record<string, unknown>;
  const id = isString(obj.id) ? obj.id : null;

  try {
    if (obj.mode === "embed") {
      if (id === null || !isString(obj.text)) {
        return encodeLine({ id, error: "bad-request" });
      }
      const vectors = await backend.embed(obj.text);
      return encodeLine({ id, vectors });
    }
    if (
      id === null ||
      !isString(obj.passage) ||
      !isString(obj.question) ||
      !isString(obj.answer) ||
      obj.answer.trim() === ""
    ) {
      return encodeLine({ id, error: "bad-request" });
    }
    const scores = await backend.scoreAnswer(obj.passage, obj.question, obj.answer);
    return encodeLine({ id, word_logliks: scores.wordLogliks, words: scores.words });
  } catch (err) {
    if (err instanceof TooLongError) {
      return encodeLine({ id, error: "too-long" });
    }
    const message = err instanceof Error ? err.message : String(err);
    return encodeLine({ id, error: message });
  }
}
