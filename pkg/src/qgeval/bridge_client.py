"""Client for the out-of-process masked-LM bridge.

Wire format: one JSON object per line, UTF-8, over a TCP socket or a
stdio pipe. Scoring request/response:

    {"id": "...", "passage": "...", "question": "...", "answer": "..."}
    {"id": "...", "word_logliks": [...], "words": [...]}

Embedding extension:

    {"id": "...", "mode": "embed", "text": "..."}
    {"id": "...", "vectors": [[...], ...]}

Errors come back as {"id": "...", "error": "..."}. Responses are FIFO,
so requests may be pipelined; this client keeps it simple and works one
request at a time.
"""

from __future__ import annotations

import json
import socket
from typing import IO

from .qascore import ModelError

DEFAULT_TIMEOUT = 60.0


def parse_address(addr: str) -> tuple[str, int]:
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bridge address must look like host:port, got {addr!r}")
    return host, int(port)


class BridgeClient:
    """Masked-LM capability backed by a bridge server connection.

    Implements `answer_log_likelihoods` (one request per item) plus the
    per-word `word_log_likelihood` contract on top of a response cache.
    """

    def __init__(self, address: str | None = None, pipe: tuple[IO, IO] | None = None,
                 timeout: float = DEFAULT_TIMEOUT, name: str = "bridge"):
        self.name = name
        self.vocab_size = 0  # unknown; owned by the remote model
        self._cache: dict[tuple[str, str, str], list[float]] = {}
        self._next_id = 0
        if pipe is not None:
            self._reader, self._writer = pipe
            self._sock = None
        elif address is not None:
            host, port = parse_address(address)
            try:
                self._sock = socket.create_connection((host, port), timeout=timeout)
            except OSError as exc:
                raise ModelError(f"cannot reach bridge at {address}: {exc}") from exc
            self._reader = self._sock.makefile("r", encoding="utf-8")
            self._writer = self._sock.makefile("w", encoding="utf-8")
        else:
            raise ValueError("BridgeClient needs an address or a pipe")

    def close(self) -> None:
        for stream in (self._reader, self._writer):
            try:
                stream.close()
            except OSError:
                pass
        if self._sock is not None:
            self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _roundtrip(self, request: dict) -> dict:
        self._next_id += 1
        request = {"id": f"q{self._next_id}", **request}
        try:
            self._writer.write(json.dumps(request, ensure_ascii=False) + "\n")
            self._writer.flush()
            line = self._reader.readline()
        except OSError as exc:
            raise ModelError(f"bridge transport failure: {exc}") from exc
        if not line:
            raise ModelError("bridge closed the connection")
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ModelError(f"bridge sent malformed JSON: {exc}") from exc
        if response.get("id") != request["id"]:
            raise ModelError(
                f"bridge response id {response.get('id')!r} does not match request {request['id']!r}"
            )
        if "error" in response:
            raise ModelError(f"bridge error: {response['error']}")
        return response

    def answer_log_likelihoods(self, passage: str, question: str, answer: str) -> list[float]:
        key = (passage, question, answer)
        if key not in self._cache:
            response = self._roundtrip(
                {"passage": passage, "question": question, "answer": answer}
            )
            logliks = response.get("word_logliks")
            words = response.get("words")
            if not isinstance(logliks, list) or not isinstance(words, list):
                raise ModelError("bridge response missing word_logliks/words")
            if len(logliks) != len(words):
                raise ModelError("bridge response words/word_logliks length mismatch")
            self._cache[key] = [float(x) for x in logliks]
        return self._cache[key]

    def word_log_likelihood(self, passage: str, question: str, answer: str, word_index: int) -> float:
        logliks = self.answer_log_likelihoods(passage, question, answer)
        if not 0 <= word_index < len(logliks):
            raise ModelError(
                f"word_index {word_index} out of range for {len(logliks)} words",
                word_index=word_index,
            )
        return logliks[word_index]

    def embed(self, text: str) -> list[list[float]]:
        response = self._roundtrip({"mode": "embed", "text": text})
        vectors = response.get("vectors")
        if not isinstance(vectors, list) or not vectors:
            raise ModelError("bridge embed response missing vectors")
        return [[float(x) for x in row] for row in vectors]
