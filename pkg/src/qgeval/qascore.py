"""Reference-free question scoring with a masked language model.

A question is scored by masking each word of the gold answer in turn,
asking the model for the log-likelihood of the true word given the
passage + question context, and summing those log-likelihoods. The model
is a pluggable capability: `MockMLM` gives a fully deterministic local
stand-in, `BridgeClient` (see bridge_client module) talks to an
out-of-process server hosting a real pretrained model.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Protocol, Sequence

EOS = "<eos>"
MASK = "<mask>"


class ModelError(RuntimeError):
    """Transport or model failure; carries the answer word index if known."""

    def __init__(self, message: str, word_index: int | None = None):
        super().__init__(message)
        self.word_index = word_index


@dataclass(frozen=True)
class EvalItem:
    """One passage/answer/candidate-question record."""

    id: str
    system: str
    passage: str
    question: str
    answer: str
    reference: str | None = None

    def __post_init__(self):
        if not self.passage or not self.question or not self.answer:
            raise ValueError(f"item {self.id!r}: passage, question and answer must be non-empty")

    @classmethod
    def from_dict(cls, d: dict) -> "EvalItem":
        return cls(
            id=str(d["id"]),
            system=str(d["system"]),
            passage=str(d["passage"]),
            question=str(d["question"]),
            answer=str(d["answer"]),
            reference=d.get("reference"),
        )


class MaskedLanguageModel(Protocol):
    """Capability contract: log-likelihood of a masked answer word."""

    vocab_size: int
    name: str

    def word_log_likelihood(self, passage: str, question: str, answer: str, word_index: int) -> float:
        ...


def log_softmax(logits: Sequence[float]) -> list[float]:
    """Numerically stable log-softmax (max subtraction)."""
    xs = list(logits)
    if not xs:
        raise ValueError("log_softmax of an empty vector")
    if any(not math.isfinite(x) for x in xs):
        raise ValueError("log_softmax requires finite entries")
    m = max(xs)
    log_z = m + math.log(sum(math.exp(x - m) for x in xs))
    return [x - log_z for x in xs]


def true_word_loglik(log_probs: Sequence[float], true_index: int) -> float:
    """Select the true token's log-probability (one-hot contraction)."""
    if not 0 <= true_index < len(log_probs):
        raise ValueError(f"true_index {true_index} out of range for {len(log_probs)} classes")
    return log_probs[true_index]


def masked_input(passage: str, question: str, answer_words: Sequence[str], word_index: int) -> str:
    """The model input layout: passage and question joined by the separator
    token, then the answer with one word masked, joined by the separator."""
    masked = list(answer_words)
    masked[word_index] = MASK
    return f"{passage} {EOS} {question} {EOS} {' '.join(masked)}"


def _stable_u64(*parts: str) -> int:
    h = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


class MockMLM:
    """Deterministic seeded test double for the masked-LM capability.

    Logits for a masked position are drawn from a RNG seeded by the full
    input string, so identical (passage, question, answer, index, seed)
    always reproduce the same vector. `uniform=True` zeroes the logits,
    giving the closed form l_w = ln(1/V) for every word.
    `question_affinity > 0` adds that much to the true token's logit
    whenever the masked word also occurs in the question, which makes the
    mock prefer matched passage/question/answer triples over mismatched
    ones.
    """

    def __init__(
        self,
        vocab_size: int = 64,
        seed: int = 0,
        uniform: bool = False,
        question_affinity: float = 0.0,
        logit_fn=None,
    ):
        if vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")
        self.vocab_size = vocab_size
        self.seed = seed
        self.uniform = uniform
        self.question_affinity = question_affinity
        self.logit_fn = logit_fn
        self.name = f"mock(V={vocab_size},seed={seed})"

    def token_index(self, word: str) -> int:
        return _stable_u64("tok", word) % self.vocab_size

    def logits(self, context: str) -> list[float]:
        if self.uniform:
            return [0.0] * self.vocab_size
        if self.logit_fn is not None:
            return list(self.logit_fn(context, self.vocab_size))
        rng = random.Random(_stable_u64("logits", str(self.seed), context))
        return [rng.gauss(0.0, 1.0) for _ in range(self.vocab_size)]

    def word_log_likelihood(self, passage: str, question: str, answer: str, word_index: int) -> float:
        words = answer.split()
        if not 0 <= word_index < len(words):
            raise ValueError(f"word_index {word_index} out of range for answer {answer!r}")
        context = masked_input(passage, question, words, word_index)
        logits = self.logits(context)
        true_index = self.token_index(words[word_index])
        if self.question_affinity and words[word_index].lower() in question.lower().split():
            logits = list(logits)
            logits[true_index] += self.question_affinity
        return true_word_loglik(log_softmax(logits), true_index)


@dataclass(frozen=True)
class QAScoreResult:
    """Per-word log-likelihoods of one question plus their aggregates."""

    per_word: tuple[tuple[str, float], ...]
    total: float
    per_word_mean: float
    word_count: int


def qascore_question(item: EvalItem, model: MaskedLanguageModel) -> QAScoreResult:
    """Score one question: mask every answer word in turn and sum the true
    word log-likelihoods."""
    words = item.answer.split()
    if not words:
        raise ValueError(f"item {item.id!r}: answer has no words")
    batch = getattr(model, "answer_log_likelihoods", None)
    if batch is not None:
        logliks = list(batch(item.passage, item.question, item.answer))
        if len(logliks) != len(words):
            raise ModelError(
                f"model returned {len(logliks)} log-likelihoods for {len(words)} words"
            )
    else:
        logliks = []
        for w in range(len(words)):
            try:
                logliks.append(model.word_log_likelihood(item.passage, item.question, item.answer, w))
            except ModelError:
                raise
            except (OSError, ConnectionError) as exc:
                raise ModelError(str(exc), word_index=w) from exc
    total = math.fsum(logliks)
    return QAScoreResult(
        per_word=tuple(zip(words, logliks)),
        total=total,
        per_word_mean=total / len(words),
        word_count=len(words),
    )


def qascore_system(
    items: Sequence[EvalItem],
    model: MaskedLanguageModel,
    aggregation: str = "per_word_mean",
) -> float:
    """System score: arithmetic mean over items of per_word_mean (default)
    or of the raw per-question sum. Items are visited in id order so the
    floating-point sum is independent of input ordering."""
    if not items:
        raise ValueError("qascore_system requires at least one item")
    if aggregation not in ("per_word_mean", "sum"):
        raise ValueError(f"unknown aggregation {aggregation!r}")
    values = []
    for item in sorted(items, key=lambda it: it.id):
        result = qascore_question(item, model)
        values.append(result.per_word_mean if aggregation == "per_word_mean" else result.total)
    return math.fsum(values) / len(values)
