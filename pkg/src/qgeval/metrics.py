"""Reference-based question metrics.

BLEU, GLEU, ROUGE-L and METEOR follow their classical sentence-level
formulations; Answerability is the weighted element-overlap F1 with its
convex Q-combination; bert_score is the greedy-max embedding match.

Conventions shared by every metric here:
  * scores are scaled to [0, 100] (bert_score returns raw [-1, 1] values);
  * a metric whose precision and recall are both zero returns 0, never NaN;
  * candidate == reference scores 100 (METEOR: 100 minus its chunk penalty).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .textkit import TokenSequence, lcs_length, ngrams, porter_stem

# element types used by Answerability
CONTENT = "content"
NAMED_ENTITY = "ne"
QUESTION_TYPE = "qt"
FUNCTION = "fn"
ELEMENT_TYPES = (CONTENT, NAMED_ENTITY, QUESTION_TYPE, FUNCTION)


@dataclass(frozen=True)
class MetricScore:
    value: float
    metric_name: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ValueError(f"{self.metric_name}: non-finite score {self.value}")


def _require_nonempty(seq, what: str) -> None:
    if len(tuple(seq)) == 0:
        raise ValueError(f"{what} must be non-empty")


# ---------------------------------------------------------------------------
# BLEU / GLEU
# ---------------------------------------------------------------------------

def _clipped_matches(cand_counts: Counter, refs_counts: list[Counter]) -> int:
    hits = 0
    for gram, count in cand_counts.items():
        best = max((rc[gram] for rc in refs_counts), default=0)
        hits += min(count, best)
    return hits


def _closest_ref_len(cand_len: int, ref_lens: Sequence[int]) -> int:
    # closest reference length; ties broken toward the shorter reference
    return min(ref_lens, key=lambda r: (abs(r - cand_len), r))


def bleu(
    candidate: TokenSequence,
    references: Sequence[TokenSequence],
    max_n: int = 4,
    smoothing: str = "none",
) -> MetricScore:
    """Sentence BLEU: geometric mean of clipped n-gram precisions times the
    brevity penalty, on a 0-100 scale.

    `smoothing="epsilon"` replaces zero precisions with a small constant so
    the geometric mean stays positive; `"none"` lets any zero precision zero
    the whole score.
    """
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in 1..4, got {max_n}")
    if smoothing not in ("none", "epsilon"):
        raise ValueError(f"unknown smoothing {smoothing!r}")
    if not references:
        raise ValueError("bleu requires at least one reference")
    for ref in references:
        _require_nonempty(ref, "reference")
    name = f"BLEU-{max_n}"
    if len(candidate) == 0:
        return MetricScore(0.0, name, warnings=("empty-candidate",))

    precisions = []
    for n in range(1, max_n + 1):
        cand_counts = ngrams(candidate, n)
        total = sum(cand_counts.values())
        if total == 0:
            precisions.append(0.0)
            continue
        hits = _clipped_matches(cand_counts, [ngrams(r, n) for r in references])
        precisions.append(hits / total)

    if smoothing == "epsilon":
        precisions = [p if p > 0 else 1e-9 for p in precisions]
    if any(p == 0 for p in precisions):
        geo = 0.0
    else:
        geo = math.exp(sum(math.log(p) for p in precisions) / len(precisions))

    r_len = _closest_ref_len(len(candidate), [len(r) for r in references])
    bp = min(1.0, math.exp(1.0 - r_len / len(candidate)))
    return MetricScore(100.0 * bp * geo, name)


def gleu(
    candidate: TokenSequence,
    references: Sequence[TokenSequence],
    max_n: int = 4,
) -> MetricScore:
    """Sentence GLEU: min(precision, recall) over pooled 1..max_n n-gram
    matches, on a 0-100 scale.

    With several references the match count uses per-n-gram max clipping and
    the recall denominator comes from the reference closest in length.
    """
    if not 1 <= max_n <= 4:
        raise ValueError(f"max_n must be in 1..4, got {max_n}")
    if not references:
        raise ValueError("gleu requires at least one reference")
    for ref in references:
        _require_nonempty(ref, "reference")
    name = f"GLEU-{max_n}"
    if len(candidate) == 0:
        return MetricScore(0.0, name, warnings=("empty-candidate",))

    closest = min(references, key=lambda r: (abs(len(r) - len(candidate)), len(r)))
    hits = cand_total = ref_total = 0
    for n in range(1, max_n + 1):
        cand_counts = ngrams(candidate, n)
        hits += _clipped_matches(cand_counts, [ngrams(r, n) for r in references])
        cand_total += sum(cand_counts.values())
        ref_total += sum(ngrams(closest, n).values())
    if cand_total == 0 or ref_total == 0:
        return MetricScore(0.0, name)
    return MetricScore(100.0 * min(hits / cand_total, hits / ref_total), name)


# ---------------------------------------------------------------------------
# ROUGE-L
# ---------------------------------------------------------------------------

def rouge_l(candidate: TokenSequence, reference: TokenSequence) -> MetricScore:
    """ROUGE-L F1 from the longest common subsequence, on a 0-100 scale."""
    _require_nonempty(candidate, "candidate")
    _require_nonempty(reference, "reference")
    lcs = lcs_length(candidate, reference)
    if lcs == 0:
        return MetricScore(0.0, "ROUGE-L")
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return MetricScore(100.0 * 2 * p * r / (p + r), "ROUGE-L")


# ---------------------------------------------------------------------------
# METEOR
# ---------------------------------------------------------------------------

def _meteor_align(
    cand: Sequence[str],
    ref: Sequence[str],
    synonym_table: Mapping[str, set] | None,
) -> list[tuple[int, int]]:
    """Stage-wise unigram alignment: exact, then stem, then synonym match.

    Within a stage candidate positions are scanned left to right and each
    takes the first free reference position, which keeps the mapping
    deterministic.
    """

    def exact_key(tok: str):
        return tok

    def stem_key(tok: str):
        return porter_stem(tok)

    stages: list[Callable] = [exact_key, stem_key]
    matches: list[tuple[int, int]] = []
    cand_free = [True] * len(cand)
    ref_free = [True] * len(ref)

    for key in stages:
        ref_keys = [key(t) if ref_free[j] else None for j, t in enumerate(ref)]
        for i, tok in enumerate(cand):
            if not cand_free[i]:
                continue
            k = key(tok)
            for j, rk in enumerate(ref_keys):
                if rk is not None and rk == k:
                    matches.append((i, j))
                    cand_free[i] = False
                    ref_free[j] = False
                    ref_keys[j] = None
                    break

    if synonym_table:
        for i, tok in enumerate(cand):
            if not cand_free[i]:
                continue
            syns = synonym_table.get(tok, set()) | {tok}
            for j, rtok in enumerate(ref):
                if ref_free[j] and (rtok in syns or tok in synonym_table.get(rtok, set())):
                    matches.append((i, j))
                    cand_free[i] = False
                    ref_free[j] = False
                    break
    return matches


def _count_chunks(matches: list[tuple[int, int]]) -> int:
    """Chunks = maximal runs that are contiguous in both sentences."""
    pairs = sorted(matches)
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor(
    candidate: TokenSequence,
    reference: TokenSequence,
    synonym_table: Mapping[str, set] | None = None,
) -> MetricScore:
    """Classical METEOR: Fmean = 10PR/(R+9P) discounted by the fragmentation
    penalty 0.5*(chunks/matches)^3, on a 0-100 scale.

    The synonym stage only runs when a table is supplied; no lexical
    database ships with the package.
    """
    _require_nonempty(candidate, "candidate")
    _require_nonempty(reference, "reference")
    matches = _meteor_align(tuple(candidate), tuple(reference), synonym_table)
    m = len(matches)
    if m == 0:
        return MetricScore(0.0, "METEOR")
    p = m / len(candidate)
    r = m / len(reference)
    fmean = 10 * p * r / (r + 9 * p)
    penalty = 0.5 * (_count_chunks(matches) / m) ** 3
    return MetricScore(100.0 * fmean * (1 - penalty), "METEOR")


# ---------------------------------------------------------------------------
# Answerability and the Q-combination
# ---------------------------------------------------------------------------

NerTagger = Callable[[TokenSequence], set]


def gazetteer_ner(gazetteer: Iterable[str]) -> NerTagger:
    """NER capability backed by a lowercase gazetteer plus a capitalization
    heuristic on the raw source (non-initial capitalized words count)."""
    vocab = {w.lower() for w in gazetteer}

    def tag(seq: TokenSequence) -> set:
        hits = {i for i, tok in enumerate(seq) if tok in vocab}
        raw_words = [w.strip("".join(".,?!;:\"'()")) for w in seq.source.split()]
        capitalized = {
            w.lower()
            for pos, w in enumerate(raw_words)
            if pos > 0 and w[:1].isupper()
        }
        hits |= {i for i, tok in enumerate(seq) if tok in capitalized}
        return hits

    return tag


@dataclass
class AnswerabilityConfig:
    """Weights, lexicons and the NER capability used by `answerability`."""

    weights: dict = field(
        default_factory=lambda: {CONTENT: 0.55, NAMED_ENTITY: 0.25, QUESTION_TYPE: 0.15, FUNCTION: 0.05}
    )
    beta: float = 0.2
    function_word_lexicon: frozenset = frozenset()
    question_type_lexicon: frozenset = frozenset()
    ner_tagger: NerTagger = field(default_factory=lambda: gazetteer_ner(()))

    def __post_init__(self):
        total = sum(self.weights.get(t, 0.0) for t in ELEMENT_TYPES)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"answerability weights must sum to 1, got {total}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must be in [0,1], got {self.beta}")


def load_answerability_config(path: str | Path) -> AnswerabilityConfig:
    """Read the flat `key = value` config format.

    Recognized keys: weights.content, weights.ne, weights.qt, weights.fn,
    beta, function_words, question_types, ner_gazetteer (the last three are
    paths to one-token-per-line lexicon files, resolved relative to the
    config file).
    """
    path = Path(path)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        raw[key.strip()] = value.strip()

    def lexicon(key: str) -> frozenset:
        if key not in raw:
            return frozenset()
        lex_path = path.parent / raw[key]
        return frozenset(
            w.strip().lower()
            for w in lex_path.read_text(encoding="utf-8").splitlines()
            if w.strip()
        )

    weights = {
        CONTENT: float(raw.get("weights.content", 0.55)),
        NAMED_ENTITY: float(raw.get("weights.ne", 0.25)),
        QUESTION_TYPE: float(raw.get("weights.qt", 0.15)),
        FUNCTION: float(raw.get("weights.fn", 0.05)),
    }
    return AnswerabilityConfig(
        weights=weights,
        beta=float(raw.get("beta", 0.2)),
        function_word_lexicon=lexicon("function_words"),
        question_type_lexicon=lexicon("question_types"),
        ner_tagger=gazetteer_ner(lexicon("ner_gazetteer")),
    )


def default_answerability_config() -> AnswerabilityConfig:
    """Config built from the lexicons shipped under qgeval/data."""
    return load_answerability_config(Path(__file__).parent / "data" / "answerability.cfg")


def classify_elements(seq: TokenSequence, config: AnswerabilityConfig) -> dict:
    """Map each token position to its element type.

    Precedence when a token qualifies for several types:
    question-type > named entity > function word > content word.
    """
    ne_positions = config.ner_tagger(seq)
    out = {}
    for i, tok in enumerate(seq):
        if tok in config.question_type_lexicon:
            out[i] = QUESTION_TYPE
        elif i in ne_positions:
            out[i] = NAMED_ENTITY
        elif tok in config.function_word_lexicon:
            out[i] = FUNCTION
        else:
            out[i] = CONTENT
    return out


def _typed_tokens(seq: TokenSequence, config: AnswerabilityConfig) -> dict:
    types = classify_elements(seq, config)
    by_type: dict[str, list] = {t: [] for t in ELEMENT_TYPES}
    for i, tok in enumerate(seq):
        by_type[types[i]].append(tok)
    return by_type


def _weighted_overlap(q_by_type, r_by_type, weights) -> float:
    """One direction of the Answerability sum: for each element type, the
    fraction of that type's tokens in q that appear as the same type in r,
    weighted and renormalized over the types q actually contains."""
    active = [t for t in ELEMENT_TYPES if q_by_type[t] and weights.get(t, 0.0) > 0]
    total_w = sum(weights[t] for t in active)
    if total_w == 0:
        return 0.0
    acc = 0.0
    for t in active:
        r_set = set(r_by_type[t])
        h = sum(1 for tok in q_by_type[t] if tok in r_set)
        acc += weights[t] * h / len(q_by_type[t])
    return acc / total_w


def answerability(
    candidate: TokenSequence,
    reference: TokenSequence,
    config: AnswerabilityConfig | None = None,
) -> MetricScore:
    """Element-overlap F1 over content words, named entities, question-type
    words and function words, on a 0-100 scale.

    Matching is exact token equality within a type. Types absent from one
    side contribute nothing there and their weight is renormalized over the
    remaining types for that side.
    """
    _require_nonempty(candidate, "candidate")
    _require_nonempty(reference, "reference")
    config = config or AnswerabilityConfig()
    q_types = _typed_tokens(candidate, config)
    r_types = _typed_tokens(reference, config)
    p = _weighted_overlap(q_types, r_types, config.weights)
    r = _weighted_overlap(r_types, q_types, config.weights)
    if p + r == 0:
        return MetricScore(0.0, "Answerability")
    return MetricScore(100.0 * 2 * p * r / (p + r), "Answerability")


def q_combine(metric: MetricScore, answerability_score: MetricScore, beta: float) -> MetricScore:
    """Convex combination of a base metric with Answerability."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0,1], got {beta}")
    value = beta * answerability_score.value + (1 - beta) * metric.value
    return MetricScore(value, "Q-" + metric.metric_name)


# ---------------------------------------------------------------------------
# BERTScore on precomputed embeddings
# ---------------------------------------------------------------------------

@dataclass
class EmbeddingMatrix:
    """Per-token embedding rows, unit-normalized so cosine = dot product."""

    vectors: np.ndarray
    dim: int

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "EmbeddingMatrix":
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("embedding matrix must be non-empty and 2-D")
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ValueError("zero-norm embedding row")
        return cls(vectors=arr / norms, dim=arr.shape[1])


def bert_score(cand: EmbeddingMatrix, ref: EmbeddingMatrix) -> tuple[float, float, float]:
    """Greedy-max token matching over unit embeddings: (precision, recall, F1)."""
    if cand.vectors.shape[0] == 0 or ref.vectors.shape[0] == 0:
        raise ValueError("bert_score requires non-empty matrices")
    if cand.dim != ref.dim:
        raise ValueError(f"dimension mismatch: {cand.dim} vs {ref.dim}")
    sims = cand.vectors @ ref.vectors.T
    precision = float(sims.max(axis=1).mean())
    recall = float(sims.max(axis=0).mean())
    if precision + recall == 0:
        return precision, recall, 0.0
    f1 = 2 * precision * recall / (precision + recall)
    return precision, recall, f1
