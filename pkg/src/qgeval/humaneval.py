"""Crowd-evaluation pipeline: HIT construction with quality-control items,
worker filtering, z-standardization, system scoring, pairwise significance
matrices and metric-vs-human correlation reports.

A HIT bundles one passage/answer with 20 question items: 11 ordinary
system outputs, 6 bad references (corrupted copies used to catch careless
raters) and 3 exact repeats (intra-rater consistency). Bad references
exist only for quality control; they never enter system scores.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

from .stats import (
    DegenerateInputError,
    PairedSample,
    kendall_tau,
    pearson,
    spearman,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
    williams_test,
)
from .textkit import TokenSequence, tokenize

ORD = "ORD"
REPEAT = "REPEAT"
BADREF = "BADREF"
KINDS = (ORD, REPEAT, BADREF)

HUMAN_SYSTEM = "Human"

DEFAULT_CRITERIA = ("understandability", "relevancy", "answerability", "appropriateness")

# HIT composition: how many of the 10 non-Human systems get each extra item
N_REPEAT_SYSTEMS = 2
N_BADREF_SYSTEMS = 5
HIT_SIZE = 20
HIT_COMPOSITION = {ORD: 11, BADREF: 6, REPEAT: 3}


@dataclass(frozen=True)
class RatingRecord:
    """One worker's slider scores for one HIT item."""

    worker_id: str
    hit_id: str
    item_id: str
    system: str
    kind: str
    scores: dict
    pair_of: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown item kind {self.kind!r}")
        if self.kind != ORD and not self.pair_of:
            raise ValueError(f"{self.kind} rating {self.item_id!r} needs pair_of")
        for crit, value in self.scores.items():
            if not (0.0 <= float(value) <= 100.0):
                raise ValueError(f"score {crit}={value} outside the 0-100 slider range")

    @classmethod
    def from_dict(cls, d: dict) -> "RatingRecord":
        return cls(
            worker_id=str(d["worker_id"]),
            hit_id=str(d["hit_id"]),
            item_id=str(d["item_id"]),
            system=str(d["system"]),
            kind=str(d["kind"]),
            scores={str(k): float(v) for k, v in d["scores"].items()},
            pair_of=d.get("pair_of"),
        )


@dataclass(frozen=True)
class HitItem:
    item_id: str
    system: str
    kind: str
    question: str
    pair_of: str | None = None


@dataclass(frozen=True)
class HIT:
    hit_id: str
    passage: str
    answer: str
    items: tuple[HitItem, ...]

    def __post_init__(self):
        if len(self.items) != HIT_SIZE:
            raise ValueError(f"HIT must have {HIT_SIZE} items, got {len(self.items)}")
        histogram: dict[str, int] = {}
        for item in self.items:
            histogram[item.kind] = histogram.get(item.kind, 0) + 1
        if histogram != HIT_COMPOSITION:
            raise ValueError(f"bad HIT composition {histogram}")

    def to_dict(self) -> dict:
        return {
            "hit_id": self.hit_id,
            "passage": self.passage,
            "answer": self.answer,
            "items": [
                {
                    "item_id": it.item_id,
                    "system": it.system,
                    "kind": it.kind,
                    "pair_of": it.pair_of,
                    "question": it.question,
                }
                for it in self.items
            ],
        }


# ---------------------------------------------------------------------------
# Bad-reference generation
# ---------------------------------------------------------------------------

def bad_ref_span_length(n: int) -> int:
    """Number of words the replacement span comprises for an n-word question.

    Implements the published rule table literally, reading its n=4..4 row
    as covering n in [4,5]. Note the n>=21 rule (floor(n/5)) dips below the
    5 words assigned at n in [16,20] until n reaches 25; that
    non-monotonicity is kept for fidelity.
    """
    if n < 1:
        raise ValueError("question must have at least one word")
    if n <= 3:
        return 1
    if n <= 5:
        return 2
    if n <= 8:
        return 3
    if n <= 15:
        return 4
    if n <= 20:
        return 5
    return n // 5


def make_bad_reference(
    question: TokenSequence,
    corpus_passages: Mapping[str, TokenSequence],
    current_passage_id: str,
    rng: random.Random,
) -> TokenSequence:
    """Corrupt a question by replacing a random contiguous span with a
    same-length span drawn from some other passage.

    For questions longer than two words the first and last words are never
    part of the replaced span. The passage the question was generated from
    is excluded as a donor.
    """
    n = len(question)
    m = bad_ref_span_length(n)
    donors = sorted(
        pid
        for pid, toks in corpus_passages.items()
        if pid != current_passage_id and len(toks) >= m
    )
    if not donors:
        raise ValueError("no eligible donor passage for bad-reference span")
    donor = corpus_passages[donors[rng.randrange(len(donors))]]
    span_at = rng.randrange(len(donor) - m + 1)
    replacement = tuple(donor)[span_at : span_at + m]

    if n <= 2:
        start = rng.randrange(n - m + 1)
    else:
        start = rng.randrange(1, n - m)
    tokens = tuple(question)[:start] + replacement + tuple(question)[start + m :]
    return TokenSequence(tokens=tokens, source=" ".join(tokens))


# ---------------------------------------------------------------------------
# HIT construction
# ---------------------------------------------------------------------------

def build_hit(
    hit_id: str,
    passage: str,
    answer: str,
    ordinary_questions: Mapping[str, str],
    corpus_passages: Mapping[str, "str | TokenSequence"],
    current_passage_id: str,
    rng: random.Random,
) -> HIT:
    """Assemble one 20-item HIT from 11 system questions (Human included).

    The Human system always contributes ORD + REPEAT + BADREF; of the ten
    remaining systems, 2 (chosen by `rng`) also get a REPEAT, 5 a BADREF
    and 3 stay ORD-only. Items are fully shuffled before return.
    Donor passages may be passed pre-tokenized when many HITs share a pool.
    """
    systems = sorted(ordinary_questions)
    if len(systems) != 11 or HUMAN_SYSTEM not in systems:
        raise ValueError(
            f"build_hit needs exactly 11 systems including {HUMAN_SYSTEM!r}, got {len(systems)}"
        )
    others = [s for s in systems if s != HUMAN_SYSTEM]
    rng.shuffle(others)
    repeat_systems = {HUMAN_SYSTEM, *others[:N_REPEAT_SYSTEMS]}
    badref_systems = {HUMAN_SYSTEM, *others[N_REPEAT_SYSTEMS : N_REPEAT_SYSTEMS + N_BADREF_SYSTEMS]}

    token_passages = {
        pid: text if isinstance(text, TokenSequence) else tokenize(text)
        for pid, text in corpus_passages.items()
    }
    items: list[HitItem] = []
    for system in systems:
        question = ordinary_questions[system]
        ord_id = f"{hit_id}/{system}/ord"
        items.append(HitItem(item_id=ord_id, system=system, kind=ORD, question=question))
        if system in repeat_systems:
            items.append(
                HitItem(
                    item_id=f"{hit_id}/{system}/rep",
                    system=system,
                    kind=REPEAT,
                    question=question,
                    pair_of=ord_id,
                )
            )
        if system in badref_systems:
            corrupted = make_bad_reference(
                tokenize(question), token_passages, current_passage_id, rng
            )
            items.append(
                HitItem(
                    item_id=f"{hit_id}/{system}/bad",
                    system=system,
                    kind=BADREF,
                    question=" ".join(corrupted),
                    pair_of=ord_id,
                )
            )
    rng.shuffle(items)
    return HIT(hit_id=hit_id, passage=passage, answer=answer, items=tuple(items))


# ---------------------------------------------------------------------------
# Worker quality control
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkerQC:
    worker_id: str
    passed: bool
    p_value: float | None
    n_pairs: int
    reason: str | None = None


def qc_filter(
    ratings: Sequence[RatingRecord],
    alpha: float = 0.05,
) -> tuple[set, list, dict]:
    """Keep workers whose ordinary scores significantly exceed their
    bad-reference scores (one-sided signed-rank, p < alpha), pooling the
    (ORD, BADREF) pairs across all criteria and all HITs of the worker.

    Returns (passed_workers, passed_ratings, report). A worker with no
    bad-reference pairs cannot demonstrate reliability and fails with
    reason "no-qc-evidence"; one whose differences are all zero fails with
    reason "degenerate".
    """
    if not ratings:
        raise ValueError("qc_filter requires at least one rating")
    by_worker: dict[str, list[RatingRecord]] = {}
    for record in ratings:
        by_worker.setdefault(record.worker_id, []).append(record)

    report: dict[str, WorkerQC] = {}
    passed_workers: set = set()
    for worker_id in sorted(by_worker):
        records = by_worker[worker_id]
        ords = {(r.hit_id, r.item_id): r for r in records if r.kind == ORD}
        pairs: list[tuple[float, float]] = []
        for record in records:
            if record.kind != BADREF:
                continue
            mate = ords.get((record.hit_id, record.pair_of))
            if mate is None:
                continue
            for criterion in sorted(record.scores):
                if criterion in mate.scores:
                    pairs.append((mate.scores[criterion], record.scores[criterion]))
        if not pairs:
            report[worker_id] = WorkerQC(worker_id, False, None, 0, reason="no-qc-evidence")
            continue
        try:
            # d = badref - ord; a diligent worker pushes d below zero
            result = wilcoxon_signed_rank(PairedSample(tuple(pairs)), alternative="less")
        except DegenerateInputError:
            report[worker_id] = WorkerQC(worker_id, False, None, len(pairs), reason="degenerate")
            continue
        ok = result.p_value < alpha
        report[worker_id] = WorkerQC(worker_id, ok, result.p_value, len(pairs))
        if ok:
            passed_workers.add(worker_id)

    passed_ratings = [r for r in ratings if r.worker_id in passed_workers]
    return passed_workers, passed_ratings, report


# ---------------------------------------------------------------------------
# z-standardization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ZRating:
    """Question-level standardized scores (repeats already merged in)."""

    worker_id: str
    hit_id: str
    item_id: str
    system: str
    z: dict

    def overall(self) -> float:
        return math.fsum(self.z.values()) / len(self.z)


def standardize(
    ratings: Sequence[RatingRecord],
    population_sigma: bool = True,
) -> tuple[list, dict]:
    """Map each worker's raw slider scores to zero-mean unit-variance values.

    The per-worker mean and standard deviation pool every raw score the
    worker produced (all criteria, all items, bad references included);
    bad-reference z-scores are then dropped, and each repeat's z-scores are
    averaged into the ordinary item they duplicate. Workers with zero
    variance are excluded with reason "constant-rater".

    Returns (z_ratings, excluded) where excluded maps worker_id -> reason.
    """
    by_worker: dict[str, list[RatingRecord]] = {}
    for record in ratings:
        by_worker.setdefault(record.worker_id, []).append(record)

    excluded: dict[str, str] = {}
    z_ratings: list[ZRating] = []
    for worker_id in sorted(by_worker):
        records = by_worker[worker_id]
        raw = [v for r in records for v in r.scores.values()]
        mu = math.fsum(raw) / len(raw)
        var = math.fsum((v - mu) ** 2 for v in raw) / (len(raw) if population_sigma else max(len(raw) - 1, 1))
        if var == 0:
            excluded[worker_id] = "constant-rater"
            continue
        sigma = math.sqrt(var)

        def zmap(record: RatingRecord) -> dict:
            return {c: (v - mu) / sigma for c, v in record.scores.items()}

        repeats: dict[tuple[str, str], RatingRecord] = {
            (r.hit_id, r.pair_of): r for r in records if r.kind == REPEAT
        }
        for record in records:
            if record.kind != ORD:
                continue
            z = zmap(record)
            mate = repeats.get((record.hit_id, record.item_id))
            if mate is not None:
                mate_z = zmap(mate)
                z = {c: (z[c] + mate_z[c]) / 2 for c in z if c in mate_z}
            z_ratings.append(
                ZRating(
                    worker_id=worker_id,
                    hit_id=record.hit_id,
                    item_id=record.item_id,
                    system=record.system,
                    z=z,
                )
            )
    return z_ratings, excluded


# ---------------------------------------------------------------------------
# System scores, significance matrices, correlation report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SystemScore:
    system: str
    n: int
    z_overall: float
    z_by_criterion: dict


@dataclass(frozen=True)
class SystemScoreTable:
    rows: tuple[SystemScore, ...]  # sorted by z_overall descending
    criteria: tuple[str, ...]

    def systems(self) -> list:
        return [row.system for row in self.rows]

    def z_overall(self) -> dict:
        return {row.system: row.z_overall for row in self.rows}


def system_scores(z_ratings: Sequence[ZRating], criteria: Sequence[str] = DEFAULT_CRITERIA) -> SystemScoreTable:
    """Per-criterion mean of question-level z-scores, per system; the overall
    score is the arithmetic mean of the criterion means."""
    if not z_ratings:
        raise ValueError("system_scores requires at least one z-rating")
    by_system: dict[str, list[ZRating]] = {}
    for zr in z_ratings:
        by_system.setdefault(zr.system, []).append(zr)
    rows = []
    for system in sorted(by_system):
        group = by_system[system]
        by_criterion = {
            c: math.fsum(zr.z[c] for zr in group) / len(group) for c in criteria
        }
        overall = math.fsum(by_criterion.values()) / len(criteria)
        rows.append(
            SystemScore(system=system, n=len(group), z_overall=overall, z_by_criterion=by_criterion)
        )
    rows.sort(key=lambda row: (-row.z_overall, row.system))
    return SystemScoreTable(rows=tuple(rows), criteria=tuple(criteria))


@dataclass(frozen=True)
class SignificanceMatrix:
    systems: tuple[str, ...]  # sorted by z_overall descending
    cells: tuple[tuple[bool, ...], ...]  # cells[i][j]: row i beats column j
    threshold: float

    def cell(self, row_system: str, col_system: str) -> bool:
        i = self.systems.index(row_system)
        j = self.systems.index(col_system)
        return self.cells[i][j]


def significance_matrix(
    z_ratings: Sequence[ZRating],
    threshold: float = 0.1,
    criteria: Sequence[str] = DEFAULT_CRITERIA,
) -> SignificanceMatrix:
    """Pairwise one-sided rank-sum tests on per-question overall z-scores;
    cell[i][j] is true when system i significantly outperforms system j."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0,1), got {threshold}")
    table = system_scores(z_ratings, criteria)
    order = table.systems()
    if len(order) < 2:
        raise ValueError("significance_matrix needs at least two systems")
    samples: dict[str, list[float]] = {s: [] for s in order}
    for zr in z_ratings:
        samples[zr.system].append(zr.overall())
    cells = []
    for row_system in order:
        row = []
        for col_system in order:
            if row_system == col_system:
                row.append(False)
                continue
            result = wilcoxon_rank_sum(
                samples[row_system], samples[col_system], alternative="greater"
            )
            row.append(result.p_value < threshold)
        cells.append(tuple(row))
    return SignificanceMatrix(systems=tuple(order), cells=tuple(cells), threshold=threshold)


def matrix_overlap(a: SignificanceMatrix, b: SignificanceMatrix) -> float:
    """Fraction of off-diagonal cells on which two matrices agree, after
    aligning systems by name."""
    if set(a.systems) != set(b.systems):
        raise ValueError("matrices cover different system sets")
    agree = total = 0
    for row in a.systems:
        for col in a.systems:
            if row == col:
                continue
            total += 1
            if a.cell(row, col) == b.cell(row, col):
                agree += 1
    return agree / total


@dataclass(frozen=True)
class MetricCorrelation:
    metric: str
    n: int
    pearson: float
    spearman: float
    kendall: float


@dataclass(frozen=True)
class CorrelationReport:
    per_metric: tuple[MetricCorrelation, ...]
    williams_p: dict  # (metric_a, metric_b) -> one-tailed p for r(a) > r(b)
    warnings: tuple[str, ...] = ()


def correlate_metrics(
    table: SystemScoreTable,
    metric_columns: Mapping[str, Mapping[str, float]],
) -> CorrelationReport:
    """Correlate each metric's per-system scores with the human z_overall
    column, over whichever systems that metric covers, and run the Williams
    test on every metric pair (shared systems only)."""
    human_z = table.z_overall()
    per_metric = []
    warnings: list[str] = []
    covered: dict[str, list[str]] = {}
    for metric in sorted(metric_columns):
        column = metric_columns[metric]
        systems = [s for s in table.systems() if s in column and column[s] is not None]
        if len(systems) < 3:
            warnings.append(f"metric {metric}: only {len(systems)} systems, omitted")
            continue
        covered[metric] = systems
        zs = [human_z[s] for s in systems]
        ms = [column[s] for s in systems]
        per_metric.append(
            MetricCorrelation(
                metric=metric,
                n=len(systems),
                pearson=pearson(zs, ms),
                spearman=spearman(zs, ms),
                kendall=kendall_tau(zs, ms),
            )
        )

    williams_p: dict = {}
    metrics = [mc.metric for mc in per_metric]
    for i, metric_a in enumerate(metrics):
        for metric_b in metrics:
            if metric_a == metric_b:
                continue
            shared = [s for s in covered[metric_a] if s in set(covered[metric_b])]
            if len(shared) < 4:
                warnings.append(f"williams {metric_a} vs {metric_b}: fewer than 4 shared systems")
                continue
            zs = [human_z[s] for s in shared]
            a_scores = [metric_columns[metric_a][s] for s in shared]
            b_scores = [metric_columns[metric_b][s] for s in shared]
            result = williams_test(
                r12=pearson(a_scores, b_scores),
                r13=pearson(zs, a_scores),
                r23=pearson(zs, b_scores),
                n=len(shared),
                alternative="greater",
            )
            williams_p[(metric_a, metric_b)] = result.p_value
    return CorrelationReport(
        per_metric=tuple(per_metric), williams_p=williams_p, warnings=tuple(warnings)
    )
