"""Synthetic crowd-evaluation data with planted system qualities.

Used to validate the analysis pipeline end to end: build real HITs with
the production builder, have simulated workers rate them, and check that
the pipeline recovers the planted quality ordering and that two
independent runs agree. Diligent workers score items according to the
item's latent quality plus personal bias and noise; random clickers
ignore the items entirely.
"""

from __future__ import annotations

import random
from typing import Mapping, Sequence

from .humaneval import (
    DEFAULT_CRITERIA,
    HUMAN_SYSTEM,
    ORD,
    REPEAT,
    HIT,
    RatingRecord,
    build_hit,
)
from .textkit import tokenize

_WORDS = (
    "river delta glacier harbor meadow canyon summit valley lagoon plateau "
    "festival treaty dynasty archive museum chapel bridge station tower mill "
    "merchant scholar pilot farmer curator engineer poet sailor mayor judge "
    "founded built opened signed crossed mapped painted restored banned moved"
).split()


def default_qualities(n_systems: int = 10) -> dict:
    """Human on top, the rest spread evenly over [0.25, 0.85]."""
    qualities = {HUMAN_SYSTEM: 0.92}
    for i in range(n_systems):
        qualities[f"sys{i:02d}"] = 0.25 + 0.6 * i / max(n_systems - 1, 1)
    return qualities


def _make_passage(rng: random.Random, length: int = 30) -> str:
    return " ".join(rng.choice(_WORDS) for _ in range(length))


def _make_question(rng: random.Random, passage: str, answer: str) -> str:
    words = passage.split()
    picked = [words[rng.randrange(len(words))] for _ in range(rng.randint(5, 9))]
    return " ".join(["what", *picked, answer.split()[0]])


def simulate_corpus(
    rng: random.Random,
    n_hits: int,
    systems: Sequence[str],
) -> tuple[list, dict]:
    """Build `n_hits` HITs over a fresh synthetic passage pool.

    Returns (hits, latent) where latent maps ORD item_id -> latent quality
    placeholder 1.0; actual qualities are planted during rating so the same
    corpus can serve several worker pools.
    """
    passages = {f"p{i:03d}": _make_passage(rng) for i in range(max(n_hits, 8))}
    tokenized = {pid: tokenize(text) for pid, text in passages.items()}
    hits = []
    passage_ids = sorted(passages)
    for h in range(n_hits):
        pid = passage_ids[h % len(passage_ids)]
        passage = passages[pid]
        answer = " ".join(passage.split()[3:5])
        questions = {s: _make_question(rng, passage, answer) for s in systems}
        hits.append(
            build_hit(
                hit_id=f"hit{h:04d}",
                passage=passage,
                answer=answer,
                ordinary_questions=questions,
                corpus_passages=tokenized,
                current_passage_id=pid,
                rng=rng,
            )
        )
    return hits, passages


def _clip(value: float, lo: float = 0.0, hi: float = 100.0) -> float:
    return max(lo, min(hi, value))


def rate_hit(
    hit: HIT,
    worker_id: str,
    qualities: Mapping[str, float],
    rng: random.Random,
    clicker: bool = False,
    criteria: Sequence[str] = DEFAULT_CRITERIA,
    worker_bias: float = 0.0,
    badref_degradation: float = 0.25,
) -> list:
    """One worker's ratings for every item of a HIT."""
    latent: dict[str, float] = {}
    for item in hit.items:
        if item.kind == ORD:
            latent[item.item_id] = _clip(
                qualities[item.system] + rng.gauss(0.0, 0.08), 0.0, 1.0
            )
    records = []
    for item in hit.items:
        if clicker:
            scores = {c: rng.uniform(0.0, 100.0) for c in criteria}
        else:
            if item.kind == ORD:
                q = latent[item.item_id]
            elif item.kind == REPEAT:
                q = latent[item.pair_of]
            else:
                q = latent[item.pair_of] * badref_degradation
            scores = {
                c: _clip(100.0 * (q + worker_bias + rng.gauss(0.0, 0.06)))
                for c in criteria
            }
        records.append(
            RatingRecord(
                worker_id=worker_id,
                hit_id=hit.hit_id,
                item_id=item.item_id,
                system=item.system,
                kind=item.kind,
                scores=scores,
                pair_of=item.pair_of,
            )
        )
    return records


def simulate_run(
    seed: int,
    n_hits: int,
    qualities: Mapping[str, float] | None = None,
    hits_per_worker: int = 3,
    clicker_fraction: float = 0.0,
    worker_prefix: str = "w",
    criteria: Sequence[str] = DEFAULT_CRITERIA,
) -> list:
    """Simulate one full evaluation run and return its RatingRecords.

    Workers take `hits_per_worker` consecutive HITs each; a
    `clicker_fraction` of them are random clickers. Worker ids carry
    `worker_prefix` so two runs can use disjoint pools.
    """
    qualities = qualities or default_qualities()
    rng = random.Random(seed)
    hits, _ = simulate_corpus(rng, n_hits, sorted(qualities))
    ratings: list = []
    worker_index = 0
    for start in range(0, len(hits), hits_per_worker):
        worker_id = f"{worker_prefix}{worker_index:04d}"
        clicker = rng.random() < clicker_fraction
        bias = rng.gauss(0.0, 0.05)
        for hit in hits[start : start + hits_per_worker]:
            ratings.extend(
                rate_hit(
                    hit,
                    worker_id,
                    qualities,
                    rng,
                    clicker=clicker,
                    criteria=criteria,
                    worker_bias=bias,
                )
            )
        worker_index += 1
    return ratings
