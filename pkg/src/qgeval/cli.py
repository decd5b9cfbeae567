"""Command-line entry point.

Subcommands:
    metrics      reference-based metrics over an EvalItem JSONL corpus
    qascore      reference-free scoring with the mock or bridge model
    hits build   assemble 20-item HITs with quality-control items
    analyze      ratings JSONL -> QC + z-scores + significance + report
    overlap      agreement between two significance matrices
    correlate    metric columns vs human z column from a CSV table
    test         rank-sum | signed-rank | williams on CSV columns

Every randomized output flows from --seed through per-purpose derived
seeds, so runs are reproducible byte for byte.

Exit codes: 0 ok, 1 usage or I/O error, 2 degenerate analysis,
3 model transport failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import random
import sys
from pathlib import Path

from . import humaneval, metrics, qascore, render, stats
from .bridge_client import BridgeClient
from .qascore import EvalItem, ModelError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DEGENERATE = 2
EXIT_TRANSPORT = 3

METRIC_COLUMNS = [
    "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "GLEU-4", "ROUGE-L",
    "METEOR", "Answerability", "Q-BLEU1", "Q-BLEU4",
]


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def read_jsonl(path: Path):
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CliError(f"{path}:{lineno}: malformed JSON: {exc}")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _load_items(path: Path, require_reference: bool) -> tuple[list[EvalItem], int]:
    items, skipped = [], 0
    for lineno, record in read_jsonl(path):
        try:
            item = EvalItem.from_dict(record)
        except (KeyError, ValueError) as exc:
            raise CliError(f"{path}:{lineno}: bad item: {exc}")
        if require_reference and not item.reference:
            skipped += 1
            continue
        items.append(item)
    return items, skipped


def _item_metrics(item: EvalItem, config: metrics.AnswerabilityConfig, synonyms) -> dict:
    from .textkit import tokenize

    cand = tokenize(item.question)
    ref = tokenize(item.reference or "")
    row: dict[str, float] = {}
    for n in range(1, 5):
        row[f"BLEU-{n}"] = metrics.bleu(cand, [ref], max_n=n).value
    row["GLEU-4"] = metrics.gleu(cand, [ref], max_n=4).value
    row["ROUGE-L"] = metrics.rouge_l(cand, ref).value
    row["METEOR"] = metrics.meteor(cand, ref, synonyms).value
    answerability = metrics.answerability(cand, ref, config)
    row["Answerability"] = answerability.value
    for n in (1, 4):
        base = metrics.MetricScore(row[f"BLEU-{n}"], f"BLEU{n}")
        row[f"Q-BLEU{n}"] = metrics.q_combine(base, answerability, config.beta).value
    return row


def load_synonym_table(path: Path) -> dict:
    table: dict[str, set] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        parts = line.rstrip("\n").split("\t")
        if len(parts) >= 2 and parts[0]:
            table[parts[0].lower()] = {p.lower() for p in parts[1:] if p}
    return table


def cmd_metrics(args) -> int:
    items, skipped = _load_items(Path(args.input), require_reference=True)
    if skipped:
        print(f"warning: skipped {skipped} item(s) without a reference", file=sys.stderr)
    config = (
        metrics.load_answerability_config(args.answerability_config)
        if args.answerability_config
        else metrics.default_answerability_config()
    )
    synonyms = load_synonym_table(Path(args.synonyms)) if args.synonyms else None

    out = Path(args.out)
    header = ["id", "system"] + METRIC_COLUMNS
    item_lines = [",".join(header)]
    by_system: dict[str, list[dict]] = {}
    for item in items:
        row = _item_metrics(item, config, synonyms)
        by_system.setdefault(item.system, []).append(row)
        item_lines.append(",".join([item.id, item.system] + [_fmt(row[c]) for c in METRIC_COLUMNS]))
    _write(out / "metrics_items.csv", "\n".join(item_lines) + "\n")

    sys_lines = [",".join(["system", "n"] + METRIC_COLUMNS)]
    for system in sorted(by_system):
        rows = by_system[system]
        means = [_fmt(sum(r[c] for r in rows) / len(rows)) for c in METRIC_COLUMNS]
        sys_lines.append(",".join([system, str(len(rows))] + means))
    _write(out / "metrics_systems.csv", "\n".join(sys_lines) + "\n")
    print(f"wrote {out / 'metrics_items.csv'} and {out / 'metrics_systems.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# qascore
# ---------------------------------------------------------------------------

def _make_model(args):
    if args.model == "mock":
        return qascore.MockMLM(vocab_size=args.vocab_size, seed=derive_seed(args.seed, "mock-mlm"))
    address = args.bridge_addr or os.environ.get("QGEVAL_BRIDGE_ADDR")
    if not address:
        raise CliError("bridge model needs --bridge-addr or QGEVAL_BRIDGE_ADDR")
    try:
        return BridgeClient(address=address)
    except ModelError as exc:
        raise CliError(str(exc), code=EXIT_TRANSPORT)


def cmd_qascore(args) -> int:
    items, _ = _load_items(Path(args.input), require_reference=False)
    model = _make_model(args)
    out = Path(args.out)
    item_lines = ["id,system,word_count,total,per_word_mean"]
    by_system: dict[str, list] = {}
    try:
        for item in sorted(items, key=lambda it: it.id):
            result = qascore.qascore_question(item, model)
            by_system.setdefault(item.system, []).append(result)
            item_lines.append(
                ",".join(
                    [item.id, item.system, str(result.word_count),
                     _fmt(result.total), _fmt(result.per_word_mean)]
                )
            )
    except ModelError as exc:
        raise CliError(f"model failure: {exc}", code=EXIT_TRANSPORT)
    finally:
        if hasattr(model, "close"):
            model.close()

    _write(out / "qascore_items.csv", "\n".join(item_lines) + "\n")
    sys_lines = ["system,n,qascore"]
    for system in sorted(by_system):
        results = by_system[system]
        if args.aggregation == "per_word_mean":
            score = sum(r.per_word_mean for r in results) / len(results)
        else:
            score = sum(r.total for r in results) / len(results)
        sys_lines.append(f"{system},{len(results)},{_fmt(score)}")
    _write(out / "qascore_systems.csv", "\n".join(sys_lines) + "\n")
    print(f"wrote {out / 'qascore_items.csv'} and {out / 'qascore_systems.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# hits build
# ---------------------------------------------------------------------------

def cmd_hits_build(args) -> int:
    sources = []
    passages: dict[str, str] = {}
    for lineno, record in read_jsonl(Path(args.input)):
        for key in ("passage_id", "passage", "answer", "questions"):
            if key not in record:
                raise CliError(f"{args.input}:{lineno}: missing field {key!r}")
        sources.append(record)
        passages[str(record["passage_id"])] = str(record["passage"])

    rng = random.Random(derive_seed(args.seed, "hits"))
    out = Path(args.out)
    lines = []
    for index, record in enumerate(sources):
        hit = humaneval.build_hit(
            hit_id=record.get("hit_id", f"hit{index:04d}"),
            passage=str(record["passage"]),
            answer=str(record["answer"]),
            ordinary_questions={str(k): str(v) for k, v in record["questions"].items()},
            corpus_passages=passages,
            current_passage_id=str(record["passage_id"]),
            rng=rng,
        )
        lines.append(json.dumps(hit.to_dict(), ensure_ascii=False, sort_keys=True))
    _write(out / "hits.jsonl", "\n".join(lines) + ("\n" if lines else ""))
    print(f"wrote {len(lines)} HITs to {out / 'hits.jsonl'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def _load_ratings(path: Path) -> list:
    ratings = []
    for lineno, record in read_jsonl(path):
        try:
            ratings.append(humaneval.RatingRecord.from_dict(record))
        except (KeyError, ValueError) as exc:
            raise CliError(f"{path}:{lineno}: bad rating: {exc}")
    if not ratings:
        raise CliError(f"{path}: no ratings found")
    return ratings


def load_metric_table(path: Path) -> tuple[dict, dict]:
    """CSV with a 'system' column, optional human z column, metric columns.
    Returns (columns, human_column) with empty cells dropped."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "system" not in reader.fieldnames:
            raise CliError(f"{path}: need a 'system' column")
        columns: dict[str, dict[str, float]] = {
            name: {} for name in reader.fieldnames if name != "system"
        }
        for row in reader:
            system = row["system"]
            for name, cell in row.items():
                if name == "system" or cell is None or cell.strip() == "":
                    continue
                columns[name][system] = float(cell)
    return columns, columns.pop("z", {})


def cmd_analyze(args) -> int:
    ratings = _load_ratings(Path(args.input))
    passed_workers, passed_ratings, qc_report = humaneval.qc_filter(ratings, alpha=args.alpha)

    out = Path(args.out)
    report: dict = {
        "qc": {
            "alpha": args.alpha,
            "total_workers": len(qc_report),
            "passed_workers": len(passed_workers),
            "workers": {
                w: {"passed": r.passed, "p_value": r.p_value, "n_pairs": r.n_pairs, "reason": r.reason}
                for w, r in sorted(qc_report.items())
            },
        }
    }
    if not passed_ratings:
        report["system_table"] = []
        _write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
        print("error: no worker passed quality control", file=sys.stderr)
        return EXIT_DEGENERATE

    criteria = tuple(sorted(passed_ratings[0].scores))
    z_ratings, excluded = humaneval.standardize(passed_ratings)
    report["standardize"] = {"excluded_workers": excluded}
    if not z_ratings:
        report["system_table"] = []
        _write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
        print("error: standardization excluded every worker", file=sys.stderr)
        return EXIT_DEGENERATE

    table = humaneval.system_scores(z_ratings, criteria)
    matrix = humaneval.significance_matrix(z_ratings, threshold=args.sig_threshold, criteria=criteria)
    report["system_table"] = [
        {
            "system": row.system,
            "n": row.n,
            "z_overall": row.z_overall,
            "z_by_criterion": row.z_by_criterion,
        }
        for row in table.rows
    ]
    report["significance"] = {
        "threshold": matrix.threshold,
        "systems": list(matrix.systems),
        "cells": [[1 if c else 0 for c in row] for row in matrix.cells],
    }

    if args.metric_scores:
        columns, _ = load_metric_table(Path(args.metric_scores))
        correlation = humaneval.correlate_metrics(table, columns)
        report["correlations"] = _correlation_dict(correlation)

    _write(out / "report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write(out / "sigmatrix.csv", render.sigmatrix_csv(matrix))
    _write(out / "heatmap.svg", render.heatmap_svg(matrix))
    print(f"wrote report.json, sigmatrix.csv, heatmap.svg to {out}")
    return EXIT_OK


def _correlation_dict(correlation) -> dict:
    return {
        "per_metric": [
            {
                "metric": mc.metric,
                "n": mc.n,
                "pearson": mc.pearson,
                "spearman": mc.spearman,
                "kendall": mc.kendall,
            }
            for mc in correlation.per_metric
        ],
        "williams_p": {f"{a}>{b}": p for (a, b), p in sorted(correlation.williams_p.items())},
        "warnings": list(correlation.warnings),
    }


# ---------------------------------------------------------------------------
# overlap / correlate / test
# ---------------------------------------------------------------------------

def cmd_overlap(args) -> int:
    matrices = []
    for path in (args.a, args.b):
        try:
            matrices.append(render.parse_sigmatrix_csv(Path(path).read_text(encoding="utf-8")))
        except (OSError, ValueError) as exc:
            raise CliError(f"{path}: {exc}")
    try:
        value = humaneval.matrix_overlap(*matrices)
    except ValueError as exc:
        raise CliError(str(exc))
    print(_fmt(value))
    return EXIT_OK


def cmd_correlate(args) -> int:
    columns, human = load_metric_table(Path(args.table))
    if not human:
        raise CliError(f"{args.table}: need a human 'z' column")
    rows = tuple(
        humaneval.SystemScore(system=s, n=1, z_overall=v, z_by_criterion={})
        for s, v in sorted(human.items(), key=lambda kv: -kv[1])
    )
    table = humaneval.SystemScoreTable(rows=rows, criteria=())
    try:
        correlation = humaneval.correlate_metrics(table, columns)
    except stats.DegenerateInputError as exc:
        raise CliError(str(exc), code=EXIT_DEGENERATE)
    print(json.dumps(_correlation_dict(correlation), indent=2, sort_keys=True))
    return EXIT_OK


def _csv_column(path: Path, name: str) -> list[float]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or name not in reader.fieldnames:
            raise CliError(f"{path}: no column {name!r}")
        values = []
        for row in reader:
            cell = row[name]
            if cell is not None and cell.strip() != "":
                values.append(float(cell))
    return values


def _print_test_result(result: stats.TestResult) -> None:
    print(json.dumps({
        "statistic": result.statistic,
        "p_value": result.p_value,
        "method": result.method,
        "alternative": result.alternative,
        "n": list(result.n),
    }, sort_keys=True))


def cmd_test_rank_sum(args) -> int:
    x = _csv_column(Path(args.data), args.x)
    y = _csv_column(Path(args.data), args.y)
    try:
        _print_test_result(stats.wilcoxon_rank_sum(x, y, alternative=args.alternative))
    except stats.DegenerateInputError as exc:
        raise CliError(str(exc), code=EXIT_DEGENERATE)
    except ValueError as exc:
        raise CliError(str(exc))
    return EXIT_OK


def cmd_test_signed_rank(args) -> int:
    x = _csv_column(Path(args.data), args.x)
    y = _csv_column(Path(args.data), args.y)
    if len(x) != len(y):
        raise CliError(f"paired columns differ in length: {len(x)} vs {len(y)}")
    try:
        sample = stats.PairedSample(tuple(zip(x, y)))
        _print_test_result(stats.wilcoxon_signed_rank(sample, alternative=args.alternative))
    except stats.DegenerateInputError as exc:
        raise CliError(str(exc), code=EXIT_DEGENERATE)
    except ValueError as exc:
        raise CliError(str(exc))
    return EXIT_OK


def cmd_test_williams(args) -> int:
    if args.data:
        if not (args.human and args.metric1 and args.metric2):
            raise CliError("williams from CSV needs --human, --metric1, --metric2")
        columns, human = load_metric_table(Path(args.data))
        if human:
            columns = {**columns, "z": human}
        human_col = columns.get(args.human)
        a_col = columns.get(args.metric1)
        b_col = columns.get(args.metric2)
        if not human_col or not a_col or not b_col:
            raise CliError("missing columns in table")
        shared = sorted(set(human_col) & set(a_col) & set(b_col))
        z = [human_col[s] for s in shared]
        a = [a_col[s] for s in shared]
        b = [b_col[s] for s in shared]
        r12, r13, r23, n = stats.pearson(a, b), stats.pearson(z, a), stats.pearson(z, b), len(shared)
    else:
        if None in (args.r12, args.r13, args.r23, args.n):
            raise CliError("williams needs either a CSV table or --r12 --r13 --r23 --n")
        r12, r13, r23, n = args.r12, args.r13, args.r23, args.n
    try:
        _print_test_result(stats.williams_test(r12, r13, r23, n, alternative=args.alternative))
    except ValueError as exc:
        raise CliError(str(exc))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgeval", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--alpha", type=float, default=0.05, help="QC significance threshold")
    parser.add_argument("--sig-threshold", type=float, default=0.1,
                        help="pairwise significance threshold")
    parser.add_argument("--model", choices=["mock", "bridge"], default="mock")
    parser.add_argument("--bridge-addr", default=None,
                        help="bridge host:port (or set QGEVAL_BRIDGE_ADDR)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="reference-based metrics over an EvalItem corpus")
    p.add_argument("input")
    p.add_argument("--answerability-config", default=None)
    p.add_argument("--synonyms", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("qascore", help="reference-free scoring")
    p.add_argument("input")
    p.add_argument("--vocab-size", type=int, default=64)
    p.add_argument("--aggregation", choices=["per_word_mean", "sum"], default="per_word_mean")
    p.set_defaults(func=cmd_qascore)

    p = sub.add_parser("hits", help="HIT construction")
    hits_sub = p.add_subparsers(dest="hits_command", required=True)
    pb = hits_sub.add_parser("build", help="assemble 20-item HITs")
    pb.add_argument("input")
    pb.set_defaults(func=cmd_hits_build)

    p = sub.add_parser("analyze", help="run the rating analysis pipeline")
    p.add_argument("input")
    p.add_argument("--metric-scores", default=None,
                   help="per-system metric CSV for the correlation report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("overlap", help="agreement of two significance matrices")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("correlate", help="metric columns vs human z column")
    p.add_argument("table")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("test", help="statistical tests on CSV columns")
    test_sub = p.add_subparsers(dest="test_command", required=True)

    pt = test_sub.add_parser("rank-sum")
    pt.add_argument("data")
    pt.add_argument("--x", required=True)
    pt.add_argument("--y", required=True)
    pt.add_argument("--alternative", choices=list(stats.ALTERNATIVES), default="greater")
    pt.set_defaults(func=cmd_test_rank_sum)

    pt = test_sub.add_parser("signed-rank")
    pt.add_argument("data")
    pt.add_argument("--x", required=True)
    pt.add_argument("--y", required=True)
    pt.add_argument("--alternative", choices=list(stats.ALTERNATIVES), default="greater")
    pt.set_defaults(func=cmd_test_signed_rank)

    pt = test_sub.add_parser("williams")
    pt.add_argument("data", nargs="?", default=None)
    pt.add_argument("--human", default=None)
    pt.add_argument("--metric1", default=None)
    pt.add_argument("--metric2", default=None)
    pt.add_argument("--r12", type=float, default=None)
    pt.add_argument("--r13", type=float, default=None)
    pt.add_argument("--r23", type=float, default=None)
    pt.add_argument("--n", type=int, default=None)
    pt.add_argument("--alternative", choices=list(stats.ALTERNATIVES), default="greater")
    pt.set_defaults(func=cmd_test_williams)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
