import json
from pathlib import Path

import pytest

from qgeval.cli import (
    EXIT_DEGENERATE,
    EXIT_OK,
    EXIT_TRANSPORT,
    EXIT_USAGE,
    main,
)
from qgeval.humaneval import BADREF, DEFAULT_CRITERIA, ORD
from qgeval.simulate import simulate_run

SCORE_TABLE = Path(__file__).parent.parent / "src" / "qgeval" / "data" / "system_scores.csv"


def write_jsonl(path: Path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def eval_item(item_id, question, reference, system="sysA"):
    return {
        "id": item_id,
        "system": system,
        "passage": "Dublin City University sits on the north side of Dublin.",
        "question": question,
        "answer": "Glasnevin",
        "reference": reference,
    }


def read_csv(path: Path):
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, line.split(","))) for line in lines[1:]]


class TestMetricsCommand:
    def test_worked_example_values(self, tmp_path):
        corpus = tmp_path / "items.jsonl"
        reference = "What is the address of DCU?"
        write_jsonl(corpus, [
            eval_item("q2", "What is the address of", reference),
            eval_item("q1", "address of DCU", reference),
        ])
        assert main(["--out", str(tmp_path / "out"), "metrics", str(corpus)]) == EXIT_OK
        rows = {r["id"]: r for r in read_csv(tmp_path / "out" / "metrics_items.csv")}
        assert float(rows["q2"]["BLEU-1"]) == pytest.approx(81.9, abs=0.05)
        assert float(rows["q1"]["BLEU-1"]) == pytest.approx(36.8, abs=0.05)
        assert float(rows["q2"]["ROUGE-L"]) == pytest.approx(90.9, abs=0.05)
        assert float(rows["q1"]["ROUGE-L"]) == pytest.approx(66.7, abs=0.05)

    def test_empty_input_writes_header_only(self, tmp_path):
        corpus = tmp_path / "empty.jsonl"
        corpus.write_text("", encoding="utf-8")
        assert main(["--out", str(tmp_path / "out"), "metrics", str(corpus)]) == EXIT_OK
        lines = (tmp_path / "out" / "metrics_items.csv").read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("id,system,")

    def test_identity_corpus_scores_100(self, tmp_path):
        corpus = tmp_path / "items.jsonl"
        q = "What is the address of DCU?"
        write_jsonl(corpus, [eval_item("a", q, q), eval_item("b", q, q)])
        assert main(["--out", str(tmp_path / "out"), "metrics", str(corpus)]) == EXIT_OK
        for row in read_csv(tmp_path / "out" / "metrics_items.csv"):
            for column in ("BLEU-1", "BLEU-4", "GLEU-4", "ROUGE-L", "Answerability"):
                assert float(row[column]) == pytest.approx(100.0, abs=1e-6)

    def test_synonym_table_file_feeds_meteor(self, tmp_path):
        corpus = tmp_path / "items.jsonl"
        write_jsonl(corpus, [eval_item("a", "car", "automobile")])
        synonyms = tmp_path / "syn.tsv"
        synonyms.write_text("car\tautomobile\tauto\n", encoding="utf-8")
        out_plain, out_syn = tmp_path / "p", tmp_path / "s"
        assert main(["--out", str(out_plain), "metrics", str(corpus)]) == EXIT_OK
        assert main(["--out", str(out_syn), "metrics", str(corpus),
                     "--synonyms", str(synonyms)]) == EXIT_OK
        (plain,) = read_csv(out_plain / "metrics_items.csv")
        (with_syn,) = read_csv(out_syn / "metrics_items.csv")
        assert float(plain["METEOR"]) == 0.0
        assert float(with_syn["METEOR"]) == pytest.approx(50.0, abs=1e-6)

    def test_custom_answerability_config_file(self, tmp_path):
        config_dir = tmp_path / "cfg"
        config_dir.mkdir()
        (config_dir / "fn.txt").write_text("is\nthe\nof\n", encoding="utf-8")
        (config_dir / "qt.txt").write_text("what\nwhich\n", encoding="utf-8")
        (config_dir / "ne.txt").write_text("dcu\n", encoding="utf-8")
        (config_dir / "answerability.cfg").write_text(
            "weights.content = 0.4\nweights.ne = 0.3\nweights.qt = 0.2\nweights.fn = 0.1\n"
            "beta = 0.5\nfunction_words = fn.txt\nquestion_types = qt.txt\n"
            "ner_gazetteer = ne.txt\n",
            encoding="utf-8",
        )
        corpus = tmp_path / "items.jsonl"
        q = "What is the address of DCU?"
        write_jsonl(corpus, [eval_item("a", q, q)])
        assert main([
            "--out", str(tmp_path / "o"), "metrics", str(corpus),
            "--answerability-config", str(config_dir / "answerability.cfg"),
        ]) == EXIT_OK
        (row,) = read_csv(tmp_path / "o" / "metrics_items.csv")
        assert float(row["Answerability"]) == pytest.approx(100.0, abs=1e-6)
        # beta = 0.5 pulls Q-BLEU1 halfway between BLEU-1 and Answerability
        expected = 0.5 * float(row["BLEU-1"]) + 0.5 * float(row["Answerability"])
        assert float(row["Q-BLEU1"]) == pytest.approx(expected, abs=1e-6)

    def test_missing_reference_skipped_with_warning(self, tmp_path, capsys):
        corpus = tmp_path / "items.jsonl"
        record = eval_item("a", "what is this", "what is this")
        no_ref = {k: v for k, v in record.items() if k != "reference"}
        no_ref["id"] = "b"
        write_jsonl(corpus, [record, no_ref])
        assert main(["--out", str(tmp_path / "out"), "metrics", str(corpus)]) == EXIT_OK
        assert "skipped 1" in capsys.readouterr().err
        assert len(read_csv(tmp_path / "out" / "metrics_items.csv")) == 1


class TestQascoreCommand:
    def test_deterministic_given_seed(self, tmp_path):
        corpus = tmp_path / "items.jsonl"
        write_jsonl(corpus, [eval_item(f"i{k}", "where is the campus", None) for k in range(4)])
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["--seed", "9", "--out", str(out1), "qascore", str(corpus)]) == EXIT_OK
        assert main(["--seed", "9", "--out", str(out2), "qascore", str(corpus)]) == EXIT_OK
        assert (out1 / "qascore_items.csv").read_bytes() == (out2 / "qascore_items.csv").read_bytes()
        assert (out1 / "qascore_systems.csv").read_bytes() == (out2 / "qascore_systems.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        corpus = tmp_path / "items.jsonl"
        write_jsonl(corpus, [eval_item("i0", "where is the campus", None)])
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        assert main(["--seed", "1", "--out", str(out1), "qascore", str(corpus)]) == EXIT_OK
        assert main(["--seed", "2", "--out", str(out2), "qascore", str(corpus)]) == EXIT_OK
        assert (out1 / "qascore_items.csv").read_text() != (out2 / "qascore_items.csv").read_text()

    def test_scores_are_negative(self, tmp_path):
        corpus = tmp_path / "items.jsonl"
        write_jsonl(corpus, [eval_item("i0", "where is the campus", None)])
        assert main(["--out", str(tmp_path / "o"), "qascore", str(corpus)]) == EXIT_OK
        (row,) = read_csv(tmp_path / "o" / "qascore_items.csv")
        assert float(row["total"]) < 0
        assert float(row["per_word_mean"]) < 0

    def test_unreachable_bridge_exits_3(self, tmp_path, capsys):
        corpus = tmp_path / "items.jsonl"
        write_jsonl(corpus, [eval_item("i0", "q", None)])
        code = main([
            "--out", str(tmp_path / "o"), "--model", "bridge",
            "--bridge-addr", "127.0.0.1:1", "qascore", str(corpus),
        ])
        assert code == EXIT_TRANSPORT
        assert "127.0.0.1:1" in capsys.readouterr().err


def hit_source(passage_id="p0"):
    systems = ["Human"] + [f"sys{i:02d}" for i in range(10)]
    return {
        "passage_id": passage_id,
        "passage": f"the old mill of {passage_id} stands beside the river crossing near town",
        "answer": "the old mill",
        "questions": {s: f"what stands beside the river crossing in {passage_id}" for s in systems},
    }


class TestHitsBuild:
    def test_builds_twenty_item_hits(self, tmp_path):
        src = tmp_path / "src.jsonl"
        write_jsonl(src, [hit_source("p0"), hit_source("p1"), hit_source("p2")])
        assert main(["--seed", "4", "--out", str(tmp_path / "o"), "hits", "build", str(src)]) == EXIT_OK
        lines = (tmp_path / "o" / "hits.jsonl").read_text().strip().splitlines()
        assert len(lines) == 3
        for line in lines:
            hit = json.loads(line)
            kinds = [item["kind"] for item in hit["items"]]
            assert len(kinds) == 20
            assert kinds.count("ORD") == 11
            assert kinds.count("BADREF") == 6
            assert kinds.count("REPEAT") == 3

    def test_byte_identical_reruns(self, tmp_path):
        src = tmp_path / "src.jsonl"
        write_jsonl(src, [hit_source("p0"), hit_source("p1")])
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["--seed", "4", "--out", str(out1), "hits", "build", str(src)])
        main(["--seed", "4", "--out", str(out2), "hits", "build", str(src)])
        assert (out1 / "hits.jsonl").read_bytes() == (out2 / "hits.jsonl").read_bytes()

    def test_missing_field_is_usage_error(self, tmp_path, capsys):
        src = tmp_path / "src.jsonl"
        bad = hit_source("p0")
        bad.pop("answer")
        write_jsonl(src, [bad])
        assert main(["--out", str(tmp_path / "o"), "hits", "build", str(src)]) == EXIT_USAGE
        assert "answer" in capsys.readouterr().err


class TestAnalyze:
    def make_ratings_file(self, tmp_path, **kwargs):
        ratings = simulate_run(seed=21, n_hits=40, clicker_fraction=0.1, **kwargs)
        path = tmp_path / "ratings.jsonl"
        write_jsonl(path, [
            {
                "worker_id": r.worker_id, "hit_id": r.hit_id, "item_id": r.item_id,
                "system": r.system, "kind": r.kind, "pair_of": r.pair_of,
                "scores": r.scores,
            }
            for r in ratings
        ])
        return path

    def test_full_pipeline(self, tmp_path):
        path = self.make_ratings_file(tmp_path)
        out = tmp_path / "out"
        assert main(["--out", str(out), "analyze", str(path)]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["qc"]["passed_workers"] > 0
        assert len(report["system_table"]) == 11
        systems = [row["system"] for row in report["system_table"]]
        assert systems[0] == "Human"
        assert (out / "sigmatrix.csv").exists()
        svg = (out / "heatmap.svg").read_text()
        assert svg.startswith("<svg")
        assert "Human" in svg

    def test_byte_identical_reruns(self, tmp_path):
        path = self.make_ratings_file(tmp_path)
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        main(["--out", str(out1), "analyze", str(path)])
        main(["--out", str(out2), "analyze", str(path)])
        for name in ("report.json", "sigmatrix.csv", "heatmap.svg"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_all_workers_failing_qc_exits_2(self, tmp_path, capsys):
        records = []
        for k in range(6):
            base = {
                "worker_id": "flat", "hit_id": "h0", "system": "s",
                "scores": {c: 50.0 for c in DEFAULT_CRITERIA},
            }
            records.append({**base, "item_id": f"i{k}", "kind": ORD, "pair_of": None})
            records.append({**base, "item_id": f"b{k}", "kind": BADREF, "pair_of": f"i{k}"})
        path = tmp_path / "ratings.jsonl"
        write_jsonl(path, records)
        assert main(["--out", str(tmp_path / "o"), "analyze", str(path)]) == EXIT_DEGENERATE
        assert "quality control" in capsys.readouterr().err
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["system_table"] == []

    def test_malformed_line_reports_line_number(self, tmp_path, capsys):
        path = tmp_path / "ratings.jsonl"
        path.write_text('{"worker_id": "w"}\nnot json\n', encoding="utf-8")
        assert main(["--out", str(tmp_path / "o"), "analyze", str(path)]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert ":1:" in err or ":2:" in err

    def test_metric_scores_add_correlations(self, tmp_path):
        path = self.make_ratings_file(tmp_path)
        out = tmp_path / "out"
        # metric table keyed to the simulated system names
        table = tmp_path / "metrics.csv"
        qualities = sorted([f"sys{i:02d}" for i in range(10)])
        lines = ["system,FakeMetric"]
        for i, s in enumerate(qualities):
            lines.append(f"{s},{10 + i}")
        table.write_text("\n".join(lines) + "\n", encoding="utf-8")
        assert main([
            "--out", str(out), "analyze", str(path), "--metric-scores", str(table),
        ]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        (metric_row,) = report["correlations"]["per_metric"]
        assert metric_row["metric"] == "FakeMetric"
        assert metric_row["pearson"] > 0.8  # planted qualities increase with index


class TestTwoRunReplication:
    def test_analyze_twice_then_overlap(self, tmp_path, capsys):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        for run, out in ((1, out_a), (2, out_b)):
            ratings = simulate_run(seed=500 + run, n_hits=150, clicker_fraction=0.1,
                                   worker_prefix=f"r{run}_")
            path = tmp_path / f"ratings{run}.jsonl"
            write_jsonl(path, [
                {
                    "worker_id": r.worker_id, "hit_id": r.hit_id, "item_id": r.item_id,
                    "system": r.system, "kind": r.kind, "pair_of": r.pair_of,
                    "scores": r.scores,
                }
                for r in ratings
            ])
            assert main(["--out", str(out), "analyze", str(path)]) == EXIT_OK
        capsys.readouterr()
        assert main(["overlap", str(out_a / "sigmatrix.csv"), str(out_b / "sigmatrix.csv")]) == EXIT_OK
        overlap = float(capsys.readouterr().out.strip())
        assert overlap >= 0.9


class TestOverlapCommand:
    def test_identical_matrices(self, tmp_path, capsys):
        csv_text = "system,a,b\na,0,1\nb,0,0\n"
        p1, p2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
        p1.write_text(csv_text)
        p2.write_text(csv_text)
        assert main(["overlap", str(p1), str(p2)]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "1.000000"

    def test_system_mismatch(self, tmp_path, capsys):
        p1, p2 = tmp_path / "m1.csv", tmp_path / "m2.csv"
        p1.write_text("system,a,b\na,0,1\nb,0,0\n")
        p2.write_text("system,a,c\na,0,1\nc,0,0\n")
        assert main(["overlap", str(p1), str(p2)]) == EXIT_USAGE


class TestCorrelateCommand:
    def test_published_table(self, capsys):
        assert main(["correlate", str(SCORE_TABLE)]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        by_metric = {m["metric"]: m for m in report["per_metric"]}
        assert by_metric["METEOR"]["pearson"] == pytest.approx(0.801, abs=0.0005)
        assert by_metric["QAScore"]["n"] == 11
        assert report["williams_p"]["METEOR>Q-BLEU1"] == pytest.approx(0.248, abs=0.02)


class TestTestCommands:
    def test_rank_sum(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        data.write_text("x,y\n4,1\n5,2\n6,3\n", encoding="utf-8")
        assert main(["test", "rank-sum", str(data), "--x", "x", "--y", "y"]) == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result["p_value"] == pytest.approx(0.05)
        assert result["method"] == "exact"

    def test_signed_rank(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        rows = "\n".join(f"0,{i + 1}" for i in range(5))
        data.write_text("x,y\n" + rows + "\n", encoding="utf-8")
        assert main(["test", "signed-rank", str(data), "--x", "x", "--y", "y"]) == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result["p_value"] == pytest.approx(1 / 32)

    def test_signed_rank_degenerate_exits_2(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("x,y\n1,1\n2,2\n", encoding="utf-8")
        assert main(["test", "signed-rank", str(data), "--x", "x", "--y", "y"]) == EXIT_DEGENERATE

    def test_williams_direct(self, capsys):
        assert main([
            "test", "williams", "--r12", "0.5", "--r13", "0.9", "--r23", "0.1", "--n", "20",
        ]) == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result["statistic"] == pytest.approx(15.4964318411171401, rel=1e-9)

    def test_williams_from_table(self, capsys):
        assert main([
            "test", "williams", str(SCORE_TABLE),
            "--human", "z", "--metric1", "METEOR", "--metric2", "Q-BLEU1",
        ]) == EXIT_OK
        result = json.loads(capsys.readouterr().out)
        assert result["p_value"] == pytest.approx(0.248, abs=0.02)

    def test_missing_column_is_usage_error(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("x,y\n1,2\n", encoding="utf-8")
        assert main(["test", "rank-sum", str(data), "--x", "x", "--y", "zzz"]) == EXIT_USAGE


def test_missing_input_file_is_usage_error(tmp_path):
    assert main(["--out", str(tmp_path), "metrics", str(tmp_path / "nope.jsonl")]) == EXIT_USAGE
