"""End-to-end CLI runs over temp directories."""

from __future__ import annotations

import json

import pytest

from capprobe.cli import main
from capprobe.mmeval import PairRecord, write_pair_records


def run(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture()
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("CAPPROBE_OUT_DIR", str(tmp_path))
    return tmp_path


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpora")
    assert run("gen", "--per-type", "4", "--seed", "1", "--out-dir", d,
               "--out", "train.jsonl") == 0
    assert run("gen", "--per-type", "3", "--seed", "2", "--out-dir", d,
               "--out", "eval.jsonl") == 0
    return d


class TestGen:
    def test_counts(self, out):
        assert run("gen", "--per-type", "50", "--seed", "7", "--out", "c.jsonl") == 0
        lines = (out / "c.jsonl").read_text().strip().splitlines()
        assert len(lines) == 1800
        summary = json.loads((out / "c.jsonl.summary.json").read_text())
        assert summary["total"] == 1800
        assert len(summary["cells"]) == 36
        assert all(v == 50 for v in summary["cells"].values())

    def test_deterministic_rerun_byte_identical(self, out):
        assert run("gen", "--per-type", "5", "--seed", "3", "--out", "a.jsonl") == 0
        first = (out / "a.jsonl").read_bytes()
        assert run("gen", "--per-type", "5", "--seed", "3", "--out", "a.jsonl") == 0
        assert (out / "a.jsonl").read_bytes() == first

    def test_missing_vocab_exits_2(self, out):
        assert run("gen", "--vocab", "/nope/v.tsv", "--per-type", "2") == 2

    def test_capacity_error_exits_2(self, out):
        assert run("gen", "--per-type", "99999") == 2

    def test_manifest_written(self, out):
        assert run("gen", "--per-type", "2", "--out", "m.jsonl") == 0
        manifest = json.loads((out / "m.jsonl.manifest.json").read_text())
        assert manifest["command"] == "gen"
        assert manifest["config"]["per_type"] == 2


class TestProbeCommand:
    @pytest.mark.slow
    def test_bow_probe_end_to_end(self, out, corpus_dir):
        code = run(
            "probe", "--encoder", "bow", "--encoder-dim", "48",
            "--train-corpus", corpus_dir / "train.jsonl",
            "--eval-corpus", corpus_dir / "eval.jsonl",
            "--epochs", "2", "--hidden", "48", "--layers", "1",
            "--conditioning", "add", "--beam", "2", "--batch-size", "32",
            "--out-prefix", "bowrun",
        )
        assert code == 0
        report = json.loads((out / "bowrun.report.json").read_text())
        assert report["total"] == 108
        assert set(report["cells"]) == set(json.loads(
            (out / "bowrun.report.json").read_text())["cells"])
        decodes = (out / "bowrun.decodes.jsonl").read_text().strip().splitlines()
        assert len(decodes) == 108
        rec = json.loads(decodes[0])
        assert {"id", "reference", "prediction", "beam", "logprob"} <= set(rec)
        assert (out / "bowrun.ckpt").exists()
        # decode again from the saved checkpoint: byte-identical decodes
        assert run(
            "decode", "--checkpoint", out / "bowrun.ckpt",
            "--eval-corpus", corpus_dir / "eval.jsonl",
            "--encoder", "bow", "--beam", "2", "--out", "again.jsonl",
        ) == 0
        first = [json.loads(x) for x in decodes]
        second = [
            json.loads(x)
            for x in (out / "again.jsonl").read_text().strip().splitlines()
        ]
        assert first == second

    def test_unknown_encoder_exits_2(self, out, corpus_dir):
        assert run(
            "probe", "--encoder", "warp-drive",
            "--train-corpus", corpus_dir / "train.jsonl",
            "--eval-corpus", corpus_dir / "eval.jsonl",
        ) == 2


class TestEvalText:
    def test_report_from_decodes(self, out, corpus_dir):
        corpus_lines = (corpus_dir / "eval.jsonl").read_text().strip().splitlines()
        decodes = []
        for line in corpus_lines:
            rec = json.loads(line)
            decodes.append(
                {"id": rec["id"], "reference": rec["text"],
                 "prediction": rec["text"], "beam": 1, "logprob": 0.0}
            )
        dec_path = out / "perfect.jsonl"
        dec_path.write_text("\n".join(json.dumps(d) for d in decodes) + "\n")
        assert run("eval-text", "--decodes", dec_path,
                   "--corpus", corpus_dir / "eval.jsonl",
                   "--format", "json", "--out", "rep.json") == 0
        report = json.loads((out / "rep.json").read_text())
        assert report["overall_em"] == 100.0
        assert report["shuffled_pct"] == 0.0
        # markdown and csv renderings also work
        assert run("eval-text", "--decodes", dec_path,
                   "--corpus", corpus_dir / "eval.jsonl",
                   "--format", "md", "--out", "rep.md") == 0
        assert "Text recovery report" in (out / "rep.md").read_text()
        assert run("report", "--report", out / "rep.json",
                   "--format", "csv", "--out", "rep.csv") == 0
        assert (out / "rep.csv").read_text().startswith("type_key,")

    def test_malformed_decodes_exit_2(self, out, corpus_dir):
        bad = out / "bad.jsonl"
        bad.write_text("{not json\n")
        assert run("eval-text", "--decodes", bad,
                   "--corpus", corpus_dir / "eval.jsonl") == 2


def _pair(pid, cat, scores):
    return PairRecord(pid, cat, "a cat before yawning", "a cat after yawning",
                      "i0", "i1", *scores)


class TestEvalMM:
    def test_fixture_report(self, out):
        records = [_pair(f"p{i}", "temporal", (9, 1, 2, 8)) for i in range(6)]
        records += [_pair(f"q{i}", "adjective", (1, 9, 8, 2)) for i in range(6)]
        path = out / "pairs.jsonl"
        write_pair_records(records, path)
        assert run("eval-mm", "--pairs", path, "--format", "json",
                   "--out", "mm.json") == 0
        report = json.loads((out / "mm.json").read_text())
        assert report["categories"]["temporal"]["text_score"] == 100.0
        assert report["categories"]["adjective"]["text_score"] == 0.0
        assert report["overall_text"] == 50.0

    def test_malformed_line_number_in_error(self, out, capsys):
        path = out / "pairs.jsonl"
        path.write_text('{"pair_id": "x"}\n')
        assert run("eval-mm", "--pairs", path) == 2

    def test_compare_wilcoxon(self, out):
        a = [_pair(f"p{i}", "temporal", (9, 1, 2, 8)) for i in range(12)]
        b = [_pair(f"p{i}", "temporal", (1, 9, 8, 2)) for i in range(12)]
        pa, pb = out / "a.jsonl", out / "b.jsonl"
        write_pair_records(a, pa)
        write_pair_records(b, pb)
        assert run("eval-mm", "--pairs", pa, "--compare", pb,
                   "--out", "cmp.json") == 0
        cmp_result = json.loads((out / "cmp.json").read_text())
        assert cmp_result["overall"]["text"]["p_value"] < 0.05
        assert cmp_result["overall"]["text"]["significant"] is True


class TestConfigMerging:
    def test_config_file_provides_defaults(self, out):
        cfg = out / "cfg.json"
        cfg.write_text(json.dumps({"per_type": 3, "seed": 9}))
        assert run("gen", "--config", cfg, "--out", "c1.jsonl") == 0
        summary = json.loads((out / "c1.jsonl.summary.json").read_text())
        assert summary["total"] == 108 and summary["seed"] == 9
        # flags override the config file
        assert run("gen", "--config", cfg, "--per-type", "2",
                   "--out", "c2.jsonl") == 0
        assert json.loads((out / "c2.jsonl.summary.json").read_text())["total"] == 72

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            run("--version")
        assert exc.value.code == 0
