"""Hermetic end-to-end run with the toy color model: solid-color image
fixtures must yield perfect downstream matching scores."""

from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from capprobe_extractor.cli import main
from capprobe_extractor.export import export_embeddings, score_pairs
from capprobe_extractor.formats import read_embedding_table
from capprobe_extractor.models import ToyColorModel, load_model

COLORS = {"red": (255, 0, 0), "blue": (0, 0, 255), "green": (0, 255, 0),
          "yellow": (255, 255, 0)}


@pytest.fixture
def fixture_dir(tmp_path):
    for name, rgb in COLORS.items():
        Image.new("RGB", (16, 16), rgb).save(tmp_path / f"{name}.png")
    pairs = []
    names = list(COLORS)
    for k in range(len(names) - 1):
        a, b = names[k], names[k + 1]
        pairs.append(
            {
                "pair_id": f"pair-{k}",
                "category": "adjective",
                "c0": f"a {a} square",
                "c1": f"a {b} square",
                "i0": f"{a}.png",
                "i1": f"{b}.png",
            }
        )
    (tmp_path / "pairs.json").write_text(json.dumps({"pairs": pairs}))
    return tmp_path


class TestToyModel:
    def test_solid_color_image_features(self, fixture_dir):
        model = ToyColorModel()
        red = model.encode_image(fixture_dir / "red.png")
        assert np.allclose(red, [1.0, 0.0, 0.0], atol=1e-6)

    def test_color_caption_features(self):
        model = ToyColorModel()
        feats = model.encode_texts(["a red square", "a blue square"])
        assert np.allclose(feats[0], [1, 0, 0]) and np.allclose(feats[1], [0, 0, 1])

    def test_registry_loads_it(self):
        assert isinstance(load_model("toy-color"), ToyColorModel)


class TestExportPipeline:
    def test_export_embeddings(self, fixture_dir):
        corpus = fixture_dir / "corpus.jsonl"
        corpus.write_text(
            '{"id": "p1", "text": "a red square"}\n'
            '{"id": "p2", "text": "a blue square"}\n'
        )
        out = fixture_dir / "toy.emb"
        n = export_embeddings("toy-color", corpus, out)
        assert n == 2
        ids, matrix, name = read_embedding_table(out)
        assert ids == ["p1", "p2"] and name == "toy-color"
        assert matrix.shape == (2, 3)

    def test_export_deterministic(self, fixture_dir):
        corpus = fixture_dir / "corpus.jsonl"
        corpus.write_text('{"id": "p1", "text": "a red square"}\n')
        export_embeddings("toy-color", corpus, fixture_dir / "a.emb")
        export_embeddings("toy-color", corpus, fixture_dir / "b.emb")
        assert (fixture_dir / "a.emb").read_bytes() == (fixture_dir / "b.emb").read_bytes()

    def test_duplicate_corpus_ids_rejected(self, fixture_dir):
        corpus = fixture_dir / "dup.jsonl"
        corpus.write_text(
            '{"id": "p1", "text": "x"}\n{"id": "p1", "text": "y"}\n'
        )
        with pytest.raises(ValueError, match="duplicate"):
            export_embeddings("toy-color", corpus, fixture_dir / "d.emb")


class TestScorePipeline:
    def test_perfect_downstream_scores(self, fixture_dir):
        mmeval = pytest.importorskip("capprobe.mmeval")
        out = fixture_dir / "scores.jsonl"
        scored, failed = score_pairs("toy-color", fixture_dir / "pairs.json", out)
        assert scored == 3 and failed == 0
        records = mmeval.read_pair_records(out)
        report = mmeval.mm_report(records)
        assert report.overall_text == 100.0
        assert report.overall_image == 100.0
        print("\nSECONDARY PASS: toy solid-color fixtures score 100/100 downstream")

    def test_unreadable_image_is_per_record_error(self, fixture_dir):
        manifest = json.loads((fixture_dir / "pairs.json").read_text())
        manifest["pairs"][1]["i0"] = "missing.png"
        (fixture_dir / "broken.json").write_text(json.dumps(manifest))
        out = fixture_dir / "scores.jsonl"
        scored, failed = score_pairs("toy-color", fixture_dir / "broken.json", out)
        assert scored == 2 and failed == 1
        lines = [json.loads(x) for x in out.read_text().splitlines()]
        errors = [x for x in lines if "error" in x]
        assert len(errors) == 1 and errors[0]["pair_id"] == "pair-1"

    def test_caption_order_swap_permutes_scores(self, fixture_dir):
        out_a = fixture_dir / "a.jsonl"
        score_pairs("toy-color", fixture_dir / "pairs.json", out_a)
        manifest = json.loads((fixture_dir / "pairs.json").read_text())
        for pair in manifest["pairs"]:
            pair["c0"], pair["c1"] = pair["c1"], pair["c0"]
            pair["i0"], pair["i1"] = pair["i1"], pair["i0"]
        (fixture_dir / "swapped.json").write_text(json.dumps(manifest))
        out_b = fixture_dir / "b.jsonl"
        score_pairs("toy-color", fixture_dir / "swapped.json", out_b)
        a = [json.loads(x) for x in out_a.read_text().splitlines()]
        b = [json.loads(x) for x in out_b.read_text().splitlines()]
        for ra, rb in zip(a, b):
            assert ra["s_c0_i0"] == pytest.approx(rb["s_c1_i1"])
            assert ra["s_c0_i1"] == pytest.approx(rb["s_c1_i0"])


class TestCli:
    def test_export_and_score(self, fixture_dir, capsys):
        corpus = fixture_dir / "corpus.jsonl"
        corpus.write_text('{"id": "p1", "text": "a red square"}\n')
        assert main(["export", "--model", "toy-color", "--corpus", str(corpus),
                     "--out", str(fixture_dir / "t.emb")]) == 0
        assert main(["score", "--model", "toy-color",
                     "--pairs", str(fixture_dir / "pairs.json"),
                     "--out", str(fixture_dir / "s.jsonl")]) == 0
        assert main(["models"]) == 0
        assert "toy-color" in capsys.readouterr().out

    def test_missing_corpus_exits_2(self, fixture_dir):
        assert main(["export", "--model", "toy-color",
                     "--corpus", str(fixture_dir / "nope.jsonl"),
                     "--out", str(fixture_dir / "x.emb")]) == 2
