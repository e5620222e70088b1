"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS line (visible with ``pytest -s``) after its
assertions hold.  The proof-of-concept pipeline is trained once in a
session fixture and shared; its protocol mirrors the evaluation design:
probes train on a large generated corpus (one seed) and are scored on a
held-out 36-cell x 50 corpus (another seed).
"""

from __future__ import annotations

import itertools
import time

import numpy as np
import pytest

from capprobe.encoders import BowEncoder, ShuffleWrapper, Tokenizer
from capprobe.grammar import (
    ALL_CELLS,
    bundled_vocabulary_path,
    cell_capacity,
    generate_corpus,
    load_vocabulary,
    parse,
    realize,
    swap_variant,
)
from capprobe.mmeval import (
    PairRecord,
    binom_ci,
    image_score,
    mm_report,
    text_score,
    wilcoxon_signed_rank,
)
from capprobe.probe import TrainConfig, decode_embeddings, train_probe, autoencode_train
from capprobe.textmetrics import bleu4, exact_match

TRAIN_SEED = 11
EVAL_SEED = 22
SHUFFLE_SEED = 3
TRAIN_PER_TYPE = 300
EVAL_PER_TYPE = 50
RUNTIME_BUDGET_S = 1800.0

PIPELINE_CFG = TrainConfig(
    batch_size=64,
    epochs=20,
    hidden=256,
    layers=2,
    seed=0,
    conditioning="add",
    beam=5,
)


def _passed(line: str) -> None:
    print(f"\nACCEPTANCE PASS: {line}")


@pytest.fixture(scope="session")
def vocab():
    return load_vocabulary(bundled_vocabulary_path())


@pytest.fixture(scope="session")
def eval_corpus(vocab):
    return generate_corpus(vocab, EVAL_PER_TYPE, seed=EVAL_SEED)


@pytest.fixture(scope="session")
def train_corpus(vocab):
    overrides = {
        cell: min(TRAIN_PER_TYPE, cell_capacity(cell, vocab))
        for cell in ALL_CELLS
        if cell_capacity(cell, vocab) < TRAIN_PER_TYPE
    }
    return generate_corpus(
        vocab, TRAIN_PER_TYPE, seed=TRAIN_SEED, per_type_overrides=overrides
    )


@pytest.fixture(scope="session")
def pipeline(vocab, train_corpus, eval_corpus):
    """Train both probes once: pooled autoencoder + probe, and bow + probe."""
    tokenizer = Tokenizer.from_vocabulary(vocab)
    t0 = time.time()

    autoenc = autoencode_train(train_corpus, PIPELINE_CFG, tokenizer)
    shuffled = ShuffleWrapper(autoenc, seed=SHUFFLE_SEED)
    auto_ckpt = train_probe(shuffled, train_corpus, PIPELINE_CFG, tokenizer=tokenizer)
    auto_eval_table = shuffled.encode_batch([(p.id, p.text) for p in eval_corpus])
    auto_decodes = decode_embeddings(auto_ckpt, auto_eval_table.matrix, beam=5)

    bow = BowEncoder(dim=PIPELINE_CFG.hidden, seed=0)
    bow_ckpt = train_probe(bow, train_corpus, PIPELINE_CFG, tokenizer=tokenizer)
    bow_eval_table = bow.encode_batch([(p.id, p.text) for p in eval_corpus])
    bow_decodes = decode_embeddings(bow_ckpt, bow_eval_table.matrix, beam=5)

    elapsed = time.time() - t0
    return {
        "tokenizer": tokenizer,
        "autoenc": autoenc,
        "shuffled": shuffled,
        "auto_ckpt": auto_ckpt,
        "auto_decodes": auto_decodes,
        "bow": bow,
        "bow_ckpt": bow_ckpt,
        "bow_decodes": bow_decodes,
        "elapsed": elapsed,
    }


class TestProofOfConceptSeparation:
    def test_autoencoder_beats_bow_by_30_points(self, pipeline, eval_corpus,
                                                train_corpus):
        auto_em = float(
            np.mean(
                [exact_match(p.text, t) for p, (t, _) in zip(eval_corpus,
                                                             pipeline["auto_decodes"])]
            )
        )
        bow_em = float(
            np.mean(
                [exact_match(p.text, t) for p, (t, _) in zip(eval_corpus,
                                                             pipeline["bow_decodes"])]
            )
        )
        assert auto_em >= 0.85, f"pooled autoencoder held-out EM {auto_em:.3f} < 0.85"
        assert auto_em - bow_em >= 0.30, (
            f"separation {auto_em - bow_em:.3f} < 0.30 "
            f"(autoenc {auto_em:.3f}, bow {bow_em:.3f})"
        )
        assert pipeline["elapsed"] <= RUNTIME_BUDGET_S, (
            f"pipeline took {pipeline['elapsed']:.0f}s > {RUNTIME_BUDGET_S:.0f}s"
        )
        _passed(
            "proof-of-concept separation: "
            f"autoenc EM {auto_em:.3f} >= 0.85, bow EM {bow_em:.3f}, "
            f"gap {auto_em - bow_em:.3f} >= 0.30, "
            f"runtime {pipeline['elapsed']:.0f}s <= {RUNTIME_BUDGET_S:.0f}s"
        )

    def test_train_em_at_least_heldout_em(self, pipeline, train_corpus, eval_corpus):
        sample = train_corpus[:: max(1, len(train_corpus) // 400)][:400]
        table = pipeline["shuffled"].encode_batch([(p.id, p.text) for p in sample])
        decs = decode_embeddings(pipeline["auto_ckpt"], table.matrix, beam=5)
        train_em = float(np.mean([exact_match(p.text, t)
                                  for p, (t, _) in zip(sample, decs)]))
        heldout_em = float(
            np.mean([exact_match(p.text, t)
                     for p, (t, _) in zip(eval_corpus, pipeline["auto_decodes"])])
        )
        assert train_em >= heldout_em - 0.02
        _passed(
            f"generalization direction: train EM {train_em:.3f} >= "
            f"held-out EM {heldout_em:.3f} - 0.02"
        )


class TestOrderInformationImpossibility:
    def test_swap_pairs_decode_identically(self, pipeline, eval_corpus):
        bow = pipeline["bow"]
        ckpt = pipeline["bow_ckpt"]
        pairs = [(p, swap_variant(p)) for p in eval_corpus if p.order_sensitive]
        assert len(pairs) >= 900
        originals = np.stack([bow.encode_text(p.text) for p, _ in pairs])
        swapped = np.stack([bow.encode_text(s.text) for _, s in pairs])
        dec_o = decode_embeddings(ckpt, originals, beam=5)
        dec_s = decode_embeddings(ckpt, swapped, beam=5)
        mismatches = [
            (p.text, do, ds)
            for (p, _), (do, _), (ds, _) in zip(pairs, dec_o, dec_s)
            if do != ds
        ]
        assert not mismatches, f"{len(mismatches)} swap pairs decoded differently"
        joint_over = [
            (p, s, do)
            for (p, s), (do, _) in zip(pairs, dec_o)
            if exact_match(p.text, do) + exact_match(s.text, do) > 1
        ]
        assert not joint_over, "a pair scored two exact matches"
        _passed(
            f"order impossibility: {len(pairs)} bow swap pairs decode "
            "byte-identically; joint EM <= 1 per pair on 100% of pairs"
        )


class TestGrammarSoundness:
    def test_round_trip_cells_determinism(self, vocab, train_corpus, eval_corpus):
        prompts = list(train_corpus) + list(eval_corpus)
        assert len(prompts) >= 10_000
        for p in prompts:
            assert parse(p.text, vocab) == p.spec
            assert realize(p.spec) == p.text
        cells = {p.type_key for p in eval_corpus}
        assert cells == set(ALL_CELLS)
        assert len(ALL_CELLS) == 36
        again = generate_corpus(vocab, EVAL_PER_TYPE, seed=EVAL_SEED)
        assert [p.to_json() for p in again] == [p.to_json() for p in eval_corpus]
        _passed(
            f"grammar soundness: {len(prompts)} round trips exact, "
            "36-cell coverage, byte-identical regeneration"
        )


class TestNumerics:
    def test_gradient_checks_all_layers(self):
        from capprobe.nn import (
            Embedding,
            GRUCell,
            LayerNorm,
            Linear,
            MemoryAttention,
            SoftmaxCrossEntropy,
        )

        eps = 1e-5
        rng = np.random.default_rng(0)

        def numeric(f, arr):
            g = np.zeros_like(arr)
            it = np.nditer(arr, flags=["multi_index"])
            while not it.finished:
                i = it.multi_index
                old = arr[i]
                arr[i] = old + eps
                fp = f()
                arr[i] = old - eps
                fm = f()
                arr[i] = old
                g[i] = (fp - fm) / (2 * eps)
                it.iternext()
            return g

        def check(analytic, num):
            denom = np.maximum(np.abs(num), 1e-8)
            rel = np.abs(analytic - num) / denom
            ok = (rel <= 1e-4) | (np.abs(analytic - num) <= 1e-7)
            assert ok.all(), f"max rel err {rel.max():.2e}"

        checked = 0

        lin = Linear(5, 4, rng, "l", dtype=np.float64)
        x = rng.standard_normal((3, 5))
        pr = rng.standard_normal((3, 4))
        _, cache = lin.forward(x)
        dx = lin.backward(pr, cache)
        f = lambda: float((lin.forward(x)[0] * pr).sum())
        check(dx, numeric(f, x))
        for p in lin.parameters():
            check(p.grad, numeric(f, p.value))
            checked += 1

        ln = LayerNorm(5, "n", dtype=np.float64)
        ln.gamma.value[:] = rng.standard_normal(5)
        prn = rng.standard_normal((3, 5))
        _, cache = ln.forward(x)
        dx = ln.backward(prn, cache)
        f = lambda: float((ln.forward(x)[0] * prn).sum())
        check(dx, numeric(f, x))
        for p in ln.parameters():
            check(p.grad, numeric(f, p.value))
            checked += 1

        att = MemoryAttention(5, rng, "a", dtype=np.float64)
        q = rng.standard_normal((3, 5))
        mem = rng.standard_normal((3, 1, 5))
        pra = rng.standard_normal((3, 5))
        _, cache = att.forward(q, mem)
        dq, dmem = att.backward(pra, cache)
        f = lambda: float((att.forward(q, mem)[0] * pra).sum())
        check(dq, numeric(f, q))
        check(dmem, numeric(f, mem))
        for p in att.parameters():
            check(p.grad, numeric(f, p.value))
            checked += 1

        gru = GRUCell(5, 4, rng, "g", dtype=np.float64)
        h = rng.standard_normal((3, 4))
        prg = rng.standard_normal((3, 4))
        _, cache = gru.forward(x, h)
        dx, dh = gru.backward(prg, cache)
        f = lambda: float((gru.forward(x, h)[0] * prg).sum())
        check(dx, numeric(f, x))
        check(dh, numeric(f, h))
        for p in gru.parameters():
            check(p.grad, numeric(f, p.value))
            checked += 1

        emb = Embedding(7, 5, rng, "e", dtype=np.float64)
        head = Linear(5, 7, rng, "h2", dtype=np.float64)
        ce = SoftmaxCrossEntropy()
        ids = rng.integers(0, 7, 6)
        tg = rng.integers(0, 7, 6)
        mask = np.ones(6)

        def f():
            e, _ = emb.forward(ids)
            logits, _ = head.forward(e)
            return ce.forward(logits, tg, mask)[0]

        e, ec = emb.forward(ids)
        logits, hc = head.forward(e)
        _, cc = ce.forward(logits, tg, mask)
        demb_in = head.backward(ce.backward(cc), hc)
        emb.backward(demb_in, ec)
        check(emb.table.grad, numeric(f, emb.table.value))
        checked += 1

        _passed(
            f"numerics: {checked} parameter gradient checks pass at rel err < 1e-4 "
            "(64-bit, central differences)"
        )

    def test_beam_equals_exhaustive_argmax(self):
        from capprobe.probe import ProbeModel

        rng = np.random.default_rng(5)
        tok = Tokenizer([f"w{i}" for i in range(6)])  # 10 tokens total
        cfg = TrainConfig(hidden=16, layers=1, max_len=4)
        model = ProbeModel(8, len(tok), cfg, rng)
        banned = {tok.pad_id, tok.bos_id}
        n_exp = len(tok) - 3

        def exhaustive(e):
            cond = model.condition_only(e[None, :])
            pool = []

            def rec(last, states, seq, score, depth):
                logp, ns = model.step_decode(np.array([last]), states, cond)
                lp = logp[0].astype(np.float64)
                for v in range(len(tok)):
                    if v in banned:
                        continue
                    s = score + float(lp[v])
                    if v == tok.eos_id:
                        pool.append((s / (len(seq) + 1), tuple(seq)))
                    elif depth + 1 < cfg.max_len:
                        rec(v, ns, seq + [v], s, depth + 1)
                    else:
                        pool.append((s / (len(seq) + 1), tuple(seq + [v])))

            states0 = [np.zeros((1, cfg.hidden), np.float32) for _ in model.blocks]
            rec(tok.bos_id, states0, [], 0.0, 0)
            best = min(pool, key=lambda t: (-t[0], len(t[1]), t[1]))
            return tok.decode_text(best[1]), best[0]

        trials = 0
        for _ in range(5):
            e = rng.standard_normal(8).astype(np.float32)
            got = decode_embeddings((model, tok, cfg), e[None, :],
                                    beam=n_exp**cfg.max_len)[0]
            assert got == exhaustive(e)  # zero tolerance
            trials += 1
        _passed(
            f"numerics: beam search equals exhaustive argmax on {trials} toy "
            "inputs (vocab <= 10, length <= 4), zero tolerance"
        )


class TestMetricAnchors:
    def test_anchors(self):
        assert bleu4("a cat on the left", "a cat on the left") == pytest.approx(100.0)
        anchor = bleu4("a reporter on top of a penguin", "a penguin on top of a hill")
        assert 43.0 <= anchor <= 53.0
        assert exact_match("two physicians on the right",
                           "two physician on the right") == 0
        _passed(
            f"metric anchors: BLEU identity 100, published pair {anchor:.1f} "
            "within 48 +/- 5, morphology EM 0"
        )


class TestMultimodalEval:
    def test_dominant_fixture(self):
        recs = [
            PairRecord(f"p{i}", "temporal", "a cat before yawning",
                       "a cat after yawning", "i0", "i1", 9.0, 1.0, 2.0, 8.0)
            for i in range(100)
        ]
        rep = mm_report(recs)
        assert rep.overall_text == 100.0 and rep.overall_image == 100.0
        _passed("mmeval: dominant-diagonal fixture scores 100/100")

    def test_monte_carlo_quarter(self):
        rng = np.random.default_rng(42)
        n = 100_000
        s = rng.standard_normal((n, 4))
        text = float(np.mean((s[:, 0] > s[:, 2]) & (s[:, 3] > s[:, 1])))
        image = float(np.mean((s[:, 0] > s[:, 1]) & (s[:, 3] > s[:, 2])))
        assert abs(text - 0.25) <= 0.01
        assert abs(image - 0.25) <= 0.01
        _passed(
            f"mmeval: i.i.d. Monte Carlo (n=1e5) text {100 * text:.2f} and image "
            f"{100 * image:.2f} within 25 +/- 1"
        )

    def test_wilcoxon_matches_enumeration_for_all_n_to_10(self):
        rng = np.random.default_rng(0)

        def oracle(diff):
            diff = np.asarray([d for d in diff if d != 0], dtype=float)
            mag = np.abs(diff)
            order = np.argsort(mag, kind="stable")
            ranks = np.empty(len(diff))
            sm = mag[order]
            i = 0
            while i < len(diff):
                j = i
                while j + 1 < len(diff) and sm[j + 1] == sm[i]:
                    j += 1
                ranks[order[i: j + 1]] = (i + j) / 2 + 1
                i = j + 1
            w = ranks[diff > 0].sum()
            mean = ranks.sum() / 2
            dev = abs(w - mean)
            hits = sum(
                1
                for signs in itertools.product((0, 1), repeat=len(diff))
                if abs(sum(r for r, s in zip(ranks, signs) if s) - mean) >= dev - 1e-12
            )
            return hits / 2 ** len(diff)

        cases = 0
        for n in range(5, 11):
            for _ in range(10):
                x = rng.standard_normal(n)
                y = rng.standard_normal(n)
                _, p, _ = wilcoxon_signed_rank(x, y)
                assert p == pytest.approx(oracle(x - y), abs=1e-10)
                cases += 1
            for _ in range(10):
                x = rng.integers(0, 2, n).astype(float)
                y = rng.integers(0, 2, n).astype(float)
                if np.count_nonzero(x - y) < 5:
                    continue
                _, p, _ = wilcoxon_signed_rank(x, y)
                assert p == pytest.approx(oracle(x - y), abs=1e-10)
                cases += 1
        _passed(
            f"mmeval: Wilcoxon p-values match sign-enumeration oracle on {cases} "
            "samples for all n <= 10"
        )

    def test_wilson_boundaries_exact(self):
        for n in (1, 5, 25, 400):
            assert binom_ci(0, n)[0] == 0.0
            assert binom_ci(n, n)[1] == 1.0
        _passed("mmeval: Wilson CI boundary cases (0,n) and (n,n) exact")

    def test_score_conjunction_semantics(self):
        one_sided = PairRecord("x", "verb-2obj", "a cat chasing a dog",
                               "a cat following a dog", "i0", "i1",
                               10.0, 1.0, 10.0, 1.0)
        assert text_score(one_sided) == 0  # one comparison right, one wrong
        mixed = PairRecord("y", "verb-2obj", "a cat chasing a dog",
                           "a cat following a dog", "i0", "i1",
                           5.0, 1.0, 6.0, 8.0)
        assert text_score(mixed) == 0
        assert image_score(mixed) == 1
        _passed("mmeval: strict-conjunction score semantics")
