"""Acceptance criteria, one test per criterion.

Each test registers a PASS/FAIL/SKIP line printed in the terminal summary.
Criteria pinned to published corpus scores need the ASSET / TurkCorpus test
files; run scripts/fetch_eval_data.py on a machine with network access to
place them under data/eval/, or point PARAMINE_DATA_DIR at them. Without
the files those tests skip; everything else runs self-contained.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import (
    eval_data_dir,
    hash_embed_batch,
    load_asset_test,
    load_turk_test,
    record_acceptance,
    repo_root,
)
from paramine import access, embed, index, metrics, mine, tune
from paramine.cli import main as cli_main
from paramine.corpus import Sequence, read_sequences
from paramine.lm import read_arpa, train_from_lines, write_arpa


def _needs_data(criterion: str):
    data = eval_data_dir()
    if data is None:
        record_acceptance(criterion, "SKIP", "eval data not present; see scripts/fetch_eval_data.py")
        pytest.skip("ASSET/TurkCorpus files not available in this environment")
    return data


def _check(criterion: str, ok: bool, detail: str) -> None:
    record_acceptance(criterion, "PASS" if ok else "FAIL", detail)
    assert ok, f"{criterion}: {detail}"


# ---------------------------------------------------------------------------
# published-score criteria (need the real evaluation data)
# ---------------------------------------------------------------------------

class TestPublishedScores:
    def test_identity_asset(self):
        crit = "identity baseline on ASSET test: SARI 20.73 +/- 0.05, FKGL 10.02 +/- 0.05, < 10 s"
        data = _needs_data(crit)
        sources, refs = load_asset_test(data)
        assert len(sources) == 359
        started = time.time()
        preds = [metrics.identity_baseline(s) for s in sources]
        sari = metrics.sari(sources, preds, refs).score
        grade = metrics.fkgl(preds)
        elapsed = time.time() - started
        ok = abs(sari - 20.73) <= 0.05 and abs(grade - 10.02) <= 0.05 and elapsed < 10
        _check(crit, ok, f"sari={sari:.2f} fkgl={grade:.2f} t={elapsed:.1f}s")

    def test_identity_turkcorpus(self):
        crit = "identity baseline on TurkCorpus test: SARI 26.29 +/- 0.05, BLEU 99.36 +/- 0.1"
        data = _needs_data(crit)
        sources, refs = load_turk_test(data)
        preds = [metrics.identity_baseline(s) for s in sources]
        sari = metrics.sari(sources, preds, refs).score
        bleu = metrics.bleu(preds, refs)
        ok = abs(sari - 26.29) <= 0.05 and abs(bleu - 99.36) <= 0.1
        _check(crit, ok, f"sari={sari:.2f} bleu={bleu:.2f}")

    def test_truncate_baselines(self):
        crit = "truncate baseline: ASSET SARI 29.85 +/- 0.3, FKGL 7.91 +/- 0.1; Turk SARI 33.10 +/- 0.3"
        data = _needs_data(crit)
        a_src, a_refs = load_asset_test(data)
        t_src, t_refs = load_turk_test(data)
        a_preds = [metrics.truncate_baseline(s) for s in a_src]
        t_preds = [metrics.truncate_baseline(s) for s in t_src]
        a_sari = metrics.sari(a_src, a_preds, a_refs).score
        a_fkgl = metrics.fkgl(a_preds)
        t_sari = metrics.sari(t_src, t_preds, t_refs).score
        ok = (
            abs(a_sari - 29.85) <= 0.3
            and abs(a_fkgl - 7.91) <= 0.1
            and abs(t_sari - 33.10) <= 0.3
        )
        _check(crit, ok, f"asset sari={a_sari:.2f} fkgl={a_fkgl:.2f} turk sari={t_sari:.2f}")

    def test_gold_reference_loo_asset(self):
        crit = "gold reference LOO on ASSET, 5 seeds: SARI 44.87 +/- 0.6, FKGL 6.49 +/- 0.2"
        data = _needs_data(crit)
        sources, refs = load_asset_test(data)
        saris = []
        fkgls = []
        for seed in range(5):
            report = metrics.gold_reference_loo(sources, refs, seed=seed)
            saris.append(report.sari.score)
            fkgls.append(report.fkgl)
        mean_sari = float(np.mean(saris))
        mean_fkgl = float(np.mean(fkgls))
        ok = abs(mean_sari - 44.87) <= 0.6 and abs(mean_fkgl - 6.49) <= 0.2
        _check(crit, ok, f"sari={mean_sari:.2f} fkgl={mean_fkgl:.2f}")


# ---------------------------------------------------------------------------
# index criteria
# ---------------------------------------------------------------------------

class TestIndexCriteria:
    def test_oracle_equivalence_full_probe(self):
        crit = "index: 1000 queries over 10k vectors, nprobe=k identical to brute force"
        rng = np.random.default_rng(7)
        pts = rng.standard_normal((10000, 16)).astype(np.float32)
        store = embed.quantize_store(
            embed.EmbeddingStore(ids=[str(i) for i in range(10000)], data=pts)
        )
        idx = index.build_index(store, k=100, seed=0)
        params = index.SearchParams(top_k=8, nprobe=100)
        mismatches = 0
        for _ in range(1000):
            q = rng.standard_normal(16).astype(np.float32)
            if idx.search(q, params) != index.brute_force_search(store, q, 8):
                mismatches += 1
        _check(crit, mismatches == 0, f"{mismatches} mismatching queries")

    def test_blob_recall(self):
        crit = "index: 64 blob cells, nprobe=16, recall@8 >= 0.90"
        rng = np.random.default_rng(2024)
        dim, blobs, per = 16, 64, 157
        centers = rng.uniform(-10, 10, size=(blobs, dim))
        pts = np.vstack(
            [c + rng.normal(0, 1.0, size=(per, dim)) for c in centers]
        ).astype(np.float32)
        store = embed.quantize_store(
            embed.EmbeddingStore(ids=[str(i) for i in range(len(pts))], data=pts)
        )
        idx = index.build_index(store, k=64, seed=0)
        params = index.SearchParams(top_k=8, nprobe=16)
        hits = total = 0
        for _ in range(200):
            q = (centers[rng.integers(blobs)] + rng.normal(0, 1.0, size=dim)).astype(
                np.float32
            )
            approx = {rid for rid, _ in idx.search(q, params)}
            exact = {rid for rid, _ in index.brute_force_search(store, q, 8)}
            hits += len(approx & exact)
            total += len(exact)
        recall = hits / total
        _check(crit, recall >= 0.90, f"recall@8={recall:.3f}")


# ---------------------------------------------------------------------------
# planted-paraphrase mining
# ---------------------------------------------------------------------------

class TestPlantedMining:
    WORDS = (
        "alpha bravo charlie delta echo foxtrot golf hotel india juliet kilo "
        "lima mike november oscar papa quebec romeo sierra tango uniform "
        "victor whiskey xray yankee zulu"
    ).split()

    def _sentence(self, rng) -> str:
        return " ".join(rng.choice(self.WORDS) for _ in range(8)).capitalize() + "."

    def test_planted_pairs_recovered(self):
        crit = "mining: >= 48/50 planted pairs, 0 same-document pairs, deterministic hash x3"
        rng = np.random.default_rng(99)
        words = np.random.default_rng(4242)
        n, dim, planted = 1000, 16, 50

        def unit(v):
            return v / np.linalg.norm(v)

        vectors = np.zeros((n, dim), dtype=np.float32)
        seqs = []
        for i in range(planted):
            base = unit(rng.standard_normal(dim))
            vectors[2 * i] = unit(base + 0.004 * rng.standard_normal(dim))
            vectors[2 * i + 1] = unit(base + 0.004 * rng.standard_normal(dim))
            for j in (2 * i, 2 * i + 1):
                seqs.append(Sequence(f"s{j}", f"doc{j}", 0, 0, self._sentence(words)))
        for r in range(2 * planted, n):
            vectors[r] = unit(rng.standard_normal(dim))
            seqs.append(Sequence(f"s{r}", f"doc{r}", 0, 0, self._sentence(words)))

        # planted surfaces must themselves pass the distinctness filter
        assert all(
            mine.levenshtein_ratio(seqs[2 * i].text, seqs[2 * i + 1].text) >= 0.2
            for i in range(planted)
        )

        store = embed.quantize_store(
            embed.EmbeddingStore(ids=[s.seq_id for s in seqs], data=vectors)
        )
        idx = index.build_index(store, seed=0)
        hashes = []
        pairs = []
        for _ in range(3):
            pairs = mine.mine_pairs(seqs, store, idx, cfg=mine.MiningConfig(), nprobe=16)
            buf = io.StringIO()
            mine.write_pairs(pairs, buf)
            hashes.append(hashlib.sha256(buf.getvalue().encode()).hexdigest())

        recovered = {frozenset((p.query.seq_id, p.candidate.seq_id)) for p in pairs}
        planted_sets = {frozenset((f"s{2*i}", f"s{2*i+1}")) for i in range(planted)}
        found = len(recovered & planted_sets)
        same_doc = sum(1 for p in pairs if p.query.doc_id == p.candidate.doc_id)
        deterministic = len(set(hashes)) == 1
        ok = found >= 48 and same_doc == 0 and deterministic
        _check(crit, ok, f"found={found}/50 same_doc={same_doc} deterministic={deterministic}")


# ---------------------------------------------------------------------------
# language model criteria
# ---------------------------------------------------------------------------

class TestLmCriteria:
    def test_normalization_and_arpa_roundtrip(self):
        crit = "kneser-ney: 50 random corpora normalize to 1 +/- 1e-6; ARPA roundtrip 1e-5"
        import random

        rng = random.Random(17)
        worst_norm = 0.0
        worst_arpa = 0.0
        for _ in range(50):
            vocab = [f"w{i}" for i in range(rng.randint(2, 20))]
            lines = [
                " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8)))
                for _ in range(rng.randint(2, 12))
            ]
            order = rng.randint(1, 3)
            model = train_from_lines(lines, order=order)
            contexts = [g for g in model.logprobs if len(g) < model.order]
            contexts.append(("unseen-context",))
            for ctx in contexts:
                total = sum(model.conditional(w, ctx) for w in model.vocab)
                worst_norm = max(worst_norm, abs(total - 1.0))
            buf = io.StringIO()
            write_arpa(model, buf)
            buf.seek(0)
            clone = read_arpa(buf)
            for text in lines[:3] + ["zzz unseen words here"]:
                worst_arpa = max(worst_arpa, abs(clone.score(text) - model.score(text)))
        ok = worst_norm <= 1e-6 and worst_arpa <= 1e-5
        _check(crit, ok, f"max |sum-1|={worst_norm:.2e} max roundtrip delta={worst_arpa:.2e}")


# ---------------------------------------------------------------------------
# control-token criteria
# ---------------------------------------------------------------------------

class TestAccessCriteria:
    def test_tokens(self):
        crit = "controls: 100->80 chars renders <NumChars_80%>; free insertions; identical => all 100%"
        token = access.format_token("NumChars", access.char_ratio("x" * 100, "y" * 80))
        levsim = access.replace_only_levsim("abc", "abcxyz")
        table = access.FrequencyTable({"cat": 1, "sat": 2, "mat": 3})
        text = "The cat sat on the mat."
        controls = access.compute_controls(text, text, table)
        all_100 = controls is not None and all(
            t.endswith("_100%>") for t in controls.tokens()
        )
        ok = token == "<NumChars_80%>" and levsim == 1.0 and all_100
        _check(crit, ok, f"token={token} levsim={levsim} identical_all_100={all_100}")


# ---------------------------------------------------------------------------
# tuner criteria
# ---------------------------------------------------------------------------

class TestTunerCriteria:
    def test_sphere_convergence_20_seeds(self):
        crit = "tuner: within 0.05 of sphere optimum on >= 18/20 seeds, exactly 64 evals"
        target = np.array([0.8, 0.8, 0.8, 0.8])

        def objective(point):
            return -float(np.sum((point - target) ** 2))

        close = 0
        eval_counts = set()
        for seed in range(20):
            calls = 0

            def counted(point):
                nonlocal calls
                calls += 1
                return objective(point)

            res = tune.one_plus_one(counted, budget=64, seed=seed)
            eval_counts.add(calls)
            if np.abs(res.best_point - target).max() < 0.05:
                close += 1
        ok = close >= 18 and eval_counts == {64}
        _check(crit, ok, f"close={close}/20 eval_counts={sorted(eval_counts)}")

    def test_prior_knowledge_roundings(self):
        crit = "prior-knowledge controls reproduce 0.8 / 0.95 / 0.4 roundings"
        got = []
        for ratio in (0.8, 0.95, 0.4):
            sources = ["x" * 200] * 50
            simple = ["x" * int(round(200 * ratio))] * 50
            got.append(tune.prior_knowledge_controls(sources, simple).num_chars)
        ok = [round(g, 2) for g in got] == [0.8, 0.95, 0.4]
        _check(crit, ok, f"got={got}")


# ---------------------------------------------------------------------------
# end-to-end with the toy simplifier
# ---------------------------------------------------------------------------

class TestEndToEnd:
    BANK = (
        "harbor cargo ships distant ports morning river valley mountains quiet "
        "gentle chess tournament players towns bread bakery smell comets sky "
        "observatory farmers tomatoes market weekend bridge engineers schedule "
        "library archive records winter garden flowers spring concert orchestra "
        "melody museum paintings sculpture festival lanterns evening travelers "
        "station railway signal forest rangers wildlife lanterns workshop tools"
    ).split()

    def _family(self, rng) -> tuple[str, str]:
        words = [self.BANK[i] for i in rng.choice(len(self.BANK), size=7, replace=False)]
        a = "the {} {} carried {} toward the {} {} near {}".format(*words[:6])
        b = "near {} the {} {} carried {} toward the {} {}".format(
            words[5], words[0], words[1], words[2], words[3], words[4]
        )
        return a.capitalize() + ".", b.capitalize() + "."

    def test_pipeline_under_five_minutes(self, tmp_path):
        crit = "end-to-end toy pipeline on 5k sentences: < 5 min, tuned SARI >= midpoint SARI"
        started = time.time()
        rng = np.random.default_rng(31337)

        docs = []
        for i in range(2500):
            a, b = self._family(rng)
            docs.append({"doc_id": f"d{i}a", "text": a})
            docs.append({"doc_id": f"d{i}b", "text": b})
        docs_path = tmp_path / "docs.ndjson"
        docs_path.write_text("".join(json.dumps(d) + "\n" for d in docs))

        seqs_path = tmp_path / "seqs.tsv"
        assert cli_main(["extract", "--input", str(docs_path), "--output", str(seqs_path)]) == 0
        with open(seqs_path, encoding="utf-8") as fp:
            seqs = read_sequences(fp)
        assert len(seqs) == 5000

        emb_path = tmp_path / "emb.pmeb"
        vecs = hash_embed_batch([s.text for s in seqs], dim=24)
        embed.write_store_path(
            embed.EmbeddingStore(ids=[s.seq_id for s in seqs], data=vecs), str(emb_path)
        )
        tr_path = tmp_path / "emb_q.pmeb"
        assert cli_main([
            "transform", "--input", str(emb_path), "--output", str(tr_path),
            "--out-dim", "16", "--seed", "0",
        ]) == 0
        idx_path = tmp_path / "index.pmix"
        assert cli_main([
            "build-index", "--input", str(tr_path), "--output", str(idx_path), "--seed", "0",
        ]) == 0

        pairs_path = tmp_path / "pairs.tsv"
        assert cli_main([
            "mine", "--sequences", str(seqs_path), "--store", str(tr_path),
            "--index", str(idx_path), "--output", str(pairs_path),
            "--dist-max", "0.8", "--nprobe", "16",
        ]) == 0
        n_pairs = len(pairs_path.read_text().splitlines())
        assert n_pairs > 100

        prefix = tmp_path / "access"
        assert cli_main([
            "preprocess-access", "--pairs", str(pairs_path), "--output-prefix", str(prefix),
        ]) == 0
        assert (tmp_path / "access.src").exists()

        # validation corpus: sources with truncated references
        val_sources = [s.text for s in seqs[:30]]
        val_src_path = tmp_path / "valid.src"
        val_src_path.write_text("".join(s + "\n" for s in val_sources))
        val_ref_path = tmp_path / "valid.ref"
        val_ref_path.write_text(
            "".join(metrics.truncate_baseline(s, 0.6) + "\n" for s in val_sources)
        )

        tuned_path = tmp_path / "tuned.json"
        assert cli_main([
            "tune", "--sources", str(val_src_path), "--refs", str(val_ref_path),
            "--toy", "--budget", "64", "--seed", "0", "--output", str(tuned_path),
        ]) == 0
        tuned = json.loads(tuned_path.read_text())

        midpoint_path = tmp_path / "midpoint.json"
        assert cli_main([
            "tune", "--sources", str(val_src_path), "--refs", str(val_ref_path),
            "--toy", "--budget", "1", "--seed", "0", "--output", str(midpoint_path),
        ]) == 0
        midpoint = json.loads(midpoint_path.read_text())

        # full-report evaluation of the tuned controls through the CLI
        table = access.FrequencyTable.from_texts(val_sources)
        toy = tune.ToySimplifier(table)
        controls = access.ControlValues(
            num_chars=tuned["controls"]["NumChars"],
            lev_sim=tuned["controls"]["LevSim"],
            word_freq=tuned["controls"]["WordFreq"],
            dep_tree_depth=tuned["controls"]["DepTreeDepth"],
        )
        preds = [toy(access.prepend_inference_tokens(s, controls)) for s in val_sources]
        preds_path = tmp_path / "preds.txt"
        preds_path.write_text("".join(p + "\n" for p in preds))
        report_path = tmp_path / "report.json"
        assert cli_main([
            "evaluate", "--sources", str(val_src_path), "--predictions", str(preds_path),
            "--refs", str(val_ref_path), "--output", str(report_path),
        ]) == 0
        report = json.loads(report_path.read_text())

        elapsed = time.time() - started
        ok = (
            elapsed < 300
            and tuned["sari"] >= midpoint["sari"]
            and report["sari"] == pytest.approx(tuned["sari"], abs=1e-6)
        )
        _check(
            crit,
            ok,
            f"t={elapsed:.0f}s pairs={n_pairs} tuned={tuned['sari']:.2f} midpoint={midpoint['sari']:.2f}",
        )


# ---------------------------------------------------------------------------
# secondary component: the bridge package
# ---------------------------------------------------------------------------

BRIDGE = repo_root() / "bridge"


def _bridge_ready() -> bool:
    return (
        shutil.which("node") is not None
        and (BRIDGE / "dist" / "embed-cli.js").exists()
        and (BRIDGE / "dist" / "serve.js").exists()
    )


def _needs_bridge(criterion: str) -> None:
    if not _bridge_ready():
        record_acceptance(criterion, "SKIP", "bridge not built (cd bridge && npm install && npm run build)")
        pytest.skip("bridge dist not available")


class TestSecondaryBridge:
    def test_echo_server_matches_identity_baseline(self, tmp_path):
        crit = "secondary: echo server + evaluate equals the identity baseline exactly"
        _needs_bridge(crit)
        sources = [
            "The committee deliberated extensively about the proposal.",
            "A gentle river crossed the quiet valley beneath tall mountains.",
            "Researchers published a comprehensive analysis of climate data.",
        ]
        references = [[metrics.truncate_baseline(s, 0.7)] for s in sources]
        client = tune.SubprocessModelClient(
            ["node", str(BRIDGE / "dist" / "serve.js"), "--echo"]
        )
        controls = access.ControlValues(0.9, 0.65, 0.8, 1.0)
        prefixed = [access.prepend_inference_tokens(s, controls) for s in sources]
        outputs = client.simplify_batch(prefixed)
        assert outputs == sources  # control tokens stripped, text untouched
        via_server = metrics.evaluate(sources, outputs, references)
        identity = metrics.evaluate(
            sources, [metrics.identity_baseline(s) for s in sources], references
        )
        ok = (
            via_server.sari.score == identity.sari.score
            and via_server.fkgl == identity.fkgl
            and via_server.bleu == identity.bleu
        )
        _check(crit, ok, f"sari={via_server.sari.score:.2f}")

    def test_echo_server_reproduces_asset_identity_sari(self):
        crit = "secondary: echo server on ASSET reproduces SARI 20.73 +/- 0.05 over the protocol"
        _needs_bridge(crit)
        data = _needs_data(crit)
        sources, refs = load_asset_test(data)
        client = tune.SubprocessModelClient(
            ["node", str(BRIDGE / "dist" / "serve.js"), "--echo"]
        )
        controls = access.ControlValues(0.95, 0.75, 0.8, 1.0)
        outputs = client.simplify_batch(
            [access.prepend_inference_tokens(s, controls) for s in sources]
        )
        sari = metrics.sari(sources, outputs, refs).score
        _check(crit, abs(sari - 20.73) <= 0.05, f"sari={sari:.2f}")

    def test_embedder_output_validates_and_self_queries(self, tmp_path):
        crit = "secondary: embedder output passes header validation; self-query rank 1 within bound"
        _needs_bridge(crit)
        lines = [
            "The harbor handled cargo ships from distant ports.",
            "A gentle river crossed the quiet valley.",
            "Fresh bread filled the small bakery with a pleasant smell.",
            "The observatory tracked comets across the northern sky.",
        ]
        text_path = tmp_path / "lines.txt"
        text_path.write_text("".join(l + "\n" for l in lines))
        out_path = tmp_path / "lines.pmeb"
        proc = subprocess.run(
            [
                "node", str(BRIDGE / "dist" / "embed-cli.js"),
                str(text_path), "--output", str(out_path), "--model", "hash-v1/64",
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        store = embed.read_store_path(str(out_path))
        assert store.ids == [str(i) for i in range(len(lines))]
        assert store.dtype == embed.DTYPE_F32
        assert store.d == 64

        qstore = embed.quantize_store(store)
        bound = float(np.linalg.norm(qstore.quantizer.error_bound()))
        ranks_ok = True
        for row in range(store.n):
            hits = index.brute_force_search(qstore, store.vectors()[row], 1)
            if hits[0][0] != row or hits[0][1] > bound + 1e-6:
                ranks_ok = False
        _check(crit, ranks_ok, f"rows={store.n} bound={bound:.4f}")

    def test_unknown_model_fails_loudly(self, tmp_path):
        crit = "secondary: unknown embedder model exits nonzero with a stderr message"
        _needs_bridge(crit)
        text_path = tmp_path / "l.txt"
        text_path.write_text("hello\n")
        proc = subprocess.run(
            [
                "node", str(BRIDGE / "dist" / "embed-cli.js"),
                str(text_path), "--output", str(tmp_path / "o.pmeb"), "--model", "nope",
            ],
            capture_output=True,
            text=True,
        )
        ok = proc.returncode != 0 and proc.stderr.strip() != ""
        _check(crit, ok, f"rc={proc.returncode}")
