"""Acceptance suite: one test per release criterion, one printed line each.

Run ``pytest tests/test_acceptance.py -v -s`` to see the pass/fail line per
criterion alongside the pytest verdicts.
"""

from __future__ import annotations

import math
import random
import time
from contextlib import contextmanager

import pytest

from intertext.cli import main
from intertext.corpus import Document, LinkRecord, Role, Segment, write_document, write_links
from intertext.evaluation import (
    ConfusionCounts,
    SamplingStrategy,
    build_eval_docs,
    classification_metrics,
    evaluate_run,
    global_rates,
    ir_metrics,
    make_folds,
    sample_negatives,
)
from intertext.matcher import MatchParams, find_raw_candidates
from intertext.pipeline import (
    candidates_to_review,
    reference_pairs,
    run_classification_only,
    run_retrieval_only,
    run_retrieve_rerank,
)
from intertext.rerank import TokenJaccardClassifier
from intertext.retrieval import HashEmbeddingProvider, RankedCandidate, cosine

from helpers import synth_pair_with_links
from test_matcher import oracle_candidates


@contextmanager
def criterion(name: str, budget_s: float | None = None):
    start = time.monotonic()
    try:
        yield
    except Exception:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    elapsed = time.monotonic() - start
    if budget_s is not None:
        assert elapsed < budget_s, f"{name} took {elapsed:.1f}s, budget {budget_s}s"
    print(f"[ACCEPTANCE] {name}: PASS ({elapsed:.2f}s)")


def test_metric_oracle_against_reference_counts():
    """Rates recomputed from hand-checked confusion rows."""
    with criterion("metric oracle vs reference counts"):
        counts = ConfusionCounts(tp=94, fp=211, fn=14, tn=63656)
        fpr, fnr, smr = global_rates(counts)
        assert fpr == pytest.approx(0.0033, abs=0.0001)
        assert fnr == pytest.approx(0.0002, abs=0.0001)
        assert smr == pytest.approx(0.0035, abs=0.0001)
        _, recall, _, _ = classification_metrics(counts)
        assert recall == pytest.approx(0.87, abs=0.005)

        counts_small = ConfusionCounts(tp=93, fp=372, fn=15, tn=63494)
        fpr_s, _, smr_s = global_rates(counts_small)
        assert fpr_s == pytest.approx(0.0058, abs=0.0001)
        assert smr_s == pytest.approx(0.0061, abs=0.0005)


def test_smr_identity_over_random_counts():
    """smr = fpr + fnr exactly, and the counts always partition n."""
    with criterion("SMR identity over 10,000 random counts", budget_s=1.0):
        rng = random.Random(20240803)
        for _ in range(10_000):
            tp, fp, fn = (rng.randint(0, 1_000_000) for _ in range(3))
            tn = rng.randint(1, 1_000_000)
            counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)
            fpr, fnr, smr = global_rates(counts)
            assert smr == fpr + fnr
            assert counts.n == tp + fp + fn + tn


def test_pipeline_equivalence_and_nesting():
    """Exhaustive retrieval reduces rerank to classification-only; depth nests."""
    with criterion("pipeline equivalence and candidate nesting", budget_s=10.0):
        query, source, _ = synth_pair_with_links(50, 80, 25, seed=4242)
        embedder = HashEmbeddingProvider(dim=16, seed=7)
        classifier = TokenJaccardClassifier()
        threshold = 0.25

        exhaustive = run_retrieve_rerank(query, source, 80, threshold, embedder, classifier)
        classify_only = run_classification_only(query, source, threshold, classifier)
        assert reference_pairs(exhaustive) == reference_pairs(classify_only)
        assert len(reference_pairs(exhaustive)) > 0  # non-vacuous

        previous: set = set()
        for k in (1, 5, 20):
            current = reference_pairs(
                run_retrieve_rerank(query, source, k, threshold, embedder, classifier)
            )
            assert previous <= current
            previous = current
        assert previous <= reference_pairs(exhaustive)


def test_matcher_against_brute_force_oracle():
    """Window matcher equals the all-pairs/all-windows oracle; word order is free."""
    with criterion("matcher brute-force oracle", budget_s=5.0):
        query, source, _ = synth_pair_with_links(30, 30, 10, seed=1717, vocab_size=120)
        for min_shared in (2, 3):
            for window in (5, 10):
                params = MatchParams(min_shared=min_shared, window=window)
                assert find_raw_candidates(query, source, params) == oracle_candidates(
                    query, source, params
                )

        reuse_query = Document(
            doc_id="q",
            author="",
            role=Role.QUERY,
            segments=(
                Segment(id="q0", ordinal=0, text="Haesit uox faucibus et inter ruborem atque pallorem"),
            ),
        )
        reuse_source = Document(
            doc_id="s",
            author="",
            role=Role.SOURCE,
            segments=(
                Segment(id="s0", ordinal=0, text="obstipui steteruntque comae et uox faucibus haesit"),
            ),
        )
        found = find_raw_candidates(reuse_query, reuse_source, MatchParams(min_shared=2, window=10))
        assert len(found) == 1
        assert {"uox", "faucibus", "haesit"} <= set(found[0].shared_tokens)


@pytest.fixture(scope="module")
def fold_setup():
    query_corpus, source_corpus, links = synth_pair_with_links(1500, 1400, 545, seed=909)
    return query_corpus, source_corpus, links


def test_fold_protocol(fold_setup):
    """545 links -> five disjoint 109-link folds; documents sized 937/880."""
    with criterion("fold protocol (5 x 109; 937/880 documents)", budget_s=5.0):
        query_corpus, source_corpus, links = fold_setup
        folds = make_folds(links, 5, seed=3)
        assert [len(f.test_links) for f in folds] == [109] * 5
        seen: set = set()
        for fold in folds:
            pairs = {l.pair for l in fold.test_links}
            assert not (pairs & seen)
            seen |= pairs
        assert len(seen) == 545

        q_doc, s_doc, gold = build_eval_docs(folds[0], query_corpus, source_corpus, seed=11)
        assert len(q_doc.segments) == 937
        assert len(s_doc.segments) == 880
        assert len(gold) == 109


def test_workload_accounting(fold_setup):
    """Review counts follow the arithmetic identity, not the fitted models."""
    with criterion("workload accounting on the fold setup", budget_s=60.0):
        query_corpus, source_corpus, links = fold_setup
        fold = make_folds(links, 5, seed=3)[0]
        q_doc, s_doc, gold = build_eval_docs(fold, query_corpus, source_corpus, seed=11)
        embedder = HashEmbeddingProvider(dim=16, seed=1)

        retrieval = run_retrieval_only(q_doc, s_doc, 100, embedder)
        report = evaluate_run(retrieval, gold, q_doc, s_doc)
        assert report["workload"]["candidates_to_review"] == 100 * len(q_doc.segments)
        assert report["workload"]["candidates_to_review"] == 93_700

        rerank = run_retrieve_rerank(q_doc, s_doc, 100, 0.25, embedder, TokenJaccardClassifier())
        rerank_report = evaluate_run(rerank, gold, q_doc, s_doc)
        counts = rerank_report["counts"]
        assert rerank_report["workload"]["candidates_to_review"] == counts["tp"] + counts["fp"]
        assert candidates_to_review(rerank) <= candidates_to_review(retrieval)


def test_ir_metric_properties():
    """Recall monotone in k; exhaustive recall 1; oracle agreement on toys."""
    with criterion("IR metric properties", budget_s=5.0):
        rng = random.Random(66)
        n = 25
        for _ in range(1000):
            order = [f"s{i}" for i in range(n)]
            rng.shuffle(order)
            ranked = {
                "q": [
                    RankedCandidate(source_seg_id=sid, similarity=1 - 0.01 * r, rank=r + 1)
                    for r, sid in enumerate(order)
                ]
            }
            gold = [LinkRecord("q", f"s{i}") for i in rng.sample(range(n), rng.randint(1, 5))]
            ks = list(range(1, n + 1))
            out = ir_metrics(ranked, gold, ks=ks)
            series = [out["recall"][k] for k in ks]
            assert series == sorted(series)
            assert series[-1] == 1.0  # every gold segment is in the index

        # 4-query toy: exhaustive enumeration oracle for MRR / MAP / NDCG
        def ranked_list(ids):
            return [
                RankedCandidate(source_seg_id=i, similarity=1 - 0.01 * r, rank=r + 1)
                for r, i in enumerate(ids)
            ]

        ranked = {
            "q0": ranked_list(["s0", "s1", "s2", "s3"]),
            "q1": ranked_list(["s2", "s0", "s1", "s3"]),
            "q2": ranked_list(["s3", "s2", "s1", "s0"]),
            "q3": ranked_list(["s1", "s3", "s0", "s2"]),
        }
        gold = [
            LinkRecord("q0", "s0"),
            LinkRecord("q1", "s1"),
            LinkRecord("q2", "s2"),
            LinkRecord("q2", "s0"),
            LinkRecord("q3", "s9"),
        ]
        out = ir_metrics(ranked, gold, ks=[2, 4])
        gold_by_q = {"q0": {"s0"}, "q1": {"s1"}, "q2": {"s2", "s0"}, "q3": {"s9"}}
        mrr2, mrr4, aps, ndcg2 = [], [], [], []
        for q in sorted(ranked):
            ids = [c.source_seg_id for c in ranked[q]]
            rel = [1 if i in gold_by_q[q] else 0 for i in ids]
            first = next((i + 1 for i, r in enumerate(rel) if r), None)
            mrr2.append(1 / first if first and first <= 2 else 0.0)
            mrr4.append(1 / first if first and first <= 4 else 0.0)
            hits, ap_sum = 0, 0.0
            for pos, r in enumerate(rel, start=1):
                if r:
                    hits += 1
                    ap_sum += hits / pos
            aps.append(ap_sum / len(gold_by_q[q]))
            dcg = sum(r / math.log2(pos + 1) for pos, r in enumerate(rel[:2], start=1))
            idcg = sum(1 / math.log2(pos + 1) for pos in range(1, min(len(gold_by_q[q]), 2) + 1))
            ndcg2.append(dcg / idcg)
        assert out["mrr"][2] == pytest.approx(sum(mrr2) / 4)
        assert out["mrr"][4] == pytest.approx(sum(mrr4) / 4)
        assert out["map"] == pytest.approx(sum(aps) / 4)
        assert out["ndcg"][2] == pytest.approx(sum(ndcg2) / 4)


def test_negative_sampling_ratios_and_hard_oracle():
    """Exact ratio counts, gold-collision safety, and hard-negative ordering."""
    with criterion("negative sampling ratios and hard oracle", budget_s=5.0):
        query, source, links = synth_pair_with_links(60, 55, 20, seed=3131)
        provider = HashEmbeddingProvider(dim=16, seed=5)
        gold_pairs = {l.pair for l in links}
        id_of_text = {seg.text: seg.id for seg in source.segments}
        qid_of_text = {seg.text: seg.id for seg in query.segments}

        for ratio in (1, 5, 10):
            for strategy in (
                SamplingStrategy.RANDOM_PAIR,
                SamplingStrategy.RANDOM_NEGATIVE,
                SamplingStrategy.HARD_NEGATIVE,
                SamplingStrategy.MIXED,
            ):
                negatives = sample_negatives(
                    strategy, ratio, links, query, source, embed_provider=provider, seed=9
                )
                assert len(negatives) == ratio * len(links)
                for pair in negatives:
                    q_id = qid_of_text[pair.query_text]
                    s_id = id_of_text[pair.candidate_text]
                    assert (q_id, s_id) not in gold_pairs

        # brute-force cosine oracle for hard negatives at ratio 3
        negatives = sample_negatives(
            SamplingStrategy.HARD_NEGATIVE, 3, links, query, source,
            embed_provider=provider, seed=9,
        )
        idx = 0
        for link in links:
            q_vec = provider.embed(["Query: " + query[link.query_seg_id].text])[0]
            scored = []
            for pos, seg in enumerate(source.segments):
                s_vec = provider.embed(["Candidate: " + seg.text])[0]
                scored.append((-cosine(q_vec, s_vec), pos, seg.id))
            blocked = {l.source_seg_id for l in links if l.query_seg_id == link.query_seg_id}
            expected = [sid for _, _, sid in sorted(scored) if sid not in blocked][:3]
            got = [id_of_text[negatives[idx + j].candidate_text] for j in range(3)]
            assert got == expected
            idx += 3


def test_end_to_end_desk_run(tmp_path):
    """CLI evaluate on a 1,000-segment corpus: deterministic and fast."""
    with criterion("end-to-end desk run (CLI evaluate, byte-identical)", budget_s=60.0):
        query, source, links = synth_pair_with_links(500, 500, 60, seed=47)
        q_path = tmp_path / "query.csv"
        s_path = tmp_path / "source.csv"
        l_path = tmp_path / "links.csv"
        write_document(query, q_path)
        write_document(source, s_path)
        write_links(links, l_path)

        argv = [
            "evaluate",
            "--query-corpus", str(q_path),
            "--source-corpus", str(s_path),
            "--links", str(l_path),
            "--arch", "rerank",
            "--k", "10",
            "--threshold", "0.25",
            "--folds", "5",
            "--seed", "13",
            "--q-size", "200",
            "--s-size", "180",
            "--ks", "1,5,10",
        ]
        first = tmp_path / "report1.json"
        second = tmp_path / "report2.json"
        assert main(argv + ["--report", str(first)]) == 0
        assert main(argv + ["--report", str(second)]) == 0
        assert first.read_bytes() == second.read_bytes()
