"""Metrics, folds, evaluation documents, and negative sampling."""

from __future__ import annotations

import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from intertext.corpus import Document, LinkRecord, Role, Segment
from intertext.errors import ConfigurationError, UndefinedMetricError, ValidationError
from intertext.evaluation import (
    ConfusionCounts,
    SamplingStrategy,
    TrainingPair,
    build_eval_docs,
    classification_metrics,
    confusion,
    evaluate_folds,
    evaluate_run,
    export_training_pairs,
    global_rates,
    ir_metrics,
    load_training_pairs,
    make_folds,
    per_query_mean,
    positive_pairs,
    sample_negatives,
)
from intertext.pipeline import Architecture, CandidateMatch, RunConfig
from intertext.rerank import Label
from intertext.retrieval import HashEmbeddingProvider, RankedCandidate, cosine

from helpers import synth_pair_with_links


def _match(q, s, label=Label.REFERENCE, origin=Architecture.CLASSIFICATION_ONLY):
    return CandidateMatch(query_seg_id=q, source_seg_id=s, label=label, origin=origin)


def _grid_docs(nq, ns):
    query = Document(
        doc_id="q",
        author="",
        role=Role.QUERY,
        segments=tuple(Segment(id=f"q{i}", ordinal=i, text=f"verba {i}") for i in range(nq)),
    )
    source = Document(
        doc_id="s",
        author="",
        role=Role.SOURCE,
        segments=tuple(Segment(id=f"s{i}", ordinal=i, text=f"fons {i}") for i in range(ns)),
    )
    return query, source


class TestConfusion:
    def test_empty_predictions_and_gold(self):
        query, source = _grid_docs(2, 2)
        counts = confusion([], [], query, source)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (0, 0, 0, 4)

    def test_enumerated_three_by_three(self):
        query, source = _grid_docs(3, 3)
        gold = [LinkRecord("q0", "s0"), LinkRecord("q1", "s1")]
        predictions = [_match("q0", "s0"), _match("q2", "s2")]
        counts = confusion(predictions, gold, query, source)
        assert (counts.tp, counts.fp, counts.fn, counts.tn) == (1, 1, 1, 6)

    def test_perfect_prediction(self):
        query, source = _grid_docs(3, 4)
        gold = [LinkRecord("q0", "s1"), LinkRecord("q2", "s3")]
        predictions = [_match("q0", "s1"), _match("q2", "s3")]
        counts = confusion(predictions, gold, query, source)
        assert counts.fp == counts.fn == 0
        assert counts.n == 12

    def test_gold_outside_grid_rejected(self):
        query, source = _grid_docs(2, 2)
        with pytest.raises(ValidationError, match="outside"):
            confusion([], [LinkRecord("q0", "missing")], query, source)

    def test_no_reference_predictions_not_counted(self):
        query, source = _grid_docs(2, 2)
        predictions = [_match("q0", "s0", label=Label.NO_REFERENCE)]
        counts = confusion(predictions, [], query, source)
        assert counts.fp == 0 and counts.tn == 4

    def test_partition_property(self):
        query, source, links = synth_pair_with_links(8, 9, 4, seed=2)
        predictions = [_match(l.query_seg_id, l.source_seg_id) for l in links[:2]]
        counts = confusion(predictions, links, query, source)
        assert counts.n == len(query.segments) * len(source.segments)


class TestGlobalRates:
    def test_low_error_confusion_row(self):
        # hand-checked: n=63975, fpr=211/n, fnr=14/n
        counts = ConfusionCounts(tp=94, fp=211, fn=14, tn=63656)
        fpr, fnr, smr = global_rates(counts)
        assert fpr == pytest.approx(0.0033, abs=0.0001)
        assert fnr == pytest.approx(0.0002, abs=0.0001)
        assert smr == pytest.approx(0.0035, abs=0.0001)

    def test_moderate_error_confusion_row(self):
        counts = ConfusionCounts(tp=93, fp=372, fn=15, tn=63494)
        fpr, fnr, smr = global_rates(counts)
        assert fpr == pytest.approx(0.0058, abs=0.0001)
        assert smr == pytest.approx(0.0061, abs=0.0005)

    def test_all_true_negative(self):
        assert global_rates(ConfusionCounts(0, 0, 0, 10)) == (0.0, 0.0, 0.0)

    def test_empty_grid_undefined(self):
        with pytest.raises(UndefinedMetricError):
            global_rates(ConfusionCounts(0, 0, 0, 0))

    @given(
        tp=st.integers(0, 10_000),
        fp=st.integers(0, 10_000),
        fn=st.integers(0, 10_000),
        tn=st.integers(1, 10_000),
    )
    def test_smr_identity_exact(self, tp, fp, fn, tn):
        counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)
        fpr, fnr, smr = global_rates(counts)
        assert smr == fpr + fnr
        assert counts.n == tp + fp + fn + tn


class TestClassificationMetrics:
    def test_table_consistent_recall_and_accuracy(self):
        counts = ConfusionCounts(tp=94, fp=211, fn=14, tn=63656)
        precision, recall, f1, accuracy = classification_metrics(counts)
        assert recall == pytest.approx(0.87, abs=0.005)
        assert accuracy == pytest.approx(0.9965, abs=0.005)

    def test_zero_denominator_convention(self):
        precision, recall, f1, _ = classification_metrics(ConfusionCounts(0, 0, 2, 8))
        assert precision == 0.0 and f1 == 0.0
        precision, recall, f1, _ = classification_metrics(ConfusionCounts(0, 0, 0, 8))
        assert (precision, recall, f1) == (0.0, 0.0, 0.0)

    def test_hand_arithmetic(self):
        precision, recall, f1, accuracy = classification_metrics(ConfusionCounts(1, 1, 1, 7))
        assert (precision, recall, f1) == (0.5, 0.5, 0.5)
        assert accuracy == pytest.approx(0.8)


class TestPerQueryMean:
    def test_uniform_rows_equal_global(self):
        query, source = _grid_docs(3, 4)
        gold = [LinkRecord(f"q{i}", "s0") for i in range(3)]
        predictions = [_match(f"q{i}", "s0") for i in range(3)]
        counts = confusion(predictions, gold, query, source)
        _, _, smr_global = global_rates(counts)
        assert per_query_mean(predictions, gold, query, source, "smr") == pytest.approx(smr_global)

    def test_two_row_enumeration(self):
        query, source = _grid_docs(2, 4)
        # q0 perfect (nothing to find, nothing predicted), q1 entirely wrong
        gold = [LinkRecord("q1", "s0"), LinkRecord("q1", "s1")]
        predictions = [_match("q1", "s2"), _match("q1", "s3")]
        mean = per_query_mean(predictions, gold, query, source, "smr")
        assert mean == pytest.approx(0.5 * (0.0 + 1.0))

    def test_empty_everything(self):
        query, source = _grid_docs(2, 3)
        assert per_query_mean([], [], query, source, "smr") == 0.0

    def test_unknown_metric(self):
        query, source = _grid_docs(1, 1)
        with pytest.raises(ConfigurationError):
            per_query_mean([], [], query, source, "auc")


def _ranked(ids):
    return [
        RankedCandidate(source_seg_id=i, similarity=1.0 - 0.01 * r, rank=r + 1)
        for r, i in enumerate(ids)
    ]


class TestIrMetrics:
    def test_gold_at_rank_one(self):
        ranked = {"q0": _ranked(["s0", "s1", "s2"])}
        gold = [LinkRecord("q0", "s0")]
        out = ir_metrics(ranked, gold, ks=[1])
        assert out["recall"][1] == 1.0
        assert out["mrr"][1] == 1.0

    def test_gold_below_cutoff(self):
        ranked = {"q0": _ranked(["s1", "s2", "s0"])}
        gold = [LinkRecord("q0", "s0")]
        out = ir_metrics(ranked, gold, ks=[2, 3])
        assert out["recall"][2] == 0.0 and out["mrr"][2] == 0.0
        assert out["recall"][3] == 1.0 and out["mrr"][3] == pytest.approx(1 / 3)

    def test_four_query_toy_against_enumeration(self):
        ranked = {
            "q0": _ranked(["s0", "s1", "s2", "s3"]),  # gold s0 -> rank 1
            "q1": _ranked(["s2", "s0", "s1", "s3"]),  # gold s1 -> rank 3
            "q2": _ranked(["s3", "s2", "s1", "s0"]),  # gold s2, s0 -> ranks 2, 4
            "q3": _ranked(["s1", "s3", "s0", "s2"]),  # gold s9 absent
        }
        gold = [
            LinkRecord("q0", "s0"),
            LinkRecord("q1", "s1"),
            LinkRecord("q2", "s2"),
            LinkRecord("q2", "s0"),
            LinkRecord("q3", "s9"),
        ]
        out = ir_metrics(ranked, gold, ks=[2, 4])
        # recall@2: q0 1/1, q1 0/1, q2 1/2, q3 0/1
        assert out["recall"][2] == pytest.approx((1 + 0 + 0.5 + 0) / 4)
        # recall@4: q0 1, q1 1, q2 1, q3 0
        assert out["recall"][4] == pytest.approx(3 / 4)
        # mrr@2: 1, 0, 1/2, 0 ; mrr@4: 1, 1/3, 1/2, 0
        assert out["mrr"][2] == pytest.approx((1 + 0 + 0.5 + 0) / 4)
        assert out["mrr"][4] == pytest.approx((1 + 1 / 3 + 0.5 + 0) / 4)
        # AP: q0 = 1; q1 = 1/3; q2 = (1/2 + 2/4) / 2 = 0.5; q3 = 0
        assert out["map"] == pytest.approx((1 + 1 / 3 + 0.5 + 0) / 4)
        # ndcg@2: q0 = 1, q1 = 0, q2 = (1/log2(3)) / (1/log2(2) + 1/log2(3)), q3 = 0
        q2_dcg = 1 / math.log2(3)
        q2_idcg = 1 / math.log2(2) + 1 / math.log2(3)
        assert out["ndcg"][2] == pytest.approx((1 + 0 + q2_dcg / q2_idcg + 0) / 4)

    def test_no_gold_queries_undefined(self):
        with pytest.raises(UndefinedMetricError):
            ir_metrics({"q0": _ranked(["s0"])}, [], ks=[1])

    def test_missing_ranked_list_rejected(self):
        with pytest.raises(ValidationError):
            ir_metrics({}, [LinkRecord("q0", "s0")], ks=[1])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 100_000))
    def test_recall_non_decreasing_in_k(self, seed):
        rng = np.random.default_rng(seed)
        n = 20
        ids = [f"s{i}" for i in rng.permutation(n)]
        ranked = {"q0": _ranked(ids)}
        gold = [LinkRecord("q0", f"s{i}") for i in sorted(rng.choice(n, size=4, replace=False))]
        ks = list(range(1, n + 1))
        out = ir_metrics(ranked, gold, ks=ks)
        values = [out["recall"][k] for k in ks]
        assert values == sorted(values)
        assert values[-1] == 1.0  # every gold id is in the index


class TestMakeFolds:
    def test_545_links_make_five_folds_of_109(self):
        links = [LinkRecord(f"q{i}", f"s{i}") for i in range(545)]
        folds = make_folds(links, 5, seed=11)
        assert len(folds) == 5
        sizes = [len(f.test_links) for f in folds]
        assert sizes == [109] * 5
        seen = set()
        for fold in folds:
            pairs = {l.pair for l in fold.test_links}
            assert not (pairs & seen)
            seen |= pairs
        assert len(seen) == 545

    def test_small_set(self):
        links = [LinkRecord(f"q{i}", f"s{i}") for i in range(10)]
        folds = make_folds(links, 5, seed=0)
        assert [len(f.test_links) for f in folds] == [2] * 5

    def test_train_test_complement(self):
        links = [LinkRecord(f"q{i}", f"s{i}") for i in range(13)]
        for fold in make_folds(links, 4, seed=3):
            assert len(fold.train_links) + len(fold.test_links) == 13
            assert not ({l.pair for l in fold.train_links} & {l.pair for l in fold.test_links})

    def test_deterministic(self):
        links = [LinkRecord(f"q{i}", f"s{i}") for i in range(50)]
        assert make_folds(links, 5, seed=7) == make_folds(links, 5, seed=7)
        assert make_folds(links, 5, seed=7) != make_folds(links, 5, seed=8)

    def test_more_folds_than_links(self):
        links = [LinkRecord("q0", "s0")]
        with pytest.raises(ConfigurationError):
            make_folds(links, 5, seed=0)


@pytest.fixture(scope="module")
def big_synthetic():
    return synth_pair_with_links(1500, 1400, 545, seed=99)


class TestBuildEvalDocs:
    def test_default_sizes(self, big_synthetic):
        query_corpus, source_corpus, links = big_synthetic
        fold = make_folds(links, 5, seed=1)[0]
        q_doc, s_doc, gold = build_eval_docs(fold, query_corpus, source_corpus, seed=5)
        assert len(q_doc.segments) == 937
        assert len(s_doc.segments) == 880
        assert gold == fold.test_links
        assert len(gold) == 109

    def test_positives_only_when_size_matches(self, big_synthetic):
        query_corpus, source_corpus, links = big_synthetic
        fold = make_folds(links, 5, seed=1)[0]
        n_q = len({l.query_seg_id for l in fold.test_links})
        n_s = len({l.source_seg_id for l in fold.test_links})
        q_doc, s_doc, _ = build_eval_docs(fold, query_corpus, source_corpus, n_q, n_s, seed=5)
        assert len(q_doc.segments) == n_q
        assert set(q_doc.ids()) == {l.query_seg_id for l in fold.test_links}

    def test_reproducible_with_seed(self, big_synthetic):
        query_corpus, source_corpus, links = big_synthetic
        fold = make_folds(links, 5, seed=1)[1]
        a = build_eval_docs(fold, query_corpus, source_corpus, 300, 250, seed=9)
        b = build_eval_docs(fold, query_corpus, source_corpus, 300, 250, seed=9)
        assert a[0].ids() == b[0].ids()
        assert a[1].ids() == b[1].ids()

    def test_distractors_exclude_train_participants(self, big_synthetic):
        query_corpus, source_corpus, links = big_synthetic
        fold = make_folds(links, 5, seed=1)[2]
        q_doc, s_doc, _ = build_eval_docs(fold, query_corpus, source_corpus, 400, 350, seed=2)
        train_q = {l.query_seg_id for l in fold.train_links}
        train_s = {l.source_seg_id for l in fold.train_links}
        assert not (set(q_doc.ids()) & train_q)
        assert not (set(s_doc.ids()) & train_s)

    def test_insufficient_corpus(self, big_synthetic):
        query_corpus, source_corpus, links = big_synthetic
        fold = make_folds(links, 5, seed=1)[0]
        with pytest.raises(ConfigurationError):
            build_eval_docs(fold, query_corpus, source_corpus, 5000, 880, seed=0)
        with pytest.raises(ConfigurationError):
            build_eval_docs(fold, query_corpus, source_corpus, 10, 880, seed=0)


@pytest.fixture
def sampling_setup():
    query, source, links = synth_pair_with_links(30, 25, 12, seed=42)
    return query, source, links


class TestSampleNegatives:
    @pytest.mark.parametrize(
        "strategy",
        [
            SamplingStrategy.RANDOM_PAIR,
            SamplingStrategy.RANDOM_NEGATIVE,
            SamplingStrategy.HARD_NEGATIVE,
            SamplingStrategy.MIXED,
        ],
    )
    @pytest.mark.parametrize("ratio", [1, 5, 10])
    def test_exact_ratio_and_no_gold_collision(self, sampling_setup, strategy, ratio):
        query, source, links = sampling_setup
        provider = HashEmbeddingProvider(dim=8, seed=1)
        negatives = sample_negatives(
            strategy, ratio, links, query, source, embed_provider=provider, seed=3
        )
        assert len(negatives) == ratio * len(links)
        assert all(p.label == 0 and p.strategy is strategy for p in negatives)
        gold_texts = {(query[l.query_seg_id].text, source[l.source_seg_id].text) for l in links}
        assert all((p.query_text, p.candidate_text) not in gold_texts for p in negatives)

    def test_forced_single_choice(self):
        query = Document(
            doc_id="q",
            author="",
            role=Role.QUERY,
            segments=(Segment(id="q0", ordinal=0, text="unda manet"),),
        )
        source = Document(
            doc_id="s",
            author="",
            role=Role.SOURCE,
            segments=(
                Segment(id="s0", ordinal=0, text="unda cadit"),
                Segment(id="s1", ordinal=1, text="petra stat"),
            ),
        )
        links = [LinkRecord("q0", "s0")]
        negatives = sample_negatives(
            SamplingStrategy.RANDOM_NEGATIVE, 1, links, query, source, seed=0
        )
        assert negatives == [
            TrainingPair(
                query_text="unda manet",
                candidate_text="petra stat",
                label=0,
                strategy=SamplingStrategy.RANDOM_NEGATIVE,
            )
        ]

    def test_hard_negatives_match_cosine_oracle(self, sampling_setup):
        query, source, links = sampling_setup
        provider = HashEmbeddingProvider(dim=8, seed=1)
        ratio = 2
        negatives = sample_negatives(
            SamplingStrategy.HARD_NEGATIVE, ratio, links, query, source,
            embed_provider=provider, seed=0,
        )
        # oracle: brute-force cosine ranking of all sources per positive query
        idx = 0
        for link in links:
            q_vec = provider.embed(["Query: " + query[link.query_seg_id].text])[0]
            sims = []
            for pos, seg in enumerate(source.segments):
                s_vec = provider.embed(["Candidate: " + seg.text])[0]
                sims.append((-cosine(q_vec, s_vec), pos, seg.id))
            ranked = [seg_id for _, _, seg_id in sorted(sims)]
            gold_sources = {l.source_seg_id for l in links if l.query_seg_id == link.query_seg_id}
            expected = [s for s in ranked if s not in gold_sources][:ratio]
            for s_id in expected:
                assert negatives[idx].candidate_text == source[s_id].text
                idx += 1

    def test_mixed_rounds_toward_random(self, sampling_setup):
        query, source, links = sampling_setup
        provider = HashEmbeddingProvider(dim=8, seed=1)
        negatives = sample_negatives(
            SamplingStrategy.MIXED, 5, links[:1], query, source, embed_provider=provider, seed=0
        )
        assert len(negatives) == 5  # 2 hard + 3 random

    def test_hard_requires_provider(self, sampling_setup):
        query, source, links = sampling_setup
        with pytest.raises(ConfigurationError):
            sample_negatives(SamplingStrategy.HARD_NEGATIVE, 1, links, query, source)

    def test_deterministic_with_seed(self, sampling_setup):
        query, source, links = sampling_setup
        a = sample_negatives(SamplingStrategy.RANDOM_NEGATIVE, 3, links, query, source, seed=5)
        b = sample_negatives(SamplingStrategy.RANDOM_NEGATIVE, 3, links, query, source, seed=5)
        assert a == b


class TestTrainingPairExport:
    def test_empty_csv_has_header_and_zero_count(self, tmp_path):
        path = tmp_path / "pairs.csv"
        assert export_training_pairs([], path, fmt="csv") == 0
        assert path.read_text().strip() == "query_text,candidate_text,label,strategy"

    def test_round_trip(self, tmp_path, sampling_setup):
        query, source, links = sampling_setup
        pairs = positive_pairs(links[:2], query, source) + sample_negatives(
            SamplingStrategy.RANDOM_NEGATIVE, 1, links[:1], query, source, seed=1
        )
        path = tmp_path / "pairs.csv"
        assert export_training_pairs(pairs, path, fmt="csv") == 3
        assert load_training_pairs(path) == pairs

    def test_positives_all_label_one(self, sampling_setup):
        query, source, links = sampling_setup
        pairs = positive_pairs(links, query, source)
        assert all(p.label == 1 and p.strategy is SamplingStrategy.POSITIVE for p in pairs)

    def test_label_strategy_invariant(self):
        with pytest.raises(ValidationError):
            TrainingPair("a", "b", 1, SamplingStrategy.RANDOM_PAIR)
        with pytest.raises(ValidationError):
            TrainingPair("a", "b", 0, SamplingStrategy.POSITIVE)


class TestEvalReport:
    def test_typed_report_matches_dict_form(self):
        from intertext.evaluation import EvalReport

        query, source, links = synth_pair_with_links(6, 7, 3, seed=12)
        predictions = [_match(l.query_seg_id, l.source_seg_id) for l in links[:2]]
        report = EvalReport.from_run(predictions, links, query, source)
        assert report.counts.tp == 2
        assert report.smr == report.fpr + report.fnr
        assert report.to_dict() == evaluate_run(predictions, links, query, source)


class TestEvaluateRun:
    def test_report_structure_and_workload(self):
        query, source, links = synth_pair_with_links(10, 12, 5, seed=8)
        predictions = [_match(l.query_seg_id, l.source_seg_id) for l in links[:3]]
        report = evaluate_run(predictions, links, query, source)
        assert report["counts"]["tp"] == 3
        assert report["counts"]["fn"] == 2
        assert report["workload"]["candidates_to_review"] == 3
        assert report["workload"]["grid_size"] == 120
        assert report["rates"]["smr"] == report["rates"]["fpr"] + report["rates"]["fnr"]

    def test_per_query_records_included_on_request(self):
        query, source, links = synth_pair_with_links(4, 5, 2, seed=8)
        report = evaluate_run([], links, query, source, include_per_query=True)
        assert len(report["per_query"]) == 4


class TestEvaluateFolds:
    def test_fold_report_shape_and_mean(self):
        query_corpus, source_corpus, links = synth_pair_with_links(120, 110, 25, seed=31)
        config = RunConfig(
            architecture=Architecture.RETRIEVE_RERANK,
            k=5,
            threshold=0.3,
            embedder="mock:dim=8,seed=2",
        )
        report = evaluate_folds(
            query_corpus, source_corpus, links, config,
            folds=5, seed=4, q_size=60, s_size=50, ks=(1, 5),
        )
        assert len(report["folds"]) == 5
        assert all(rep["gold_links"] == 5 for rep in report["folds"])
        assert all(rep["query_segments"] == 60 for rep in report["folds"])
        mean_tp = statistics.fmean(rep["counts"]["tp"] for rep in report["folds"])
        assert report["mean"]["counts"]["tp"] == pytest.approx(mean_tp)
        assert "ir" in report["folds"][0]

    def test_deterministic(self):
        query_corpus, source_corpus, links = synth_pair_with_links(80, 80, 15, seed=13)
        config = RunConfig(architecture=Architecture.RETRIEVAL_ONLY, k=3, embedder="mock")
        kwargs = dict(folds=3, seed=2, q_size=40, s_size=35, ks=(1, 3))
        a = evaluate_folds(query_corpus, source_corpus, links, config, **kwargs)
        b = evaluate_folds(query_corpus, source_corpus, links, config, **kwargs)
        assert a == b
