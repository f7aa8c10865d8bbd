"""Benchmark harness: folds, evaluation documents, negatives, and metrics.

The task is framed as classifying the full query x source pair grid, so the
headline metrics are error rates normalized by the total number of pairs N:
the global false-positive rate FP/N, the global false-negative rate FN/N,
and the segment-misclassification rate (FP+FN)/N. Standard classification
and ranked-retrieval metrics sit alongside them.
"""

from __future__ import annotations

import csv
import json
import math
import random
import statistics
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .corpus import Document, LinkRecord, Segment
from .errors import ConfigurationError, UndefinedMetricError, ValidationError
from .pipeline import (
    Architecture,
    CandidateMatch,
    RunConfig,
    candidates_to_review,
    execute,
    make_classifier_provider,
    make_embedding_provider,
    reference_pairs,
    retrieve_rankings,
)
from .retrieval import EmbeddingProvider, RankedCandidate, build_index, embed_segments, topk


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn, "n": self.n}


def confusion(
    predictions: Iterable[CandidateMatch],
    gold: Iterable[LinkRecord],
    query: Document,
    source: Document,
) -> ConfusionCounts:
    """Confusion counts over the full query x source pair grid.

    Only reference-labeled predictions count as positive calls; duplicates
    collapse. N is always |query segments| * |source segments|.
    """
    predictions = list(predictions)
    for m in predictions:
        if m.query_seg_id not in query:
            raise ValidationError(f"prediction references unknown query segment {m.query_seg_id!r}")
        if m.source_seg_id not in source:
            raise ValidationError(f"prediction references unknown source segment {m.source_seg_id!r}")
    predicted = reference_pairs(predictions)
    gold_pairs = set()
    for link in gold:
        if link.query_seg_id not in query or link.source_seg_id not in source:
            raise ValidationError(
                f"gold pair ({link.query_seg_id!r}, {link.source_seg_id!r}) is outside the document pair"
            )
        gold_pairs.add(link.pair)
    n = len(query.segments) * len(source.segments)
    tp = len(predicted & gold_pairs)
    fp = len(predicted - gold_pairs)
    fn = len(gold_pairs - predicted)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=n - tp - fp - fn)


def global_rates(c: ConfusionCounts) -> tuple[float, float, float]:
    """(FPR, FNR, SMR) normalized by the total pair count.

    SMR is computed as FPR + FNR so the decomposition identity holds exactly
    in floating point.
    """
    if c.n == 0:
        raise UndefinedMetricError("rates undefined for an empty pair grid")
    fpr = c.fp / c.n
    fnr = c.fn / c.n
    return fpr, fnr, fpr + fnr


def classification_metrics(c: ConfusionCounts) -> tuple[float, float, float, float]:
    """(precision, recall, f1, accuracy); zero-denominator cases yield 0."""
    if c.n == 0:
        raise UndefinedMetricError("metrics undefined for an empty pair grid")
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (c.tp + c.tn) / c.n
    return precision, recall, f1, accuracy


_METRIC_NAMES = ("fpr", "fnr", "smr", "precision", "recall", "f1")


def _metric_value(c: ConfusionCounts, metric: str) -> float:
    if metric in ("fpr", "fnr", "smr"):
        fpr, fnr, smr = global_rates(c)
        return {"fpr": fpr, "fnr": fnr, "smr": smr}[metric]
    precision, recall, f1, _ = classification_metrics(c)
    return {"precision": precision, "recall": recall, "f1": f1}[metric]


def per_query_records(
    predictions: Iterable[CandidateMatch],
    gold: Iterable[LinkRecord],
    query: Document,
    source: Document,
) -> list[dict]:
    """Metrics on each query segment's row of the pair grid."""
    predicted_by_q: dict[str, set[str]] = {seg.id: set() for seg in query.segments}
    for q, s in reference_pairs(list(predictions)):
        if q not in predicted_by_q:
            raise ValidationError(f"prediction references unknown query segment {q!r}")
        if s not in source:
            raise ValidationError(f"prediction references unknown source segment {s!r}")
        predicted_by_q[q].add(s)
    gold_by_q: dict[str, set[str]] = {seg.id: set() for seg in query.segments}
    for link in gold:
        if link.query_seg_id not in gold_by_q or link.source_seg_id not in source:
            raise ValidationError(
                f"gold pair ({link.query_seg_id!r}, {link.source_seg_id!r}) is outside the document pair"
            )
        gold_by_q[link.query_seg_id].add(link.source_seg_id)

    n_row = len(source.segments)
    records = []
    for seg in query.segments:
        predicted = predicted_by_q[seg.id]
        gold_row = gold_by_q[seg.id]
        tp = len(predicted & gold_row)
        fp = len(predicted - gold_row)
        fn = len(gold_row - predicted)
        counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=n_row - tp - fp - fn)
        rec = {"query_seg_id": seg.id}
        for metric in _METRIC_NAMES:
            rec[metric] = _metric_value(counts, metric)
        records.append(rec)
    return records


def per_query_mean(
    predictions: Iterable[CandidateMatch],
    gold: Iterable[LinkRecord],
    query: Document,
    source: Document,
    metric: str,
) -> float:
    """Unweighted mean of a per-query-row metric over all query segments."""
    if metric not in _METRIC_NAMES:
        raise ConfigurationError(f"metric must be one of {_METRIC_NAMES}")
    records = per_query_records(predictions, gold, query, source)
    return statistics.fmean(rec[metric] for rec in records)


# ---------------- ranked-retrieval metrics ----------------


def _gold_by_query(gold: Iterable[LinkRecord]) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for link in gold:
        out.setdefault(link.query_seg_id, set()).add(link.source_seg_id)
    return out


def ir_metrics(
    ranked: Mapping[str, Sequence[RankedCandidate]],
    gold: Iterable[LinkRecord],
    ks: Sequence[int],
) -> dict:
    """Recall@k, MRR@k, MAP, and NDCG@k with binary relevance.

    All means are over gold-bearing queries. Recall@k counts the fraction of
    a query's gold sources retrieved in the top k; MRR@k uses the first gold
    hit within the top k (0 when absent); NDCG uses a log2 discount.
    """
    if not ks or any(k < 1 for k in ks):
        raise ConfigurationError("cutoffs must be positive")
    gold_by_q = _gold_by_query(gold)
    if not gold_by_q:
        raise UndefinedMetricError("IR metrics undefined without gold-bearing queries")
    for q in gold_by_q:
        if q not in ranked:
            raise ValidationError(f"no ranked list supplied for gold-bearing query {q!r}")

    ks = sorted(set(int(k) for k in ks))
    recall_acc = {k: [] for k in ks}
    mrr_acc = {k: [] for k in ks}
    ndcg_acc = {k: [] for k in ks}
    ap_acc = []
    for q, gold_set in sorted(gold_by_q.items()):
        ids = [c.source_seg_id for c in ranked[q]]
        rel = [1 if i in gold_set else 0 for i in ids]
        first_hit = next((pos + 1 for pos, r in enumerate(rel) if r), None)
        hits = 0
        precision_sum = 0.0
        for pos, r in enumerate(rel, start=1):
            if r:
                hits += 1
                precision_sum += hits / pos
        ap_acc.append(precision_sum / len(gold_set))
        for k in ks:
            top = rel[:k]
            recall_acc[k].append(sum(top) / len(gold_set))
            mrr_acc[k].append(1.0 / first_hit if first_hit is not None and first_hit <= k else 0.0)
            dcg = sum(r / math.log2(pos + 1) for pos, r in enumerate(top, start=1))
            ideal = min(len(gold_set), k)
            idcg = sum(1.0 / math.log2(pos + 1) for pos in range(1, ideal + 1))
            ndcg_acc[k].append(dcg / idcg if idcg else 0.0)

    return {
        "recall": {k: statistics.fmean(v) for k, v in recall_acc.items()},
        "mrr": {k: statistics.fmean(v) for k, v in mrr_acc.items()},
        "map": statistics.fmean(ap_acc),
        "ndcg": {k: statistics.fmean(v) for k, v in ndcg_acc.items()},
    }


# ---------------- folds and evaluation documents ----------------


@dataclass(frozen=True)
class FoldSpec:
    fold_id: int
    train_links: tuple[LinkRecord, ...]
    test_links: tuple[LinkRecord, ...]


def make_folds(links: Sequence[LinkRecord], k: int, seed: int = 0) -> list[FoldSpec]:
    """Seeded shuffle and near-equal partition into k test sets."""
    if k < 2:
        raise ConfigurationError("fold count must be >= 2")
    if k > len(links):
        raise ConfigurationError(f"cannot make {k} folds from {len(links)} links")
    order = list(links)
    random.Random(seed).shuffle(order)
    base, extra = divmod(len(order), k)
    folds = []
    start = 0
    for fold_id in range(k):
        size = base + (1 if fold_id < extra else 0)
        test = tuple(order[start : start + size])
        train = tuple(order[:start] + order[start + size :])
        folds.append(FoldSpec(fold_id=fold_id, train_links=train, test_links=test))
        start += size
    return folds


def _assemble_doc(
    corpus: Document,
    positive_ids: set[str],
    excluded_ids: set[str],
    size: int,
    seed: int,
    doc_id: str,
) -> Document:
    missing = positive_ids - set(corpus.ids())
    if missing:
        raise ValidationError(f"link segment(s) missing from corpus {corpus.doc_id!r}: {sorted(missing)[:5]}")
    positives = [seg for seg in corpus.segments if seg.id in positive_ids]
    if size < len(positives):
        raise ConfigurationError(
            f"target size {size} is below the {len(positives)} positive segments"
        )
    pool = [seg for seg in corpus.segments if seg.id not in positive_ids and seg.id not in excluded_ids]
    need = size - len(positives)
    if need > len(pool):
        raise ConfigurationError(
            f"corpus {corpus.doc_id!r} has only {len(pool)} eligible distractors, {need} needed"
        )
    distractors = random.Random(seed).sample(pool, need)
    chosen = positives + distractors
    segments = tuple(
        Segment(id=seg.id, ordinal=i, text=seg.text, lemmas=seg.lemmas, pos=seg.pos)
        for i, seg in enumerate(chosen)
    )
    return Document(doc_id=doc_id, author=corpus.author, role=corpus.role, segments=segments)


def build_eval_docs(
    fold: FoldSpec,
    query_corpus: Document,
    source_corpus: Document,
    q_size: int = 937,
    s_size: int = 880,
    seed: int = 0,
) -> tuple[Document, Document, tuple[LinkRecord, ...]]:
    """Mix a fold's held-out positives with seeded distractors.

    The query document contains every test-link query segment plus random
    distractors up to ``q_size``; the source document likewise up to
    ``s_size``. Distractors never include segments participating in a
    train-fold link, so no training signal leaks into the evaluation grid.
    """
    test_q = {l.query_seg_id for l in fold.test_links}
    test_s = {l.source_seg_id for l in fold.test_links}
    train_q = {l.query_seg_id for l in fold.train_links}
    train_s = {l.source_seg_id for l in fold.train_links}
    query_doc = _assemble_doc(
        query_corpus, test_q, train_q, q_size, seed, f"{query_corpus.doc_id}-fold{fold.fold_id}"
    )
    source_doc = _assemble_doc(
        source_corpus, test_s, train_s, s_size, seed + 1, f"{source_corpus.doc_id}-fold{fold.fold_id}"
    )
    return query_doc, source_doc, fold.test_links


# ---------------- training-pair export ----------------


class SamplingStrategy(Enum):
    POSITIVE = "positive"
    RANDOM_PAIR = "random_pair"
    RANDOM_NEGATIVE = "random_negative"
    HARD_NEGATIVE = "hard_negative"
    MIXED = "mixed"


@dataclass(frozen=True)
class TrainingPair:
    query_text: str
    candidate_text: str
    label: int
    strategy: SamplingStrategy

    def __post_init__(self) -> None:
        if (self.label == 1) != (self.strategy is SamplingStrategy.POSITIVE):
            raise ValidationError("label 1 is reserved for the positive strategy")
        if self.label not in (0, 1):
            raise ValidationError("label must be 0 or 1")


def positive_pairs(
    positives: Sequence[LinkRecord], query_doc: Document, source_doc: Document
) -> list[TrainingPair]:
    return [
        TrainingPair(
            query_text=query_doc[l.query_seg_id].text,
            candidate_text=source_doc[l.source_seg_id].text,
            label=1,
            strategy=SamplingStrategy.POSITIVE,
        )
        for l in positives
    ]


def _hard_ranking(
    positives: Sequence[LinkRecord],
    query_doc: Document,
    source_doc: Document,
    provider: EmbeddingProvider,
) -> dict[str, list[str]]:
    """Full similarity ranking of source segments per distinct positive query."""
    source_vecs = embed_segments(provider, source_doc.segments, role="candidate")
    index = build_index([seg.id for seg in source_doc.segments], source_vecs)
    distinct = []
    seen = set()
    for link in positives:
        if link.query_seg_id not in seen:
            seen.add(link.query_seg_id)
            distinct.append(query_doc[link.query_seg_id])
    query_vecs = embed_segments(provider, distinct, role="query")
    return {
        seg.id: [c.source_seg_id for c in topk(index, query_vecs[i], len(index))]
        for i, seg in enumerate(distinct)
    }


def sample_negatives(
    strategy: SamplingStrategy,
    ratio: int,
    positives: Sequence[LinkRecord],
    query_doc: Document,
    source_doc: Document,
    embed_provider: Optional[EmbeddingProvider] = None,
    seed: int = 0,
) -> list[TrainingPair]:
    """Emit exactly ``ratio`` negatives per positive, never colliding with gold.

    * random_pair     — random query segment x random source segment
    * random_negative — the positive's query x a random non-gold source
    * hard_negative   — the positive's query x its top-similarity non-gold
                        sources under ``embed_provider``
    * mixed           — per positive, half random / half hard (odd ratios
                        round toward random)
    """
    if strategy is SamplingStrategy.POSITIVE:
        raise ConfigurationError("sampling strategy must be a negative strategy")
    if ratio < 1:
        raise ConfigurationError("ratio must be >= 1")
    if strategy in (SamplingStrategy.HARD_NEGATIVE, SamplingStrategy.MIXED) and embed_provider is None:
        raise ConfigurationError(f"{strategy.value} sampling requires an embedding provider")

    gold_pairs = {l.pair for l in positives}
    gold_by_q = _gold_by_query(positives)
    rng = random.Random(seed)
    rankings = (
        _hard_ranking(positives, query_doc, source_doc, embed_provider)
        if embed_provider is not None
        and strategy in (SamplingStrategy.HARD_NEGATIVE, SamplingStrategy.MIXED)
        else {}
    )

    def non_gold_sources(q_id: str) -> list[str]:
        blocked = gold_by_q.get(q_id, set())
        return [seg.id for seg in source_doc.segments if seg.id not in blocked]

    def emit(q_id: str, s_id: str) -> TrainingPair:
        return TrainingPair(
            query_text=query_doc[q_id].text,
            candidate_text=source_doc[s_id].text,
            label=0,
            strategy=strategy,
        )

    out: list[TrainingPair] = []
    for link in positives:
        q_id = link.query_seg_id
        if strategy is SamplingStrategy.RANDOM_PAIR:
            for _ in range(ratio):
                for _attempt in range(10_000):
                    q = rng.choice(query_doc.segments).id
                    s = rng.choice(source_doc.segments).id
                    if (q, s) not in gold_pairs:
                        out.append(
                            TrainingPair(
                                query_text=query_doc[q].text,
                                candidate_text=source_doc[s].text,
                                label=0,
                                strategy=strategy,
                            )
                        )
                        break
                else:
                    raise ConfigurationError("could not sample a non-gold random pair")
        elif strategy is SamplingStrategy.RANDOM_NEGATIVE:
            pool = non_gold_sources(q_id)
            if len(pool) < ratio:
                raise ConfigurationError(
                    f"query {q_id!r} has only {len(pool)} non-gold sources, {ratio} needed"
                )
            out.extend(emit(q_id, s) for s in rng.sample(pool, ratio))
        elif strategy is SamplingStrategy.HARD_NEGATIVE:
            blocked = gold_by_q.get(q_id, set())
            hard = [s for s in rankings[q_id] if s not in blocked][:ratio]
            if len(hard) < ratio:
                raise ConfigurationError(
                    f"query {q_id!r} has only {len(hard)} non-gold sources, {ratio} needed"
                )
            out.extend(emit(q_id, s) for s in hard)
        else:  # MIXED
            n_hard = ratio // 2
            n_random = ratio - n_hard
            blocked = gold_by_q.get(q_id, set())
            hard = [s for s in rankings[q_id] if s not in blocked][:n_hard]
            pool = [s for s in non_gold_sources(q_id) if s not in set(hard)]
            if len(hard) < n_hard or len(pool) < n_random:
                raise ConfigurationError(
                    f"query {q_id!r} lacks enough non-gold sources for ratio {ratio}"
                )
            out.extend(emit(q_id, s) for s in hard)
            out.extend(emit(q_id, s) for s in rng.sample(pool, n_random))
    return out


_PAIR_COLUMNS = ("query_text", "candidate_text", "label", "strategy")


def export_training_pairs(
    pairs: Sequence[TrainingPair], path: str | Path, fmt: str = "csv"
) -> int:
    """Write training pairs to CSV or JSONL; returns the number written."""
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(_PAIR_COLUMNS)
            for p in pairs:
                writer.writerow([p.query_text, p.candidate_text, p.label, p.strategy.value])
    elif fmt == "jsonl":
        with path.open("w", encoding="utf-8") as f:
            for p in pairs:
                f.write(
                    json.dumps(
                        {
                            "query_text": p.query_text,
                            "candidate_text": p.candidate_text,
                            "label": p.label,
                            "strategy": p.strategy.value,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    else:
        raise ConfigurationError(f"unsupported training-pair format {fmt!r}")
    return len(pairs)


def load_training_pairs(path: str | Path, fmt: Optional[str] = None) -> list[TrainingPair]:
    path = Path(path)
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    pairs = []
    if fmt == "csv":
        with path.open(newline="", encoding="utf-8") as f:
            for row in csv.DictReader(f):
                pairs.append(
                    TrainingPair(
                        query_text=row["query_text"],
                        candidate_text=row["candidate_text"],
                        label=int(row["label"]),
                        strategy=SamplingStrategy(row["strategy"]),
                    )
                )
    else:
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.append(
                TrainingPair(
                    query_text=obj["query_text"],
                    candidate_text=obj["candidate_text"],
                    label=int(obj["label"]),
                    strategy=SamplingStrategy(obj["strategy"]),
                )
            )
    return pairs


# ---------------- fold benchmark orchestration ----------------


@dataclass(frozen=True)
class EvalReport:
    """Every metric for one finished run over one document pair."""

    counts: ConfusionCounts
    precision: float
    recall: float
    f1: float
    accuracy: float
    fpr: float
    fnr: float
    smr: float
    candidates_to_review: int
    per_query_mean: dict
    per_query: Optional[list[dict]] = None
    ir: Optional[dict] = None

    @classmethod
    def from_run(
        cls,
        matches: Sequence[CandidateMatch],
        gold: Sequence[LinkRecord],
        query: Document,
        source: Document,
        ranked: Optional[Mapping[str, Sequence[RankedCandidate]]] = None,
        ks: Sequence[int] = (),
        include_per_query: bool = False,
    ) -> "EvalReport":
        counts = confusion(matches, gold, query, source)
        fpr, fnr, smr = global_rates(counts)
        precision, recall, f1, accuracy = classification_metrics(counts)
        records = per_query_records(matches, gold, query, source)
        return cls(
            counts=counts,
            precision=precision,
            recall=recall,
            f1=f1,
            accuracy=accuracy,
            fpr=fpr,
            fnr=fnr,
            smr=smr,
            candidates_to_review=candidates_to_review(matches),
            per_query_mean={
                metric: statistics.fmean(rec[metric] for rec in records)
                for metric in _METRIC_NAMES
            },
            per_query=records if include_per_query else None,
            ir=ir_metrics(ranked, gold, ks) if ranked is not None and ks else None,
        )

    def to_dict(self) -> dict:
        report: dict = {
            "counts": self.counts.to_dict(),
            "rates": {"fpr": self.fpr, "fnr": self.fnr, "smr": self.smr},
            "classification": {
                "precision": self.precision,
                "recall": self.recall,
                "f1": self.f1,
                "accuracy": self.accuracy,
            },
            "per_query_mean": dict(self.per_query_mean),
            "workload": {
                "candidates_to_review": self.candidates_to_review,
                "grid_size": self.counts.n,
            },
        }
        if self.per_query is not None:
            report["per_query"] = self.per_query
        if self.ir is not None:
            report["ir"] = self.ir
        return report


def evaluate_run(
    matches: Sequence[CandidateMatch],
    gold: Sequence[LinkRecord],
    query: Document,
    source: Document,
    ranked: Optional[Mapping[str, Sequence[RankedCandidate]]] = None,
    ks: Sequence[int] = (),
    include_per_query: bool = False,
) -> dict:
    """All metrics for one finished run, as a JSON-ready dict."""
    return EvalReport.from_run(
        matches, gold, query, source, ranked=ranked, ks=ks, include_per_query=include_per_query
    ).to_dict()


def evaluate_folds(
    query_corpus: Document,
    source_corpus: Document,
    links: Sequence[LinkRecord],
    config: RunConfig,
    folds: int = 5,
    seed: int = 0,
    q_size: int = 937,
    s_size: int = 880,
    ks: Sequence[int] = (1, 5, 10, 20, 100),
) -> dict:
    """Cross-validated benchmark of one architecture.

    Builds per-fold evaluation documents (distractors resampled per fold
    from the fold seed), runs the configured architecture, and reports
    per-fold metrics plus their unweighted mean.
    """
    fold_specs = make_folds(links, folds, seed)
    uses_retrieval = config.architecture in (
        Architecture.RETRIEVAL_ONLY,
        Architecture.RETRIEVE_RERANK,
    )
    fold_reports = []
    for fold in fold_specs:
        q_doc, s_doc, gold = build_eval_docs(
            fold, query_corpus, source_corpus, q_size, s_size, seed=seed + 101 * fold.fold_id
        )
        embedder = (
            make_embedding_provider(config.embedder, seed=config.seed) if uses_retrieval else None
        )
        classifier = (
            make_classifier_provider(config.classifier)
            if config.architecture
            in (Architecture.CLASSIFICATION_ONLY, Architecture.RETRIEVE_RERANK)
            else None
        )
        # one full-depth retrieval pass serves both the run and the IR metrics
        ranked = (
            retrieve_rankings(q_doc, s_doc, len(s_doc.segments), embedder)
            if uses_retrieval
            else None
        )
        matches = execute(
            config, q_doc, s_doc, embedder=embedder, classifier=classifier, rankings=ranked
        )
        report = evaluate_run(
            matches, gold, q_doc, s_doc, ranked=ranked if ks else None, ks=ks
        )
        report["fold_id"] = fold.fold_id
        report["gold_links"] = len(gold)
        report["query_segments"] = len(q_doc.segments)
        report["source_segments"] = len(s_doc.segments)
        fold_reports.append(report)

    return {
        "config": {
            **config.to_dict(),
            "folds": folds,
            "seed": seed,
            "q_size": q_size,
            "s_size": s_size,
            "ks": [int(k) for k in ks],
        },
        "folds": fold_reports,
        "mean": _mean_tree(fold_reports),
    }


def _mean_tree(trees: Sequence) -> dict:
    """Average numeric leaves across a list of structurally equal dicts."""
    out: dict = {}
    first = trees[0]
    for key, value in first.items():
        if key in ("fold_id", "per_query"):
            continue
        if isinstance(value, dict):
            out[key] = _mean_tree([t[key] for t in trees])
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            out[key] = statistics.fmean(t[key] for t in trees)
        else:
            out[key] = value
    return out


def report_to_json(report: dict) -> str:
    """Deterministic JSON rendering (sorted keys, stable float repr)."""
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False, default=str) + "\n"


def report_to_text(report: dict) -> str:
    """Aligned-column summary for terminals."""
    cols = ["fold", "tp", "fp", "fn", "tn", "fpr", "fnr", "smr", "prec", "rec", "f1", "acc", "review"]
    rows = []

    def fmt_row(label: str, rep: dict) -> list[str]:
        counts = rep["counts"]
        rates = rep["rates"]
        cls = rep["classification"]
        return [
            label,
            f"{counts['tp']:.0f}",
            f"{counts['fp']:.0f}",
            f"{counts['fn']:.0f}",
            f"{counts['tn']:.0f}",
            f"{rates['fpr']:.4f}",
            f"{rates['fnr']:.4f}",
            f"{rates['smr']:.4f}",
            f"{cls['precision']:.3f}",
            f"{cls['recall']:.3f}",
            f"{cls['f1']:.3f}",
            f"{cls['accuracy']:.4f}",
            f"{rep['workload']['candidates_to_review']:.0f}",
        ]

    for rep in report["folds"]:
        rows.append(fmt_row(str(rep["fold_id"]), rep))
    rows.append(fmt_row("mean", report["mean"]))

    widths = [max(len(cols[i]), max(len(r[i]) for r in rows)) for i in range(len(cols))]
    lines = [
        "  ".join(c.rjust(widths[i]) for i, c in enumerate(cols)),
        "  ".join("-" * widths[i] for i in range(len(cols))),
    ]
    lines.extend("  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)) for row in rows)
    if "ir" in report["mean"]:
        ir = report["mean"]["ir"]
        lines.append("")
        lines.append("mean IR over folds:")
        for k, value in sorted(ir["recall"].items(), key=lambda kv: int(kv[0])):
            lines.append(f"  recall@{k}: {value:.4f}  mrr@{k}: {ir['mrr'][k]:.4f}  ndcg@{k}: {ir['ndcg'][k]:.4f}")
        lines.append(f"  map: {ir['map']:.4f}")
    return "\n".join(lines) + "\n"
