"""Detection architectures over one (query document, source document) pair.

Three neural-style pipelines share one result schema with the rule-based
n-gram matcher:

* ``retrieval_only``   — top-k cosine neighbours per query, all positive
* ``classification_only`` — score the full pair grid, keep pairs over threshold
* ``retrieve_rerank``  — classify only the top-k retrieved candidates
* ``ngram``            — shared-token candidates through the filter cascade
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import Document, Segment
from .errors import ConfigurationError, EmptyDocumentError
from .matcher import FilterConfig, MatchParams, apply_filters, find_raw_candidates
from .rerank import (
    Label,
    PairClassifierProvider,
    RemotePairClassifier,
    TokenJaccardClassifier,
    build_pair_input,
    classify_pairs,
)
from .retrieval import (
    EmbeddingProvider,
    FileVectorProvider,
    HashEmbeddingProvider,
    RankedCandidate,
    RemoteEmbeddingProvider,
    build_index,
    embed_segments,
    topk,
)

logger = logging.getLogger(__name__)


class Architecture(Enum):
    RETRIEVAL_ONLY = "retrieval_only"
    CLASSIFICATION_ONLY = "classification_only"
    RETRIEVE_RERANK = "retrieve_rerank"
    NGRAM = "ngram"


@dataclass(frozen=True)
class CandidateMatch:
    """One scored query->source pair emitted by a pipeline run."""

    query_seg_id: str
    source_seg_id: str
    label: Label
    origin: Architecture
    similarity: Optional[float] = None
    probability: Optional[float] = None
    shared_tokens: Optional[tuple[str, ...]] = None


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run, CLI and service alike."""

    architecture: Architecture = Architecture.RETRIEVE_RERANK
    k: int = 10
    threshold: float = 0.5
    embedder: str = "mock"
    classifier: str = "jaccard"
    budget: int = 512
    min_shared: int = 2
    window: int = 10
    match_on: str = "surface"
    max_doc_freq: float = 0.01
    stoplist_path: Optional[str] = None
    pos_allow: Optional[tuple[str, ...]] = None
    jobs: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigurationError("threshold must be in [0, 1]")
        if self.budget < 2:
            raise ConfigurationError("token budget must be >= 2")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")

    def to_dict(self) -> dict:
        data = asdict(self)
        data["architecture"] = self.architecture.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        arch = data.get("architecture", Architecture.RETRIEVE_RERANK)
        if isinstance(arch, str):
            try:
                arch = Architecture(arch)
            except ValueError:
                raise ConfigurationError(f"unknown architecture {arch!r}") from None
        data["architecture"] = arch
        if data.get("pos_allow") is not None:
            data["pos_allow"] = tuple(data["pos_allow"])
        known = {f for f in cls.__dataclass_fields__}  # type: ignore[attr-defined]
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config field(s): {', '.join(sorted(unknown))}")
        return cls(**data)


def make_embedding_provider(spec: str, seed: int = 0) -> EmbeddingProvider:
    """Build an embedding provider from a spec string.

    ``mock`` or ``mock:dim=8,seed=3`` for the deterministic hash embedder,
    ``file:PATH`` for precomputed vectors, ``http(s)://...`` for a remote
    endpoint.
    """
    if spec.startswith(("http://", "https://")):
        return RemoteEmbeddingProvider(spec)
    if spec.startswith("file:"):
        return FileVectorProvider(spec[len("file:"):])
    if spec == "mock" or spec.startswith("mock:"):
        opts = _parse_opts(spec)
        return HashEmbeddingProvider(dim=int(opts.get("dim", 16)), seed=int(opts.get("seed", seed)))
    raise ConfigurationError(f"unknown embedding provider spec {spec!r}")


def make_classifier_provider(spec: str) -> PairClassifierProvider:
    """Build a pair classifier: ``jaccard[:max_tokens=N]`` or ``http(s)://...``."""
    if spec.startswith(("http://", "https://")):
        return RemotePairClassifier(spec)
    if spec == "jaccard" or spec.startswith("jaccard:"):
        opts = _parse_opts(spec)
        return TokenJaccardClassifier(max_tokens=int(opts.get("max_tokens", 512)))
    raise ConfigurationError(f"unknown classifier provider spec {spec!r}")


def _parse_opts(spec: str) -> dict[str, str]:
    _, _, tail = spec.partition(":")
    opts: dict[str, str] = {}
    if tail:
        for item in tail.split(","):
            key, _, value = item.partition("=")
            if not value:
                raise ConfigurationError(f"malformed provider option {item!r} in {spec!r}")
            opts[key.strip()] = value.strip()
    return opts


def _require_nonempty(query: Document, source: Document) -> None:
    for doc in (query, source):
        if len(doc.segments) == 0:
            raise EmptyDocumentError(f"document {doc.doc_id!r} has no segments")


def _clamp_k(k: int, source: Document) -> int:
    if k > len(source.segments):
        logger.warning(
            "k=%d exceeds source size %d; clamping", k, len(source.segments)
        )
        return len(source.segments)
    return k


def retrieve_rankings(
    query: Document, source: Document, k: int, embedder: EmbeddingProvider
) -> dict[str, list[RankedCandidate]]:
    """Per-query top-k ranked candidates (the shared retrieval stage)."""
    _require_nonempty(query, source)
    k = _clamp_k(k, source)
    source_vecs = embed_segments(embedder, source.segments, role="candidate")
    index = build_index([seg.id for seg in source.segments], source_vecs)
    query_vecs = embed_segments(embedder, query.segments, role="query")
    return {
        seg.id: topk(index, query_vecs[i], k)
        for i, seg in enumerate(query.segments)
    }


def _rankings_at_depth(
    rankings: dict[str, list[RankedCandidate]], k: int
) -> dict[str, list[RankedCandidate]]:
    """Truncate precomputed rankings; top-k is a prefix of any deeper list."""
    return {qid: ranked[:k] for qid, ranked in rankings.items()}


def run_retrieval_only(
    query: Document,
    source: Document,
    k: int,
    embedder: EmbeddingProvider,
    rankings: Optional[dict[str, list[RankedCandidate]]] = None,
) -> list[CandidateMatch]:
    """Treat the top-k retrieved candidates as positive predictions.

    Emits exactly min(k, |source|) reference-labeled matches per query
    segment, ordered by query ordinal then rank. Precomputed ``rankings``
    (at depth >= k) skip the embedding pass.
    """
    if rankings is None:
        rankings = retrieve_rankings(query, source, k, embedder)
    else:
        _require_nonempty(query, source)
        rankings = _rankings_at_depth(rankings, _clamp_k(k, source))
    out = []
    for seg in query.segments:
        for cand in rankings[seg.id]:
            out.append(
                CandidateMatch(
                    query_seg_id=seg.id,
                    source_seg_id=cand.source_seg_id,
                    label=Label.REFERENCE,
                    origin=Architecture.RETRIEVAL_ONLY,
                    similarity=cand.similarity,
                )
            )
    return out


def _classify_row(
    q_seg: Segment,
    candidates: Sequence[Segment],
    classifier: PairClassifierProvider,
    budget: int,
) -> list[float]:
    pairs = [build_pair_input(q_seg, c, budget) for c in candidates]
    return classify_pairs(classifier, pairs)


def _map_rows(fn, rows: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(rows) <= 1:
        return [fn(row) for row in rows]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, rows))


def run_classification_only(
    query: Document,
    source: Document,
    threshold: float,
    classifier: PairClassifierProvider,
    budget: int = 512,
    jobs: int = 1,
) -> list[CandidateMatch]:
    """Score every query x source pair; keep pairs meeting the threshold.

    Only reference-labeled pairs are returned; non-references are countable
    for metrics from the grid size. Ordered by query ordinal, then source
    ordinal.
    """
    _require_nonempty(query, source)
    budget = min(budget, classifier.max_tokens)

    def score_row(q_seg: Segment) -> list[CandidateMatch]:
        probs = _classify_row(q_seg, source.segments, classifier, budget)
        row = []
        for s_seg, prob in zip(source.segments, probs):
            if prob >= threshold:
                row.append(
                    CandidateMatch(
                        query_seg_id=q_seg.id,
                        source_seg_id=s_seg.id,
                        label=Label.REFERENCE,
                        origin=Architecture.CLASSIFICATION_ONLY,
                        probability=prob,
                    )
                )
        return row

    rows = _map_rows(score_row, query.segments, jobs)
    return [match for row in rows for match in row]


def run_retrieve_rerank(
    query: Document,
    source: Document,
    k: int,
    threshold: float,
    embedder: EmbeddingProvider,
    classifier: PairClassifierProvider,
    budget: int = 512,
    jobs: int = 1,
    rankings: Optional[dict[str, list[RankedCandidate]]] = None,
) -> list[CandidateMatch]:
    """Dense retrieval of top-k candidates, then pair classification.

    Every classified candidate is returned (labels on both sides of the
    threshold), carrying both the retrieval similarity and the classifier
    probability. Ordered by query ordinal, then retrieval rank. Any provider
    failure aborts the whole run. Precomputed ``rankings`` (at depth >= k)
    skip the embedding pass.
    """
    if rankings is None:
        rankings = retrieve_rankings(query, source, k, embedder)
    else:
        _require_nonempty(query, source)
        rankings = _rankings_at_depth(rankings, _clamp_k(k, source))
    budget = min(budget, classifier.max_tokens)

    def score_row(q_seg: Segment) -> list[CandidateMatch]:
        ranked = rankings[q_seg.id]
        candidates = [source[c.source_seg_id] for c in ranked]
        probs = _classify_row(q_seg, candidates, classifier, budget)
        return [
            CandidateMatch(
                query_seg_id=q_seg.id,
                source_seg_id=cand.source_seg_id,
                label=Label.REFERENCE if prob >= threshold else Label.NO_REFERENCE,
                origin=Architecture.RETRIEVE_RERANK,
                similarity=cand.similarity,
                probability=prob,
            )
            for cand, prob in zip(ranked, probs)
        ]

    rows = _map_rows(score_row, query.segments, jobs)
    return [match for row in rows for match in row]


def run_ngram(
    query: Document,
    source: Document,
    params: MatchParams = MatchParams(),
    filters: FilterConfig = FilterConfig(),
) -> list[CandidateMatch]:
    """Rule-based candidates through the filter cascade, in the shared schema."""
    _require_nonempty(query, source)
    candidates = apply_filters(find_raw_candidates(query, source, params), filters, source, query)
    return [
        CandidateMatch(
            query_seg_id=c.query_seg_id,
            source_seg_id=c.source_seg_id,
            label=Label.REFERENCE,
            origin=Architecture.NGRAM,
            shared_tokens=c.shared_tokens,
        )
        for c in candidates
    ]


def execute(
    config: RunConfig,
    query: Document,
    source: Document,
    embedder: Optional[EmbeddingProvider] = None,
    classifier: Optional[PairClassifierProvider] = None,
    rankings: Optional[dict[str, list[RankedCandidate]]] = None,
) -> list[CandidateMatch]:
    """Dispatch a run configuration to its architecture."""
    arch = config.architecture
    if arch in (Architecture.RETRIEVAL_ONLY, Architecture.RETRIEVE_RERANK) and embedder is None:
        embedder = make_embedding_provider(config.embedder, seed=config.seed)
    if arch in (Architecture.CLASSIFICATION_ONLY, Architecture.RETRIEVE_RERANK) and classifier is None:
        classifier = make_classifier_provider(config.classifier)

    if arch is Architecture.RETRIEVAL_ONLY:
        assert embedder is not None
        return run_retrieval_only(query, source, config.k, embedder, rankings=rankings)
    if arch is Architecture.CLASSIFICATION_ONLY:
        assert classifier is not None
        return run_classification_only(
            query, source, config.threshold, classifier, budget=config.budget, jobs=config.jobs
        )
    if arch is Architecture.RETRIEVE_RERANK:
        assert embedder is not None and classifier is not None
        return run_retrieve_rerank(
            query,
            source,
            config.k,
            config.threshold,
            embedder,
            classifier,
            budget=config.budget,
            jobs=config.jobs,
            rankings=rankings,
        )
    if arch is Architecture.NGRAM:
        from .matcher import load_stoplist

        stoplist = load_stoplist(config.stoplist_path) if config.stoplist_path else None
        filters = FilterConfig(
            stoplist=stoplist,
            pos_allow=frozenset(config.pos_allow) if config.pos_allow else None,
            max_doc_freq=config.max_doc_freq,
        )
        params = MatchParams(
            min_shared=config.min_shared, window=config.window, match_on=config.match_on
        )
        return run_ngram(query, source, params, filters)
    raise ConfigurationError(f"unknown architecture {arch!r}")


def reference_pairs(matches: Iterable[CandidateMatch]) -> set[tuple[str, str]]:
    """The set of pairs a run predicts as references."""
    return {
        (m.query_seg_id, m.source_seg_id) for m in matches if m.label is Label.REFERENCE
    }


def candidates_to_review(matches: Iterable[CandidateMatch]) -> int:
    """Number of distinct predicted pairs a reviewer would need to check."""
    return len(reference_pairs(matches))


# ---------------- result files ----------------

_MATCH_COLUMNS = (
    "query_seg_id",
    "source_seg_id",
    "similarity",
    "probability",
    "label",
    "origin",
    "shared_tokens",
)


def _match_row(m: CandidateMatch) -> dict:
    return {
        "query_seg_id": m.query_seg_id,
        "source_seg_id": m.source_seg_id,
        "similarity": "" if m.similarity is None else repr(m.similarity),
        "probability": "" if m.probability is None else repr(m.probability),
        "label": m.label.value,
        "origin": m.origin.value,
        "shared_tokens": "|".join(m.shared_tokens) if m.shared_tokens else "",
    }


def matches_to_csv(matches: Sequence[CandidateMatch]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(_MATCH_COLUMNS), lineterminator="\n")
    writer.writeheader()
    for m in matches:
        writer.writerow(_match_row(m))
    return buf.getvalue()


def matches_to_jsonl(matches: Sequence[CandidateMatch]) -> str:
    lines = []
    for m in matches:
        lines.append(
            json.dumps(
                {
                    "query_seg_id": m.query_seg_id,
                    "source_seg_id": m.source_seg_id,
                    "similarity": m.similarity,
                    "probability": m.probability,
                    "label": m.label.value,
                    "origin": m.origin.value,
                    "shared_tokens": list(m.shared_tokens) if m.shared_tokens else None,
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def write_matches(matches: Sequence[CandidateMatch], path: str | Path, fmt: str = "csv") -> Path:
    path = Path(path)
    if fmt == "csv":
        path.write_text(matches_to_csv(matches), encoding="utf-8")
    elif fmt == "jsonl":
        path.write_text(matches_to_jsonl(matches), encoding="utf-8")
    else:
        raise ConfigurationError(f"unsupported match format {fmt!r}")
    return path


def corpus_checksum(doc: Document) -> str:
    h = hashlib.sha256()
    for seg in doc.segments:
        h.update(seg.id.encode("utf-8"))
        h.update(b"\t")
        h.update(seg.text.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def run_manifest(
    config: RunConfig,
    query: Document,
    source: Document,
    embedder_name: Optional[str] = None,
    classifier_name: Optional[str] = None,
    timestamp: Optional[str] = None,
) -> dict:
    """Reproducibility record stored next to every result file."""
    return {
        "config": config.to_dict(),
        "providers": {"embedder": embedder_name, "classifier": classifier_name},
        "query_doc": {"doc_id": query.doc_id, "segments": len(query.segments), "sha256": corpus_checksum(query)},
        "source_doc": {"doc_id": source.doc_id, "segments": len(source.segments), "sha256": corpus_checksum(source)},
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(),
    }
