"""Rule-based candidate generation over shared tokens in a window.

Finds query/source segment pairs that share at least ``min_shared`` distinct
tokens (surface forms or lemmas), where the shared tokens sit inside a span
of fewer than ``window`` token positions on each side independently. A
cascade of filters then prunes stopword-only matches, matches without an
allowed part of speech, and generic collocations that are frequent across
the source corpus.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import Document, Segment
from .errors import ConfigurationError

MATCH_ON = ("surface", "lemma")


@dataclass(frozen=True)
class MatchParams:
    min_shared: int = 2
    window: int = 10
    match_on: str = "surface"

    def __post_init__(self) -> None:
        if self.min_shared < 2:
            raise ConfigurationError("min_shared must be >= 2")
        if self.window < self.min_shared:
            raise ConfigurationError("window must be >= min_shared")
        if self.match_on not in MATCH_ON:
            raise ConfigurationError(f"match_on must be one of {MATCH_ON}")


@dataclass(frozen=True)
class RawCandidate:
    """A query/source segment pair sharing tokens within a window.

    ``shared_tokens`` are ordered by their position in the query segment;
    both position lists are sorted ascending. ``match_on`` records whether
    the tokens are surface forms or lemmas (the filter cascade needs the
    same token space for its frequency cut).
    """

    query_seg_id: str
    source_seg_id: str
    shared_tokens: tuple[str, ...]
    query_positions: tuple[int, ...]
    source_positions: tuple[int, ...]
    match_on: str = "surface"


@dataclass(frozen=True)
class FilterConfig:
    """Filter cascade settings.

    ``stoplist=None`` means "use the top-100 most frequent tokens of the
    source corpus" (computed at filter time). ``max_doc_freq`` removes
    candidates whose full shared token set occurs in more than
    ``max_doc_freq * |source segments|`` source segments.
    """

    stoplist: Optional[frozenset[str]] = None
    pos_allow: Optional[frozenset[str]] = None
    max_doc_freq: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.max_doc_freq <= 1.0:
            raise ConfigurationError("max_doc_freq must be in (0, 1]")


def _match_sequence(seg: Segment, match_on: str) -> tuple[str, ...]:
    if match_on == "surface":
        return seg.tokens
    if seg.lemmas is None:
        raise ConfigurationError(f"lemma matching requested but segment {seg.id!r} carries no lemma data")
    return seg.lemmas


def _window_type_sets(
    seq: Sequence[str], common: frozenset[str], window: int
) -> list[tuple[int, frozenset[str]]]:
    """Distinct sets of common-token types visible in each width-`window` slice.

    Returns (start, type_set) pairs, keeping the earliest start per distinct
    set; later duplicates can never win the first-position tie-break.
    """
    out: list[tuple[int, frozenset[str]]] = []
    seen: set[frozenset[str]] = set()
    for start in range(len(seq)):
        types = frozenset(t for t in seq[start : start + window] if t in common)
        if types and types not in seen:
            seen.add(types)
            out.append((start, types))
    return out


def _best_shared_window(
    q_seq: Sequence[str],
    s_seq: Sequence[str],
    common: frozenset[str],
    params: MatchParams,
) -> Optional[tuple[frozenset[str], int, int]]:
    """Largest common type set placeable within a window on both sides.

    Among equally large sets the smallest query start wins, then the
    smallest source start.
    """
    q_windows = _window_type_sets(q_seq, common, params.window)
    s_windows = _window_type_sets(s_seq, common, params.window)
    best_key: Optional[tuple[int, int, int]] = None
    best: Optional[tuple[frozenset[str], int, int]] = None
    for q_start, q_types in q_windows:
        if len(q_types) < params.min_shared:
            continue
        for s_start, s_types in s_windows:
            shared = q_types & s_types
            if len(shared) < params.min_shared:
                continue
            key = (len(shared), -q_start, -s_start)
            if best_key is None or key > best_key:
                best_key = key
                best = (shared, q_start, s_start)
    return best


def _first_positions(
    seq: Sequence[str], types: frozenset[str], start: int, window: int
) -> list[int]:
    positions = []
    for t in types:
        for i in range(start, min(start + window, len(seq))):
            if seq[i] == t:
                positions.append(i)
                break
    return sorted(positions)


def find_raw_candidates(
    query: Document, source: Document, params: MatchParams = MatchParams()
) -> list[RawCandidate]:
    """All segment pairs sharing >= min_shared tokens within a window.

    Matching is order-insensitive: the shared tokens may appear in any order
    on either side. Multiple qualifying windows in one segment pair collapse
    to a single candidate keeping the largest shared set (first-position
    tie-break). Output is sorted by query ordinal, then source ordinal.
    """
    source_seqs = [(seg, _match_sequence(seg, params.match_on)) for seg in source.segments]
    # Inverted index: token type -> source segment indices containing it.
    by_type: dict[str, list[int]] = {}
    for idx, (_, seq) in enumerate(source_seqs):
        for t in set(seq):
            by_type.setdefault(t, []).append(idx)

    out: list[RawCandidate] = []
    for q_seg in query.segments:
        q_seq = _match_sequence(q_seg, params.match_on)
        q_types = set(q_seq)
        shared_counts: Counter[int] = Counter()
        for t in q_types:
            for idx in by_type.get(t, ()):
                shared_counts[idx] += 1
        for idx in sorted(i for i, c in shared_counts.items() if c >= params.min_shared):
            s_seg, s_seq = source_seqs[idx]
            common = frozenset(q_types & set(s_seq))
            best = _best_shared_window(q_seq, s_seq, common, params)
            if best is None:
                continue
            shared, q_start, s_start = best
            q_positions = _first_positions(q_seq, shared, q_start, params.window)
            s_positions = _first_positions(s_seq, shared, s_start, params.window)
            out.append(
                RawCandidate(
                    query_seg_id=q_seg.id,
                    source_seg_id=s_seg.id,
                    shared_tokens=tuple(q_seq[i] for i in q_positions),
                    query_positions=tuple(q_positions),
                    source_positions=tuple(s_positions),
                    match_on=params.match_on,
                )
            )
    return out


def default_stoplist(source: Document, n: int = 100) -> frozenset[str]:
    """Top-*n* most frequent surface tokens of the source corpus."""
    counts: Counter[str] = Counter()
    for seg in source.segments:
        counts.update(seg.tokens)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return frozenset(tok for tok, _ in ranked[:n])


def load_stoplist(path: str | Path) -> frozenset[str]:
    """Stoplist file: one token per line, UTF-8."""
    tokens = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            tokens.append(line.lower())
    return frozenset(tokens)


def _candidate_tags(cand: RawCandidate, query: Document, source: Document) -> list[str]:
    tags: list[str] = []
    for seg, positions in (
        (query[cand.query_seg_id], cand.query_positions),
        (source[cand.source_seg_id], cand.source_positions),
    ):
        if seg.pos is None:
            raise ConfigurationError(
                f"POS filter requested but segment {seg.id!r} carries no POS data"
            )
        tags.extend(seg.pos[i] for i in positions if i < len(seg.pos))
    return tags


def apply_filters(
    cands: Sequence[RawCandidate],
    cfg: FilterConfig,
    source: Document,
    query: Optional[Document] = None,
) -> list[RawCandidate]:
    """Prune candidates via the stoplist / POS / collocation-frequency cascade.

    Order is preserved; each filter is a pure per-candidate predicate so the
    cascade commutes set-wise. The POS filter needs *query* to look up tags
    on the query side.
    """
    stoplist = cfg.stoplist if cfg.stoplist is not None else default_stoplist(source)
    if cfg.pos_allow is not None and query is None:
        raise ConfigurationError("POS filter requires the query document")

    seg_sets: dict[str, dict[str, frozenset[str]]] = {}

    def source_sets(match_on: str) -> dict[str, frozenset[str]]:
        if match_on not in seg_sets:
            seg_sets[match_on] = {
                seg.id: frozenset(_match_sequence(seg, match_on)) for seg in source.segments
            }
        return seg_sets[match_on]

    df_cache: dict[tuple[str, frozenset[str]], int] = {}

    def doc_freq(shared: frozenset[str], match_on: str) -> int:
        key = (match_on, shared)
        if key not in df_cache:
            sets = source_sets(match_on)
            df_cache[key] = sum(1 for s in sets.values() if shared <= s)
        return df_cache[key]

    limit = cfg.max_doc_freq * len(source.segments)
    out = []
    for cand in cands:
        if all(t in stoplist for t in cand.shared_tokens):
            continue
        if cfg.pos_allow is not None:
            assert query is not None
            if not any(tag in cfg.pos_allow for tag in _candidate_tags(cand, query, source)):
                continue
        if doc_freq(frozenset(cand.shared_tokens), cand.match_on) > limit:
            continue
        out.append(cand)
    return out


def export_candidates(cands: Iterable[RawCandidate], path: str | Path) -> Path:
    """Write candidates as CSV with pipe-joined shared tokens."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["query_seg_id", "source_seg_id", "shared_tokens"])
        for cand in cands:
            writer.writerow([cand.query_seg_id, cand.source_seg_id, "|".join(cand.shared_tokens)])
    return path
