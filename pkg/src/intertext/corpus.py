"""Segmented documents, ground-truth link sets, and corpus statistics.

Loads pre-segmented texts from CSV or JSONL, normalizes and tokenizes them,
validates ground-truth links against the loaded documents, and computes
token statistics per document.
"""

from __future__ import annotations

import csv
import io
import json
import re
import statistics
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

from .errors import EmptyDocumentError, SchemaError, ValidationError

# Orthographic normalization: Latin manuscripts and editions mix u/v and i/j
# spellings, so both sides of a comparison are folded onto u and i.
_ORTHO = str.maketrans({"v": "u", "j": "i"})
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)

_CSV_REQUIRED = ("id", "text")
_CSV_OPTIONAL = ("lemma_seq", "pos_seq")


def tokenize(text: str) -> list[str]:
    """Normalize and split *text* into tokens.

    Lowercases, maps v->u and j->i, and keeps word characters only, so
    punctuation acts as a separator: ``"Vox faucibus haesit."`` becomes
    ``["uox", "faucibus", "haesit"]``. Empty input yields an empty list.
    """
    return _TOKEN_RE.findall(text.lower().translate(_ORTHO))


def split_sentences(text: str) -> list[str]:
    """Best-effort sentence splitter on sentence-final punctuation.

    Input to the engine is expected to be pre-segmented; this helper only
    covers the common case of splitting on ``. ! ? ;`` followed by space.
    """
    parts = re.split(r"(?<=[.!?;])\s+", text)
    return [p.strip() for p in parts if p.strip()]


class Role(Enum):
    QUERY = "query"
    SOURCE = "source"


class LinkCategory(Enum):
    VERBATIM_MARKED = "verbatim_marked"
    VERBATIM_UNMARKED = "verbatim_unmarked"
    PARAPHRASE_MINOR = "paraphrase_minor"
    PARAPHRASE_MAJOR = "paraphrase_major"
    ALLUSION_SINGLE = "allusion_single"
    ALLUSION_SYSTEMIC = "allusion_systemic"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class Segment:
    """One pre-segmented text unit of a document.

    ``tokens`` is always derived from ``text`` via :func:`tokenize`; it is
    never read from the input file. ``lemmas``/``pos`` are optional parallel
    sequences (one entry per normalized token) supplied by external tools.
    """

    id: str
    ordinal: int
    text: str
    tokens: tuple[str, ...] = field(init=False)
    lemmas: Optional[tuple[str, ...]] = None
    pos: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.ordinal < 0:
            raise ValidationError(f"segment {self.id!r}: ordinal must be >= 0")
        object.__setattr__(self, "tokens", tuple(tokenize(self.text)))
        for name in ("lemmas", "pos"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != len(self.tokens):
                raise ValidationError(
                    f"segment {self.id!r}: {name} has {len(seq)} entries for "
                    f"{len(self.tokens)} tokens (sequences must be parallel)"
                )


@dataclass(frozen=True)
class Document:
    """Ordered collection of segments with a fixed role in a run."""

    doc_id: str
    author: str
    role: Role
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        prev = -1
        for seg in self.segments:
            if seg.id in seen:
                raise ValidationError(f"duplicate segment id {seg.id!r} in document {self.doc_id!r}")
            seen.add(seg.id)
            if seg.ordinal <= prev:
                raise ValidationError(
                    f"segment ordinals must be strictly increasing in document {self.doc_id!r}"
                )
            prev = seg.ordinal
        object.__setattr__(self, "_by_id", {seg.id: seg for seg in self.segments})

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __getitem__(self, seg_id: str) -> Segment:
        try:
            return self._by_id[seg_id]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown segment id {seg_id!r} in document {self.doc_id!r}") from None

    def __contains__(self, seg_id: str) -> bool:
        return seg_id in self._by_id  # type: ignore[attr-defined]

    def ids(self) -> list[str]:
        return [seg.id for seg in self.segments]


@dataclass(frozen=True)
class LinkRecord:
    """Verified intertextual link between one query and one source segment."""

    query_seg_id: str
    source_seg_id: str
    category: LinkCategory = LinkCategory.UNSPECIFIED
    provenance: str = ""

    @property
    def pair(self) -> tuple[str, str]:
        return (self.query_seg_id, self.source_seg_id)


@dataclass(frozen=True)
class CorpusStats:
    segment_count: int
    avg_tokens: float
    min_tokens: int
    max_tokens: int
    stddev_tokens: float


def _segment_from_fields(
    seg_id: str,
    ordinal: int,
    text: str,
    lemma_seq: Optional[Sequence[str]],
    pos_seq: Optional[Sequence[str]],
) -> Segment:
    return Segment(
        id=seg_id,
        ordinal=ordinal,
        text=text,
        lemmas=tuple(lemma_seq) if lemma_seq is not None else None,
        pos=tuple(pos_seq) if pos_seq is not None else None,
    )


def _rows_from_csv(text: str, origin: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        return []
    for col in _CSV_REQUIRED:
        if col not in reader.fieldnames:
            raise SchemaError(f"{origin}: missing required column {col!r}")
    rows = []
    for row in reader:
        rec: dict = {"id": row["id"], "text": row["text"]}
        for col in _CSV_OPTIONAL:
            if col in reader.fieldnames and (row.get(col) or "").strip():
                rec[col] = row[col].split()
        rows.append(rec)
    return rows


def _rows_from_jsonl(text: str, origin: str) -> list[dict]:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{origin}:{lineno}: invalid JSON ({exc})") from exc
        for key in _CSV_REQUIRED:
            if key not in obj:
                raise SchemaError(f"{origin}:{lineno}: missing required field {key!r}")
        rec = {"id": str(obj["id"]), "text": obj["text"]}
        for key in _CSV_OPTIONAL:
            if obj.get(key):
                rec[key] = [str(t) for t in obj[key]]
        rows.append(rec)
    return rows


def _detect_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is not None:
        if fmt not in ("csv", "jsonl"):
            raise SchemaError(f"unsupported document format {fmt!r}")
        return fmt
    suffix = path.suffix.lower()
    if suffix == ".csv":
        return "csv"
    if suffix in (".jsonl", ".ndjson"):
        return "jsonl"
    raise SchemaError(f"cannot infer format of {path.name!r}; pass format='csv' or 'jsonl'")


def parse_document(
    text: str,
    fmt: str,
    *,
    role: Role,
    doc_id: str,
    author: str = "",
    origin: str = "<input>",
) -> Document:
    """Build a validated Document from raw CSV or JSONL content."""
    if fmt == "csv":
        rows = _rows_from_csv(text, origin)
    elif fmt == "jsonl":
        rows = _rows_from_jsonl(text, origin)
    else:
        raise SchemaError(f"unsupported document format {fmt!r}")
    if not rows:
        raise EmptyDocumentError(f"{origin}: document contains no segments")
    segments = []
    for ordinal, rec in enumerate(rows):
        segments.append(
            _segment_from_fields(rec["id"], ordinal, rec["text"], rec.get("lemma_seq"), rec.get("pos_seq"))
        )
    return Document(doc_id=doc_id, author=author, role=role, segments=tuple(segments))


def load_document(
    path: str | Path,
    fmt: Optional[str] = None,
    *,
    role: Role = Role.QUERY,
    doc_id: Optional[str] = None,
    author: str = "",
) -> Document:
    """Load a segmented document from a CSV or JSONL file.

    Segments keep file order and get ordinals 0..n-1. The format is inferred
    from the file suffix when *fmt* is not given.
    """
    path = Path(path)
    fmt = _detect_format(path, fmt)
    text = path.read_text(encoding="utf-8")
    return parse_document(
        text,
        fmt,
        role=role,
        doc_id=doc_id if doc_id is not None else path.stem,
        author=author,
        origin=str(path),
    )


def write_document(doc: Document, path: str | Path, fmt: Optional[str] = None) -> Path:
    """Write *doc* back to CSV or JSONL so that a reload is field-identical."""
    path = Path(path)
    fmt = _detect_format(path, fmt)
    has_lemmas = any(seg.lemmas is not None for seg in doc)
    has_pos = any(seg.pos is not None for seg in doc)
    if fmt == "csv":
        fieldnames = ["id", "text"]
        if has_lemmas:
            fieldnames.append("lemma_seq")
        if has_pos:
            fieldnames.append("pos_seq")
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.DictWriter(f, fieldnames=fieldnames)
            writer.writeheader()
            for seg in doc:
                row = {"id": seg.id, "text": seg.text}
                if has_lemmas:
                    row["lemma_seq"] = " ".join(seg.lemmas) if seg.lemmas else ""
                if has_pos:
                    row["pos_seq"] = " ".join(seg.pos) if seg.pos else ""
                writer.writerow(row)
    else:
        with path.open("w", encoding="utf-8") as f:
            for seg in doc:
                obj: dict = {"id": seg.id, "text": seg.text}
                if seg.lemmas is not None:
                    obj["lemma_seq"] = list(seg.lemmas)
                if seg.pos is not None:
                    obj["pos_seq"] = list(seg.pos)
                f.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return path


_LINK_COLUMNS = ("query_seg_id", "source_seg_id")


def parse_links(
    text: str,
    fmt: str,
    query: Document,
    source: Document,
    *,
    origin: str = "<input>",
) -> tuple[LinkRecord, ...]:
    """Parse and validate a link set against the given document pair."""
    if fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None:
            raw: list[dict] = []
        else:
            for col in _LINK_COLUMNS:
                if col not in reader.fieldnames:
                    raise SchemaError(f"{origin}: missing required column {col!r}")
            raw = list(reader)
    elif fmt == "jsonl":
        raw = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            for key in _LINK_COLUMNS:
                if key not in obj:
                    raise SchemaError(f"{origin}:{lineno}: missing required field {key!r}")
            raw.append(obj)
    else:
        raise SchemaError(f"unsupported link format {fmt!r}")

    records: list[LinkRecord] = []
    seen: set[tuple[str, str]] = set()
    for rec in raw:
        qid = str(rec["query_seg_id"])
        sid = str(rec["source_seg_id"])
        if qid not in query:
            raise ValidationError(f"{origin}: link ({qid!r}, {sid!r}) references unknown query segment {qid!r}")
        if sid not in source:
            raise ValidationError(f"{origin}: link ({qid!r}, {sid!r}) references unknown source segment {sid!r}")
        if (qid, sid) in seen:
            raise ValidationError(f"{origin}: duplicate link pair ({qid!r}, {sid!r})")
        seen.add((qid, sid))
        category = LinkCategory((rec.get("category") or "unspecified"))
        records.append(
            LinkRecord(
                query_seg_id=qid,
                source_seg_id=sid,
                category=category,
                provenance=str(rec.get("provenance") or ""),
            )
        )
    return tuple(records)


def load_links(
    path: str | Path,
    query: Document,
    source: Document,
    fmt: Optional[str] = None,
) -> tuple[LinkRecord, ...]:
    """Load a ground-truth link set and validate every id against the documents.

    An empty file yields an empty link set.
    """
    path = Path(path)
    fmt = _detect_format(path, fmt)
    return parse_links(path.read_text(encoding="utf-8"), fmt, query, source, origin=str(path))


def write_links(links: Iterable[LinkRecord], path: str | Path, fmt: Optional[str] = None) -> Path:
    """Write links in the same schema load_links reads (round-trippable)."""
    path = Path(path)
    fmt = _detect_format(path, fmt)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["query_seg_id", "source_seg_id", "category", "provenance"])
            for link in links:
                writer.writerow([link.query_seg_id, link.source_seg_id, link.category.value, link.provenance])
    else:
        with path.open("w", encoding="utf-8") as f:
            for link in links:
                f.write(
                    json.dumps(
                        {
                            "query_seg_id": link.query_seg_id,
                            "source_seg_id": link.source_seg_id,
                            "category": link.category.value,
                            "provenance": link.provenance,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
    return path


def corpus_stats(doc: Document) -> CorpusStats:
    """Token-count statistics over a document's segments.

    Counts are based on normalized tokens. The standard deviation is the
    population value (a single segment has stddev 0).
    """
    counts = [len(seg.tokens) for seg in doc.segments]
    if not counts:
        return CorpusStats(0, 0.0, 0, 0, 0.0)
    return CorpusStats(
        segment_count=len(counts),
        avg_tokens=statistics.fmean(counts),
        min_tokens=min(counts),
        max_tokens=max(counts),
        stddev_tokens=statistics.pstdev(counts),
    )
