"""HTTP facade and persistence for runs and human review decisions.

Scholars review detection results over days, so documents, runs, results,
and confirm/reject decisions live in a single-file sqlite database that
survives restarts. Run execution is asynchronous: submission returns an id
immediately and clients poll until the run is done.
"""

from __future__ import annotations

import csv
import io
import json
import sqlite3
import threading
import uuid
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from .corpus import Document, Role, Segment, parse_document
from .errors import IntertextError, SchemaError, ValidationError, ConfigurationError
from .pipeline import (
    Architecture,
    CandidateMatch,
    RunConfig,
    corpus_checksum,
    execute,
    matches_to_csv,
    matches_to_jsonl,
)
from .rerank import Label


class RunState(Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


class Verdict(Enum):
    CONFIRMED = "confirmed"
    REJECTED = "rejected"
    UNDECIDED = "undecided"


_SCHEMA = """
CREATE TABLE IF NOT EXISTS documents (
    doc_id TEXT PRIMARY KEY,
    role TEXT NOT NULL,
    author TEXT NOT NULL DEFAULT '',
    payload TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS runs (
    run_id TEXT PRIMARY KEY,
    state TEXT NOT NULL,
    created_at TEXT NOT NULL,
    config TEXT NOT NULL,
    query_doc TEXT NOT NULL,
    source_doc TEXT NOT NULL,
    error TEXT
);
CREATE TABLE IF NOT EXISTS matches (
    run_id TEXT NOT NULL,
    idx INTEGER NOT NULL,
    query_seg_id TEXT NOT NULL,
    source_seg_id TEXT NOT NULL,
    similarity REAL,
    probability REAL,
    label TEXT NOT NULL,
    origin TEXT NOT NULL,
    shared_tokens TEXT,
    PRIMARY KEY (run_id, idx)
);
CREATE TABLE IF NOT EXISTS decisions (
    run_id TEXT NOT NULL,
    query_seg_id TEXT NOT NULL,
    source_seg_id TEXT NOT NULL,
    verdict TEXT NOT NULL,
    reviewer TEXT NOT NULL DEFAULT '',
    decided_at TEXT NOT NULL,
    PRIMARY KEY (run_id, query_seg_id, source_seg_id)
);
"""


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class Store:
    """sqlite-backed persistence; every call opens a fresh connection, so
    instances can be shared across request and worker threads."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        with self._conn() as con:
            con.executescript(_SCHEMA)

    def _conn(self) -> sqlite3.Connection:
        con = sqlite3.connect(self.path, timeout=30.0)
        con.row_factory = sqlite3.Row
        return con

    # ---- documents ----

    def save_document(self, doc: Document) -> None:
        payload = json.dumps(
            [
                {
                    "id": seg.id,
                    "text": seg.text,
                    "lemma_seq": list(seg.lemmas) if seg.lemmas else None,
                    "pos_seq": list(seg.pos) if seg.pos else None,
                }
                for seg in doc.segments
            ],
            ensure_ascii=False,
        )
        with self._conn() as con:
            con.execute(
                "INSERT OR REPLACE INTO documents (doc_id, role, author, payload) VALUES (?, ?, ?, ?)",
                (doc.doc_id, doc.role.value, doc.author, payload),
            )

    def get_document(self, doc_id: str) -> Optional[Document]:
        with self._conn() as con:
            row = con.execute("SELECT * FROM documents WHERE doc_id = ?", (doc_id,)).fetchone()
        if row is None:
            return None
        segments = tuple(
            Segment(
                id=rec["id"],
                ordinal=i,
                text=rec["text"],
                lemmas=tuple(rec["lemma_seq"]) if rec.get("lemma_seq") else None,
                pos=tuple(rec["pos_seq"]) if rec.get("pos_seq") else None,
            )
            for i, rec in enumerate(json.loads(row["payload"]))
        )
        return Document(
            doc_id=row["doc_id"], author=row["author"], role=Role(row["role"]), segments=segments
        )

    def list_documents(self) -> list[dict]:
        with self._conn() as con:
            rows = con.execute("SELECT doc_id, role, author, payload FROM documents").fetchall()
        return [
            {
                "doc_id": r["doc_id"],
                "role": r["role"],
                "author": r["author"],
                "segment_count": len(json.loads(r["payload"])),
            }
            for r in rows
        ]

    # ---- runs ----

    def create_run(self, run_id: str, config: RunConfig, query_doc: str, source_doc: str) -> None:
        with self._conn() as con:
            con.execute(
                "INSERT INTO runs (run_id, state, created_at, config, query_doc, source_doc) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (run_id, RunState.PENDING.value, _now(), json.dumps(config.to_dict()), query_doc, source_doc),
            )

    def get_run(self, run_id: str) -> Optional[sqlite3.Row]:
        with self._conn() as con:
            return con.execute("SELECT * FROM runs WHERE run_id = ?", (run_id,)).fetchone()

    def set_run_state(self, run_id: str, state: RunState, error: Optional[str] = None) -> None:
        with self._conn() as con:
            con.execute(
                "UPDATE runs SET state = ?, error = ? WHERE run_id = ?",
                (state.value, error, run_id),
            )

    def save_matches(self, run_id: str, matches: list[CandidateMatch]) -> None:
        rows = [
            (
                run_id,
                idx,
                m.query_seg_id,
                m.source_seg_id,
                m.similarity,
                m.probability,
                m.label.value,
                m.origin.value,
                "|".join(m.shared_tokens) if m.shared_tokens else None,
            )
            for idx, m in enumerate(matches)
        ]
        with self._conn() as con:
            con.executemany(
                "INSERT INTO matches (run_id, idx, query_seg_id, source_seg_id, similarity, "
                "probability, label, origin, shared_tokens) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                rows,
            )

    def get_matches(self, run_id: str) -> list[CandidateMatch]:
        with self._conn() as con:
            rows = con.execute(
                "SELECT * FROM matches WHERE run_id = ? ORDER BY idx", (run_id,)
            ).fetchall()
        return [
            CandidateMatch(
                query_seg_id=r["query_seg_id"],
                source_seg_id=r["source_seg_id"],
                label=Label(r["label"]),
                origin=Architecture(r["origin"]),
                similarity=r["similarity"],
                probability=r["probability"],
                shared_tokens=tuple(r["shared_tokens"].split("|")) if r["shared_tokens"] else None,
            )
            for r in rows
        ]

    def match_exists(self, run_id: str, query_seg_id: str, source_seg_id: str) -> bool:
        with self._conn() as con:
            row = con.execute(
                "SELECT 1 FROM matches WHERE run_id = ? AND query_seg_id = ? AND source_seg_id = ? LIMIT 1",
                (run_id, query_seg_id, source_seg_id),
            ).fetchone()
        return row is not None

    # ---- decisions ----

    def upsert_decision(
        self, run_id: str, query_seg_id: str, source_seg_id: str, verdict: Verdict, reviewer: str
    ) -> dict:
        decided_at = _now()
        with self._conn() as con:
            con.execute(
                "INSERT INTO decisions (run_id, query_seg_id, source_seg_id, verdict, reviewer, decided_at) "
                "VALUES (?, ?, ?, ?, ?, ?) "
                "ON CONFLICT(run_id, query_seg_id, source_seg_id) "
                "DO UPDATE SET verdict = excluded.verdict, reviewer = excluded.reviewer, "
                "decided_at = excluded.decided_at",
                (run_id, query_seg_id, source_seg_id, verdict.value, reviewer, decided_at),
            )
        return {
            "query_seg_id": query_seg_id,
            "source_seg_id": source_seg_id,
            "verdict": verdict.value,
            "reviewer": reviewer,
            "decided_at": decided_at,
        }

    def get_decisions(self, run_id: str) -> dict[tuple[str, str], dict]:
        with self._conn() as con:
            rows = con.execute("SELECT * FROM decisions WHERE run_id = ?", (run_id,)).fetchall()
        return {
            (r["query_seg_id"], r["source_seg_id"]): {
                "verdict": r["verdict"],
                "reviewer": r["reviewer"],
                "decided_at": r["decided_at"],
            }
            for r in rows
        }


# ---------------- request/response models ----------------


class DocumentUpload(BaseModel):
    role: str
    content: str
    format: str = "csv"
    doc_id: Optional[str] = None
    author: str = ""


class RunSubmit(BaseModel):
    query_doc_id: str
    source_doc_id: str
    config: dict = Field(default_factory=dict)


class DecisionPut(BaseModel):
    query_seg_id: str
    source_seg_id: str
    verdict: str
    reviewer: str = ""


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message, **extra})


def _document_warnings(doc: Document) -> list[str]:
    warnings = []
    empty = sum(1 for seg in doc.segments if not seg.text.strip())
    if empty:
        warnings.append(f"{empty} segment(s) have empty text")
    with_lemmas = sum(1 for seg in doc.segments if seg.lemmas is not None)
    if 0 < with_lemmas < len(doc.segments):
        warnings.append(f"lemma_seq present on only {with_lemmas} of {len(doc.segments)} segments")
    return warnings


def _run_record(row) -> dict:
    return {
        "run_id": row["run_id"],
        "state": row["state"],
        "created_at": row["created_at"],
        "config": json.loads(row["config"]),
        "query_doc_id": row["query_doc"],
        "source_doc_id": row["source_doc"],
        "error": row["error"],
    }


def create_app(db_path: str | Path, inline_runs: bool = False) -> FastAPI:
    """Build the HTTP app over a sqlite store.

    ``inline_runs=True`` executes runs synchronously inside the submit
    request (still walking the pending/running/done states); the default
    spawns a worker thread per run and clients poll.
    """
    app = FastAPI(title="intertext service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = Store(db_path)
    app.state.store = store
    app.state.inline_runs = inline_runs

    @app.exception_handler(IntertextError)
    async def _intertext_error_handler(request: Request, exc: IntertextError):
        status = 422 if isinstance(exc, (SchemaError, ValidationError, ConfigurationError)) else 500
        return _error(status, exc.code, str(exc))

    def _execute_run(run_id: str) -> None:
        store.set_run_state(run_id, RunState.RUNNING)
        try:
            row = store.get_run(run_id)
            config = RunConfig.from_dict(json.loads(row["config"]))
            query = store.get_document(row["query_doc"])
            source = store.get_document(row["source_doc"])
            matches = execute(config, query, source)
            store.save_matches(run_id, matches)
            store.set_run_state(run_id, RunState.DONE)
        except Exception as exc:  # run failures land in the record, not the log
            store.set_run_state(run_id, RunState.FAILED, error=f"{type(exc).__name__}: {exc}")

    # ---- documents ----

    @app.post("/documents")
    def upload_document(body: DocumentUpload):
        try:
            role = Role(body.role)
        except ValueError:
            return _error(422, "validation_error", f"role must be 'query' or 'source', got {body.role!r}")
        doc_id = body.doc_id or f"doc-{uuid.uuid4().hex[:12]}"
        doc = parse_document(
            body.content, body.format, role=role, doc_id=doc_id, author=body.author, origin=doc_id
        )
        store.save_document(doc)
        return {
            "doc_id": doc.doc_id,
            "role": doc.role.value,
            "segment_count": len(doc.segments),
            "sha256": corpus_checksum(doc),
            "warnings": _document_warnings(doc),
        }

    @app.get("/documents")
    def list_documents():
        return {"documents": store.list_documents()}

    @app.get("/documents/{doc_id}")
    def get_document(doc_id: str):
        doc = store.get_document(doc_id)
        if doc is None:
            return _error(404, "not_found", f"unknown document {doc_id!r}")
        return {
            "doc_id": doc.doc_id,
            "role": doc.role.value,
            "author": doc.author,
            "segment_count": len(doc.segments),
            "segments": [{"id": seg.id, "ordinal": seg.ordinal, "text": seg.text} for seg in doc.segments],
        }

    # ---- runs ----

    @app.post("/runs")
    def submit_run(body: RunSubmit):
        config = RunConfig.from_dict(body.config)
        for doc_id, expected_role in ((body.query_doc_id, Role.QUERY), (body.source_doc_id, Role.SOURCE)):
            doc = store.get_document(doc_id)
            if doc is None:
                return _error(422, "validation_error", f"unknown document {doc_id!r}")
            if doc.role is not expected_role:
                return _error(
                    422,
                    "validation_error",
                    f"document {doc_id!r} has role {doc.role.value!r}, expected {expected_role.value!r}",
                )
        run_id = f"run-{uuid.uuid4().hex[:12]}"
        store.create_run(run_id, config, body.query_doc_id, body.source_doc_id)
        if app.state.inline_runs:
            _execute_run(run_id)
        else:
            threading.Thread(target=_execute_run, args=(run_id,), daemon=True).start()
        row = store.get_run(run_id)
        return _run_record(row)

    @app.get("/runs/{run_id}")
    def get_run(run_id: str):
        row = store.get_run(run_id)
        if row is None:
            return _error(404, "not_found", f"unknown run {run_id!r}")
        return _run_record(row)

    @app.get("/runs/{run_id}/results")
    def get_results(
        run_id: str,
        page: int = 1,
        page_size: int = 50,
        min_prob: Optional[float] = None,
        label: Optional[str] = None,
        query_seg_id: Optional[str] = None,
        format: str = "json",
    ):
        row = store.get_run(run_id)
        if row is None:
            return _error(404, "not_found", f"unknown run {run_id!r}")
        if row["state"] != RunState.DONE.value:
            return _error(409, "run_not_done", f"run {run_id!r} is {row['state']}", state=row["state"])
        if page < 1 or page_size < 1:
            return _error(422, "validation_error", "page and page_size must be >= 1")

        matches = store.get_matches(run_id)
        if min_prob is not None:
            matches = [m for m in matches if m.probability is not None and m.probability >= min_prob]
        if label is not None:
            matches = [m for m in matches if m.label.value == label]
        if query_seg_id is not None:
            matches = [m for m in matches if m.query_seg_id == query_seg_id]

        if format == "csv":
            return PlainTextResponse(matches_to_csv(matches), media_type="text/csv")
        if format == "jsonl":
            return PlainTextResponse(matches_to_jsonl(matches), media_type="application/x-ndjson")

        decisions = store.get_decisions(run_id)
        total = len(matches)
        start = (page - 1) * page_size
        items = []
        query_doc = store.get_document(row["query_doc"])
        source_doc = store.get_document(row["source_doc"])
        for m in matches[start : start + page_size]:
            decision = decisions.get((m.query_seg_id, m.source_seg_id))
            items.append(
                {
                    "query_seg_id": m.query_seg_id,
                    "source_seg_id": m.source_seg_id,
                    "query_text": query_doc[m.query_seg_id].text if query_doc else "",
                    "source_text": source_doc[m.source_seg_id].text if source_doc else "",
                    "similarity": m.similarity,
                    "probability": m.probability,
                    "label": m.label.value,
                    "origin": m.origin.value,
                    "shared_tokens": list(m.shared_tokens) if m.shared_tokens else None,
                    "verdict": decision["verdict"] if decision else Verdict.UNDECIDED.value,
                    "reviewer": decision["reviewer"] if decision else None,
                    "decided_at": decision["decided_at"] if decision else None,
                }
            )
        return {
            "run_id": run_id,
            "page": page,
            "page_size": page_size,
            "total": total,
            "total_pages": (total + page_size - 1) // page_size if total else 0,
            "items": items,
        }

    @app.put("/runs/{run_id}/decisions")
    def put_decision(run_id: str, body: DecisionPut):
        row = store.get_run(run_id)
        if row is None:
            return _error(404, "not_found", f"unknown run {run_id!r}")
        try:
            verdict = Verdict(body.verdict)
        except ValueError:
            return _error(422, "validation_error", f"unknown verdict {body.verdict!r}")
        if not store.match_exists(run_id, body.query_seg_id, body.source_seg_id):
            return _error(
                404,
                "not_found",
                f"no match ({body.query_seg_id!r}, {body.source_seg_id!r}) in run {run_id!r}",
            )
        return store.upsert_decision(
            run_id, body.query_seg_id, body.source_seg_id, verdict, body.reviewer
        )

    @app.get("/runs/{run_id}/export")
    def export_confirmed(run_id: str, format: str = "csv"):
        row = store.get_run(run_id)
        if row is None:
            return _error(404, "not_found", f"unknown run {run_id!r}")
        if row["state"] != RunState.DONE.value:
            return _error(409, "run_not_done", f"run {run_id!r} is {row['state']}", state=row["state"])
        decisions = store.get_decisions(run_id)
        confirmed = {
            key: dec for key, dec in decisions.items() if dec["verdict"] == Verdict.CONFIRMED.value
        }
        rows = []
        for m in store.get_matches(run_id):
            dec = confirmed.get((m.query_seg_id, m.source_seg_id))
            if dec is not None:
                rows.append((m.query_seg_id, m.source_seg_id, "unspecified", f"review:{dec['reviewer']}"))
        if format == "csv":
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerow(["query_seg_id", "source_seg_id", "category", "provenance"])
            writer.writerows(rows)
            return PlainTextResponse(buf.getvalue(), media_type="text/csv")
        body = "".join(
            json.dumps(
                {
                    "query_seg_id": q,
                    "source_seg_id": s,
                    "category": category,
                    "provenance": provenance,
                },
                ensure_ascii=False,
            )
            + "\n"
            for q, s, category, provenance in rows
        )
        return PlainTextResponse(body, media_type="application/x-ndjson")

    return app
