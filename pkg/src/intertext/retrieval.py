"""Dense retrieval: embedding providers, an exact cosine index, and top-k search.

Embedding is delegated to pluggable providers so fine-tuned encoders can run
offline (precomputed vector files) or behind an HTTP endpoint. The index is
a brute-force exact cosine scan; source corpora in this domain are small
enough that approximate structures would only obscure the benchmark.
"""

from __future__ import annotations

import hashlib
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import httpx
import numpy as np

from .corpus import Segment, tokenize
from .errors import (
    ConfigurationError,
    ProviderContractError,
    TransportError,
    ValidationError,
)

QUERY_PREFIX = "Query: "
CANDIDATE_PREFIX = "Candidate: "

EMBED_ROLES = ("query", "candidate")


class EmbeddingProvider(ABC):
    """Maps texts to fixed-dimension vectors, deterministically.

    ``ids`` is optional context: error reporting for remote providers, the
    lookup key for file-backed ones.
    """

    name: str = "abstract"
    dim: int = 0

    @abstractmethod
    def embed(self, texts: Sequence[str], ids: Optional[Sequence[str]] = None) -> np.ndarray:
        """Return an array of shape (len(texts), dim)."""


class HashEmbeddingProvider(EmbeddingProvider):
    """Deterministic mock embedder for tests and desk-scale runs.

    The vector for a text is derived as follows: normalize the text with
    :func:`intertext.corpus.tokenize` and join with single spaces; hash
    ``"{seed}|{normalized}"`` with SHA-256; seed ``numpy.random.default_rng``
    with the first 8 digest bytes (big-endian); draw ``dim`` standard
    normals; L2-normalize. Identical normalized texts therefore map to
    identical unit vectors.
    """

    def __init__(self, dim: int = 16, seed: int = 0):
        if dim < 2:
            raise ConfigurationError("hash embedder needs dim >= 2")
        self.name = f"hash-{dim}-{seed}"
        self.dim = dim
        self.seed = seed

    def _vector(self, text: str) -> np.ndarray:
        normalized = " ".join(tokenize(text))
        digest = hashlib.sha256(f"{self.seed}|{normalized}".encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        vec = rng.standard_normal(self.dim)
        return vec / np.linalg.norm(vec)

    def embed(self, texts: Sequence[str], ids: Optional[Sequence[str]] = None) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.stack([self._vector(t) for t in texts])


class FileVectorProvider(EmbeddingProvider):
    """Precomputed vectors keyed by segment id.

    Supports JSONL files of ``{"id": ..., "vector": [...]}`` and ``.npz``
    archives with ``ids`` and ``vectors`` arrays. Texts passed to ``embed``
    are ignored; the prefix handling happened when the vectors were
    exported.
    """

    def __init__(self, path: str | Path, name: Optional[str] = None):
        path = Path(path)
        self.name = name or f"file:{path.name}"
        self._vectors: dict[str, np.ndarray] = {}
        if path.suffix == ".npz":
            data = np.load(path)
            ids = [str(i) for i in data["ids"]]
            vectors = np.asarray(data["vectors"], dtype=float)
            if len(ids) != len(vectors):
                raise ValidationError(f"{path}: ids and vectors have different lengths")
            for seg_id, vec in zip(ids, vectors):
                self._vectors[seg_id] = vec
        else:
            for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
                if not line.strip():
                    continue
                obj = json.loads(line)
                self._vectors[str(obj["id"])] = np.asarray(obj["vector"], dtype=float)
        if not self._vectors:
            raise ValidationError(f"{path}: no vectors found")
        dims = {v.shape[0] for v in self._vectors.values()}
        if len(dims) != 1:
            raise ConfigurationError(f"{path}: mixed vector dimensions {sorted(dims)}")
        self.dim = dims.pop()

    def embed(self, texts: Sequence[str], ids: Optional[Sequence[str]] = None) -> np.ndarray:
        if ids is None:
            raise ConfigurationError("file-backed provider needs segment ids to look up vectors")
        if len(ids) != len(texts):
            raise ConfigurationError("ids and texts must have equal length")
        missing = [i for i in ids if i not in self._vectors]
        if missing:
            raise ValidationError(f"no precomputed vector for segment(s): {', '.join(missing[:5])}")
        if not ids:
            return np.zeros((0, self.dim))
        return np.stack([self._vectors[i] for i in ids])


class RemoteEmbeddingProvider(EmbeddingProvider):
    """HTTP embedding endpoint: POST {"texts": [...]} -> {"vectors": [[...]]}.

    Requests are batched; the vector dimension is asserted on the first
    response. Transport failures raise a retryable error carrying the
    segment ids of the failed batch.
    """

    def __init__(
        self,
        url: str,
        dim: Optional[int] = None,
        batch_size: int = 64,
        timeout: float = 30.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        if batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        self.name = f"remote:{url}"
        self.url = url
        self.dim = dim or 0
        self.batch_size = batch_size
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post_batch(self, texts: Sequence[str], ids: Sequence[str]) -> np.ndarray:
        try:
            resp = self._client.post(self.url, json={"texts": list(texts)})
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding endpoint failed: {exc}", segment_ids=ids) from exc
        payload = resp.json()
        if "vectors" not in payload:
            raise ProviderContractError("embedding endpoint response lacks 'vectors'")
        vectors = np.asarray(payload["vectors"], dtype=float)
        if vectors.ndim != 2 or len(vectors) != len(texts):
            raise ProviderContractError(
                f"embedding endpoint returned {vectors.shape} for {len(texts)} texts"
            )
        if self.dim == 0:
            self.dim = int(vectors.shape[1])
        elif vectors.shape[1] != self.dim:
            raise ConfigurationError(
                f"embedding dimension changed from {self.dim} to {vectors.shape[1]}"
            )
        return vectors

    def embed(self, texts: Sequence[str], ids: Optional[Sequence[str]] = None) -> np.ndarray:
        ids = list(ids) if ids is not None else [str(i) for i in range(len(texts))]
        batches = []
        for start in range(0, len(texts), self.batch_size):
            batch = texts[start : start + self.batch_size]
            batches.append(self._post_batch(batch, ids[start : start + self.batch_size]))
        if not batches:
            return np.zeros((0, self.dim))
        return np.vstack(batches)


def embed_segments(
    provider: EmbeddingProvider, segs: Sequence[Segment], role: str
) -> np.ndarray:
    """Embed segments with the role prefix prepended verbatim.

    ``role="query"`` prepends ``"Query: "``, ``role="candidate"`` prepends
    ``"Candidate: "``. Output row order matches input order.
    """
    if role not in EMBED_ROLES:
        raise ConfigurationError(f"embedding role must be one of {EMBED_ROLES}")
    prefix = QUERY_PREFIX if role == "query" else CANDIDATE_PREFIX
    texts = [prefix + seg.text for seg in segs]
    ids = [seg.id for seg in segs]
    vectors = provider.embed(texts, ids=ids)
    vectors = np.asarray(vectors, dtype=float)
    if vectors.shape[0] != len(texts):
        raise ProviderContractError(
            f"provider {provider.name!r} returned {vectors.shape[0]} vectors for {len(texts)} inputs"
        )
    if len(texts) and vectors.shape[1] != provider.dim:
        raise ConfigurationError(
            f"provider {provider.name!r} returned dimension {vectors.shape[1]}, expected {provider.dim}"
        )
    return vectors


@dataclass(frozen=True)
class VectorIndex:
    """Unit-normalized source vectors in document order."""

    ids: tuple[str, ...]
    matrix: np.ndarray  # shape (n, dim), rows unit-norm
    dim: int

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(frozen=True)
class RankedCandidate:
    source_seg_id: str
    similarity: float
    rank: int


def build_index(ids: Sequence[str], vectors: np.ndarray | Sequence[Sequence[float]]) -> VectorIndex:
    """Normalize vectors and build an index; rejects zero vectors and dup ids."""
    try:
        matrix = np.asarray(vectors, dtype=float)
    except ValueError as exc:
        raise ValidationError(f"vectors are not of uniform dimension: {exc}") from exc
    if matrix.ndim == 1 and len(ids):
        matrix = matrix.reshape(len(ids), -1)
    if matrix.ndim != 2 and len(ids):
        raise ValidationError("vectors are not of uniform dimension")
    if len(ids) != matrix.shape[0]:
        raise ValidationError(f"{len(ids)} ids for {matrix.shape[0]} vectors")
    seen: set[str] = set()
    for seg_id in ids:
        if seg_id in seen:
            raise ValidationError(f"duplicate segment id {seg_id!r} in index")
        seen.add(seg_id)
    if matrix.shape[0] == 0:
        return VectorIndex(ids=(), matrix=matrix.reshape(0, 0), dim=0)
    norms = np.linalg.norm(matrix, axis=1)
    zero = np.where(norms == 0.0)[0]
    if zero.size:
        raise ValidationError(f"zero-norm vector for segment {ids[int(zero[0])]!r}")
    return VectorIndex(
        ids=tuple(str(i) for i in ids),
        matrix=matrix / norms[:, None],
        dim=int(matrix.shape[1]),
    )


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    """Cosine similarity of two vectors (0.0 when either has zero norm)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def topk(index: VectorIndex, query_vec: Sequence[float], k: int) -> list[RankedCandidate]:
    """The k highest-cosine index entries for a query vector.

    Exact exhaustive search. Ties are broken by ascending position in the
    index (document order), so repeated runs produce identical rankings.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if len(index) == 0:
        return []
    query = np.asarray(query_vec, dtype=float)
    if query.shape != (index.dim,):
        raise ConfigurationError(f"query vector has shape {query.shape}, index dim is {index.dim}")
    norm = np.linalg.norm(query)
    if norm == 0.0:
        raise ValidationError("query vector has zero norm")
    sims = np.clip(index.matrix @ (query / norm), -1.0, 1.0)
    order = np.lexsort((np.arange(len(sims)), -sims))[: min(k, len(sims))]
    return [
        RankedCandidate(source_seg_id=index.ids[int(i)], similarity=float(sims[int(i)]), rank=r)
        for r, i in enumerate(order, start=1)
    ]


def write_vectors(ids: Sequence[str], vectors: np.ndarray, path: str | Path) -> Path:
    """Export vectors in the JSONL format FileVectorProvider reads."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for seg_id, vec in zip(ids, np.asarray(vectors, dtype=float)):
            f.write(json.dumps({"id": seg_id, "vector": [float(x) for x in vec]}) + "\n")
    return path
