"""Pair classification: token-budget input construction, scoring, thresholding.

A pair classifier sees the query and the candidate as one paired input. To
keep either side from crowding out the other, both parts are truncated to
half the token budget before they are handed to the provider. Separator
tokens between the parts are the provider's concern; the engine passes two
text parts.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import httpx

from .corpus import Segment, tokenize
from .errors import ConfigurationError, ProviderContractError, TransportError


class Label(Enum):
    REFERENCE = "reference"
    NO_REFERENCE = "no_reference"


class PairClassifierProvider(ABC):
    """Scores (query_text, candidate_text) pairs with link probabilities."""

    name: str = "abstract"
    max_tokens: int = 512

    @abstractmethod
    def classify(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        """One probability in [0, 1] per pair, aligned with the input order."""


class TokenJaccardClassifier(PairClassifierProvider):
    """Deterministic mock classifier for tests and desk-scale runs.

    Probability is the Jaccard overlap of the two parts' normalized token
    sets: |A & B| / |A | B|. Two empty parts are identical, so they score
    1.0; disjoint vocabularies score 0.0.
    """

    def __init__(self, max_tokens: int = 512):
        if max_tokens < 2:
            raise ConfigurationError("max_tokens must be >= 2")
        self.name = f"jaccard-{max_tokens}"
        self.max_tokens = max_tokens

    def classify(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        probs = []
        for query_text, candidate_text in pairs:
            a = set(tokenize(query_text))
            b = set(tokenize(candidate_text))
            union = a | b
            probs.append(len(a & b) / len(union) if union else 1.0)
        return probs


class RemotePairClassifier(PairClassifierProvider):
    """HTTP classifier endpoint: POST {"pairs": [[q, c], ...]} -> {"probs": [...]}."""

    def __init__(
        self,
        url: str,
        max_tokens: int = 512,
        batch_size: int = 64,
        timeout: float = 30.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        if max_tokens < 2:
            raise ConfigurationError("max_tokens must be >= 2")
        if batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        self.name = f"remote:{url}"
        self.url = url
        self.max_tokens = max_tokens
        self.batch_size = batch_size
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def classify(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        probs: list[float] = []
        for start in range(0, len(pairs), self.batch_size):
            batch = pairs[start : start + self.batch_size]
            try:
                resp = self._client.post(self.url, json={"pairs": [[q, c] for q, c in batch]})
                resp.raise_for_status()
            except httpx.HTTPError as exc:
                raise TransportError(f"classifier endpoint failed: {exc}") from exc
            payload = resp.json()
            if "probs" not in payload:
                raise ProviderContractError("classifier endpoint response lacks 'probs'")
            batch_probs = payload["probs"]
            if len(batch_probs) != len(batch):
                raise ProviderContractError(
                    f"classifier endpoint returned {len(batch_probs)} probs for {len(batch)} pairs"
                )
            probs.extend(float(p) for p in batch_probs)
        return probs


@dataclass(frozen=True)
class PairInput:
    """Query and candidate token lists fitting a shared budget."""

    query_part: tuple[str, ...]
    candidate_part: tuple[str, ...]

    @property
    def query_text(self) -> str:
        return " ".join(self.query_part)

    @property
    def candidate_text(self) -> str:
        return " ".join(self.candidate_part)


@dataclass(frozen=True)
class Decision:
    probability: float
    threshold: float
    label: Label


def build_pair_input(query: Segment, candidate: Segment, budget: int) -> PairInput:
    """Truncate both sides to half the token budget.

    The query part keeps at most floor(budget/2) tokens, the candidate part
    the remaining budget - floor(budget/2). Segments already within their
    half are left untouched. Token counts use whitespace tokens as a proxy
    for provider tokenization (documented approximation; the providers here
    cannot report their own tokenizers).
    """
    if budget < 2:
        raise ConfigurationError("token budget must be >= 2")
    query_limit = budget // 2
    candidate_limit = budget - query_limit
    return PairInput(
        query_part=tuple(query.text.split()[:query_limit]),
        candidate_part=tuple(candidate.text.split()[:candidate_limit]),
    )


def classify_pairs(provider: PairClassifierProvider, pairs: Sequence[PairInput]) -> list[float]:
    """Score built pair inputs; validates count and [0, 1] range."""
    texts = [(p.query_text, p.candidate_text) for p in pairs]
    probs = provider.classify(texts)
    if len(probs) != len(pairs):
        raise ProviderContractError(
            f"provider {provider.name!r} returned {len(probs)} probabilities for {len(pairs)} pairs"
        )
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ProviderContractError(f"provider {provider.name!r} returned probability {p} outside [0, 1]")
    return [float(p) for p in probs]


def decide(prob: float, threshold: float) -> Decision:
    """Binary decision: reference iff prob >= threshold (boundary inclusive)."""
    if not 0.0 <= prob <= 1.0:
        raise ConfigurationError(f"probability {prob} outside [0, 1]")
    if not 0.0 <= threshold <= 1.0:
        raise ConfigurationError(f"threshold {threshold} outside [0, 1]")
    label = Label.REFERENCE if prob >= threshold else Label.NO_REFERENCE
    return Decision(probability=prob, threshold=threshold, label=label)
