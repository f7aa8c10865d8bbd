"""Synthetic corpus builders shared across the test suite."""

from __future__ import annotations

import random

from intertext.corpus import Document, LinkRecord, Role, Segment

_SYLLABLES = [
    "ba", "ca", "da", "fa", "ga", "la", "ma", "na", "pa", "ra", "sa", "ta",
    "be", "ce", "de", "fe", "ge", "le", "me", "ne", "pe", "re", "se", "te",
    "bi", "ci", "di", "fi", "gi", "li", "mi", "ni", "pi", "ri", "si", "ti",
    "bo", "co", "do", "fo", "go", "lo", "mo", "no", "po", "ro", "so", "to",
    "bu", "cu", "du", "fu", "gu", "lu", "mu", "nu", "pu", "ru", "su", "tu",
]


def make_vocab(size: int, seed: int = 0) -> list[str]:
    """Deterministic pseudo-Latin vocabulary."""
    rng = random.Random(seed)
    vocab: set[str] = set()
    while len(vocab) < size:
        word = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 4)))
        vocab.add(word)
    return sorted(vocab)


def synth_document(
    n_segments: int,
    seed: int,
    role: Role,
    doc_id: str,
    vocab: list[str] | None = None,
    min_len: int = 4,
    max_len: int = 12,
) -> Document:
    rng = random.Random(seed)
    vocab = vocab or make_vocab(300, seed=7)
    segments = []
    for i in range(n_segments):
        words = [rng.choice(vocab) for _ in range(rng.randint(min_len, max_len))]
        segments.append(
            Segment(id=f"{doc_id}-s{i}", ordinal=i, text=" ".join(words) + ".")
        )
    return Document(doc_id=doc_id, author="synthetic", role=role, segments=tuple(segments))


def synth_pair_with_links(
    n_query: int,
    n_source: int,
    n_links: int,
    seed: int,
    vocab_size: int = 300,
    reuse_tokens: tuple[int, int] = (4, 7),
) -> tuple[Document, Document, list[LinkRecord]]:
    """Query/source documents where some query segments reuse source tokens.

    Link i pairs query segment i with source segment i; the query segment
    copies a token run from the source segment (shuffled, plus filler), so
    mock providers score those pairs clearly above background.
    """
    assert n_links <= min(n_query, n_source)
    rng = random.Random(seed)
    vocab = make_vocab(vocab_size, seed=seed + 1)
    source = synth_document(n_source, seed + 2, Role.SOURCE, "src", vocab=vocab)

    segments = []
    links = []
    for i in range(n_query):
        seg_id = f"qry-s{i}"
        if i < n_links:
            src_tokens = list(source.segments[i].tokens)
            take = min(len(src_tokens), rng.randint(*reuse_tokens))
            reused = src_tokens[:take]
            rng.shuffle(reused)
            filler = [rng.choice(vocab)]
            words = reused + filler
            links.append(LinkRecord(query_seg_id=seg_id, source_seg_id=source.segments[i].id))
        else:
            words = [rng.choice(vocab) for _ in range(rng.randint(4, 12))]
        segments.append(Segment(id=seg_id, ordinal=i, text=" ".join(words) + "."))
    query = Document(doc_id="qry", author="synthetic", role=Role.QUERY, segments=tuple(segments))
    return query, source, links
