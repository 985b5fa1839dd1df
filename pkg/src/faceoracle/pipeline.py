"""End-to-end corpus ingestion: load, chunk, embed, index."""
from __future__ import annotations

from pathlib import Path

from .corpus import (
    DEFAULT_MAX_CHARS,
    DEFAULT_OVERLAP,
    Corpus,
    Document,
    chunk_document,
    load_directory,
    parse_front_matter,
)
from .embedding import embed_text
from .vector_index import VectorIndex


def ingest_documents(
    docs: list[Document],
    index: VectorIndex,
    max_chars: int = DEFAULT_MAX_CHARS,
    overlap: int = DEFAULT_OVERLAP,
) -> tuple[int, int]:
    """Chunk, embed, and upsert documents; returns (documents, chunks)."""
    chunk_total = 0
    for doc in docs:
        chunks = chunk_document(doc, max_chars=max_chars, overlap=overlap)
        if chunks:
            index.upsert_chunks([(chunk, embed_text(chunk.text)) for chunk in chunks])
        chunk_total += len(chunks)
    return len(docs), chunk_total


def ingest_directory(
    corpus: Corpus, index: VectorIndex, directory: Path | str
) -> tuple[int, int]:
    return ingest_documents(load_directory(corpus, directory), index)


def ingest_payload(
    corpus: Corpus, index: VectorIndex, documents: list[dict]
) -> tuple[int, int]:
    """Ingest {"name": ..., "text": ...} payloads (text may carry front matter)."""
    docs = []
    for item in documents:
        body, title, page_map = parse_front_matter(item["text"])
        docs.append(
            corpus.load_document(item["name"], body, title=title, page_map=page_map)
        )
    return ingest_documents(docs, index)
