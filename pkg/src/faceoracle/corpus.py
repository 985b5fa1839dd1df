"""Knowledge-source loading and chunking with page/paragraph provenance.

Documents are plain text (optionally with a front-matter header carrying a
title and a page map). Chunking is a fixed-stride character window so that
every chunk is an exact, addressable substring of its document.
"""
from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

from .errors import DuplicateDocId, InvalidChunkParams, InvalidEncoding, ParseError

DEFAULT_MAX_CHARS = 800
DEFAULT_OVERLAP = 160

# A paragraph separator is a maximal newline run containing at least two
# newlines; blank lines may hold spaces or tabs. The separator ends at its
# last newline.
_PARAGRAPH_BREAK = re.compile(r"\n(?:[ \t\r]*\n)+")

CORPUS_SUFFIXES = (".txt", ".md")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str
    page_map: tuple[tuple[int, int], ...] = ((0, 1),)

    def __post_init__(self) -> None:
        if not self.page_map or self.page_map[0][0] != 0:
            raise ValueError("page_map must start at offset 0")
        offsets = [off for off, _ in self.page_map]
        if any(b <= a for a, b in zip(offsets, offsets[1:])):
            raise ValueError("page_map offsets must be strictly increasing")

    def page_at(self, offset: int) -> int:
        offsets = [off for off, _ in self.page_map]
        return self.page_map[bisect_right(offsets, offset) - 1][1]


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    doc_id: str
    text: str
    char_start: int
    char_end: int
    page: int
    paragraph: int


def paragraph_breaks(text: str) -> list[int]:
    """End offsets of blank-line paragraph separators."""
    return [m.end() for m in _PARAGRAPH_BREAK.finditer(text)]


def paragraph_at(text: str, offset: int, breaks: list[int] | None = None) -> int:
    """1-based paragraph number of the block containing `offset`.

    Positions inside a partially-scanned separator belong to the preceding
    paragraph until the separator's final newline has passed.
    """
    if breaks is None:
        breaks = paragraph_breaks(text)
    return bisect_right(breaks, offset) + 1


def chunk_document(
    doc: Document,
    max_chars: int = DEFAULT_MAX_CHARS,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Chunk]:
    """Fixed-stride chunking: starts at 0, s, 2s, ... with s = max_chars - overlap.

    A candidate whose end does not extend past the previous chunk's end is
    suppressed (it would be fully contained). The empty document yields no
    chunks.
    """
    if max_chars <= 0 or overlap < 0 or overlap >= max_chars:
        raise InvalidChunkParams(
            "require max_chars > 0 and 0 <= overlap < max_chars "
            f"(got max_chars={max_chars}, overlap={overlap})"
        )
    text = doc.text
    breaks = paragraph_breaks(text)
    stride = max_chars - overlap
    chunks: list[Chunk] = []
    start = 0
    emitted = 0
    previous_end = 0
    while start < len(text):
        end = min(start + max_chars, len(text))
        if chunks and end <= previous_end:
            break
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}#{emitted}",
                doc_id=doc.doc_id,
                text=text[start:end],
                char_start=start,
                char_end=end,
                page=doc.page_at(start),
                paragraph=paragraph_at(text, start, breaks),
            )
        )
        emitted += 1
        previous_end = end
        start += stride
    return chunks


class Corpus:
    """Registry of loaded documents; doc_ids are unique for its lifetime."""

    def __init__(self) -> None:
        self._documents: dict[str, Document] = {}

    def __len__(self) -> int:
        return len(self._documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._documents

    def get(self, doc_id: str) -> Document:
        return self._documents[doc_id]

    def documents(self) -> list[Document]:
        return list(self._documents.values())

    def load_document(
        self,
        doc_id: str,
        payload: str | bytes,
        title: str | None = None,
        page_map: list[tuple[int, int]] | None = None,
    ) -> Document:
        if isinstance(payload, bytes):
            try:
                text = payload.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise InvalidEncoding(f"{doc_id}: {exc}") from None
        else:
            text = payload
        if doc_id in self._documents:
            raise DuplicateDocId(f"document already loaded: {doc_id}")
        doc = Document(
            doc_id=doc_id,
            title=title or doc_id,
            text=text,
            page_map=tuple(page_map) if page_map else ((0, 1),),
        )
        self._documents[doc_id] = doc
        return doc


def parse_front_matter(text: str) -> tuple[str, str | None, list[tuple[int, int]] | None]:
    """Split an optional front-matter header off a document body.

    The header is delimited by lines of "---" and may contain
    "title: ..." and "pages: off1:p1,off2:p2,..." entries.
    Returns (body, title, page_map).
    """
    if not text.startswith("---\n"):
        return text, None, None
    closing = text.find("\n---\n", 3)
    if closing == -1:
        raise ParseError("unterminated front-matter block")
    header = text[4:closing]
    body = text[closing + len("\n---\n") :]
    title: str | None = None
    page_map: list[tuple[int, int]] | None = None
    for line in header.splitlines():
        line = line.strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"malformed front-matter line: {line!r}")
        key, _, value = line.partition(":")
        key = key.strip().lower()
        value = value.strip()
        if key == "title":
            title = value
        elif key == "pages":
            try:
                page_map = [
                    (int(off), int(page))
                    for off, page in (pair.split(":") for pair in value.split(","))
                ]
            except ValueError:
                raise ParseError(f"malformed pages entry: {value!r}") from None
        # unknown keys are ignored so headers can carry extra metadata
    return body, title, page_map


def load_document_file(corpus: Corpus, path: Path) -> Document:
    raw = path.read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidEncoding(f"{path.name}: {exc}") from None
    body, title, page_map = parse_front_matter(text)
    return corpus.load_document(path.name, body, title=title, page_map=page_map)


def load_directory(corpus: Corpus, directory: Path | str) -> list[Document]:
    """Load every .txt/.md file from a directory, sorted by name."""
    directory = Path(directory)
    docs = []
    for path in sorted(directory.iterdir()):
        if path.suffix.lower() in CORPUS_SUFFIXES and path.is_file():
            docs.append(load_document_file(corpus, path))
    return docs
