"""Exact in-memory similarity index over chunk embeddings.

Search is an exhaustive cosine scan: corpora here are document-scale and
the evaluation metrics need fully deterministic retrieval, so there is no
approximate structure to drift from ground truth. Readers work off an
immutable search state that writers swap atomically, so a search running
concurrently with an upsert sees either the old or the new index, never a
partial one.
"""
from __future__ import annotations

import base64
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Chunk
from .embedding import EMBEDDING_DIM
from .errors import DimensionMismatch, ParseError, ZeroVector

SNAPSHOT_MAGIC = "FOVIDX"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    similarity: float


class _SearchState:
    """Immutable view of the index contents, ordered by chunk_id."""

    __slots__ = ("chunks", "matrix", "norms")

    def __init__(self, entries: dict[str, tuple[Chunk, np.ndarray]]) -> None:
        searchable = [
            (chunk_id, chunk, vec)
            for chunk_id, (chunk, vec) in sorted(entries.items())
            if np.any(vec)  # zero vectors are stored but never returned
        ]
        self.chunks = [chunk for _, chunk, _ in searchable]
        if searchable:
            self.matrix = np.stack([vec for _, _, vec in searchable])
            self.norms = np.linalg.norm(self.matrix, axis=1)
        else:
            self.matrix = np.zeros((0, 0))
            self.norms = np.zeros(0)


class VectorIndex:
    def __init__(self, dim: int = EMBEDDING_DIM) -> None:
        self.dim = dim
        self._entries: dict[str, tuple[Chunk, np.ndarray]] = {}
        self._state: _SearchState | None = None
        self._write_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def upsert_chunks(self, entries: list[tuple[Chunk, np.ndarray]]) -> int:
        """Insert or replace entries keyed by chunk_id; returns the count applied."""
        validated = []
        for chunk, vec in entries:
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (self.dim,):
                raise DimensionMismatch(
                    f"expected dimension {self.dim}, got shape {arr.shape}"
                )
            validated.append((chunk, arr))
        with self._write_lock:
            merged = dict(self._entries)
            for chunk, arr in validated:
                merged[chunk.chunk_id] = (chunk, arr)
            self._entries = merged
            self._state = None
        return len(validated)

    def _search_state(self) -> _SearchState:
        state = self._state
        if state is None:
            with self._write_lock:
                state = self._state
                if state is None:
                    state = _SearchState(self._entries)
                    self._state = state
        return state

    def search(self, query: np.ndarray, k: int) -> list[ScoredChunk]:
        """Top-k by cosine similarity, ties broken by chunk_id ascending."""
        if k < 1:
            raise ValueError("k must be >= 1")
        q = np.asarray(query, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatch(
                f"expected dimension {self.dim}, got shape {q.shape}"
            )
        q_norm = float(np.linalg.norm(q))
        if q_norm == 0.0:
            raise ZeroVector("cannot search with the zero vector")
        state = self._search_state()
        if not state.chunks:
            return []
        sims = (state.matrix @ q) / (state.norms * q_norm)
        np.clip(sims, -1.0, 1.0, out=sims)
        # rows are pre-sorted by chunk_id, so a stable sort on -similarity
        # yields the documented tie-break for free
        order = np.argsort(-sims, kind="stable")[:k]
        return [ScoredChunk(state.chunks[i], float(sims[i])) for i in order]

    # --- snapshot persistence ---

    def save_snapshot(self, path: Path | str) -> None:
        entries = self._entries  # atomic grab of a complete dict
        lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {self.dim} {len(entries)}\n".encode()]
        for chunk_id in sorted(entries):
            chunk, vec = entries[chunk_id]
            vec_b64 = base64.b64encode(vec.astype("<f4").tobytes()).decode("ascii")
            fields = (
                chunk.chunk_id,
                chunk.doc_id,
                str(chunk.char_start),
                str(chunk.char_end),
                str(chunk.page),
                str(chunk.paragraph),
                vec_b64,
                chunk.text,
            )
            encoded = b" ".join(_prefix(field) for field in fields)
            lines.append(encoded + b"\n")
        Path(path).write_bytes(b"".join(lines))

    @classmethod
    def load_snapshot(cls, path: Path | str) -> "VectorIndex":
        data = Path(path).read_bytes()
        newline = data.find(b"\n")
        if newline == -1:
            raise ParseError("snapshot missing header line")
        header = data[:newline].decode("ascii", errors="replace").split(" ")
        if len(header) != 4 or header[0] != SNAPSHOT_MAGIC:
            raise ParseError("not a vector index snapshot")
        try:
            version, dim, count = int(header[1]), int(header[2]), int(header[3])
        except ValueError:
            raise ParseError("malformed snapshot header") from None
        if version != SNAPSHOT_VERSION:
            raise ParseError(f"unsupported snapshot version {version}")
        index = cls(dim=dim)
        pos = newline + 1
        entries = []
        for _ in range(count):
            fields, pos = _read_record(data, pos)
            chunk_id, doc_id, start, end, page, paragraph, vec_b64, text = fields
            try:
                vec = np.frombuffer(
                    base64.b64decode(vec_b64, validate=True), dtype="<f4"
                ).astype(np.float64)
                chunk = Chunk(
                    chunk_id=chunk_id.decode("utf-8"),
                    doc_id=doc_id.decode("utf-8"),
                    text=text.decode("utf-8"),
                    char_start=int(start),
                    char_end=int(end),
                    page=int(page),
                    paragraph=int(paragraph),
                )
            except (ValueError, UnicodeDecodeError) as exc:
                raise ParseError(f"malformed snapshot record: {exc}") from None
            if vec.shape != (dim,):
                raise ParseError("snapshot vector has wrong dimension")
            entries.append((chunk, vec))
        index.upsert_chunks(entries)
        return index


def _prefix(field: str) -> bytes:
    raw = field.encode("utf-8")
    return str(len(raw)).encode("ascii") + b":" + raw


def _read_record(data: bytes, pos: int) -> tuple[list[bytes], int]:
    fields: list[bytes] = []
    for i in range(8):
        colon = data.find(b":", pos)
        if colon == -1:
            raise ParseError("truncated snapshot record")
        try:
            length = int(data[pos:colon])
        except ValueError:
            raise ParseError("malformed length prefix") from None
        start = colon + 1
        end = start + length
        terminator = data[end : end + 1]
        expected = b"\n" if i == 7 else b" "
        if end > len(data) or terminator != expected:
            raise ParseError("truncated snapshot record")
        fields.append(data[start:end])
        pos = end + 1
    return fields, pos
