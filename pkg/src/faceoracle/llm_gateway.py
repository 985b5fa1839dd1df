"""Text-generation backends behind a single contract.

The scripted backend is a deterministic template engine used by tests and
offline runs; the remote backend posts the request to an HTTP endpoint.
Both run the same citation post-filter, so an answer can never cite a
chunk that was not part of its request context.
"""
from __future__ import annotations

import json
import logging
import os
import re
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Sequence

from .errors import BackendTimeout, BackendUnavailable
from .image_quality import MEASURE_LABELS

logger = logging.getLogger(__name__)

CITATION_PATTERN = re.compile(r"\[src:([^\[\]\s]+)\]")
REFUSAL_TEXT = "I could not find supporting information."

ENV_LLM_URL = "FACEORACLE_LLM_URL"
ENV_LLM_KEY = "FACEORACLE_LLM_KEY"
REMOTE_TIMEOUT_SECONDS = 30.0


@dataclass(frozen=True)
class ContextBlock:
    """A retrieved passage plus the provenance needed to cite it."""

    chunk_id: str
    text: str
    doc_id: str
    page: int
    paragraph: int


@dataclass(frozen=True)
class ToolReading:
    measure_id: str
    quality: int
    raw: float


@dataclass(frozen=True)
class GenerationRequest:
    system_instructions: str
    context_blocks: tuple[ContextBlock, ...] = ()
    tool_results: tuple[ToolReading, ...] = ()
    history: tuple[tuple[str, str], ...] = ()  # (role, text), chronological
    user_query: str = ""


@dataclass(frozen=True)
class GenerationResponse:
    text: str
    cited_chunk_ids: tuple[str, ...]


def render_tool_sentences(values: Sequence[tuple[str, int]]) -> str:
    """Verbalize (measure_id, quality) pairs, one clause per measure."""
    clauses = []
    for i, (measure_id, quality) in enumerate(values):
        label = MEASURE_LABELS.get(measure_id, measure_id)
        article = "The" if i == 0 else "the"
        clauses.append(f"{article} {label} measure has the value of {quality}")
    return ", and ".join(clauses) + "."


def first_sentence(text: str) -> str:
    stripped = text.strip()
    for i, ch in enumerate(stripped):
        if ch in ".!?":
            return stripped[: i + 1]
    return stripped


def extract_citations(text: str) -> list[str]:
    """Chunk ids cited via [src:...] markers, deduplicated in order."""
    seen: list[str] = []
    for match in CITATION_PATTERN.finditer(text):
        chunk_id = match.group(1)
        if chunk_id not in seen:
            seen.append(chunk_id)
    return seen


class LlmGateway:
    """Base class: runs a backend and filters its citations."""

    def complete(self, request: GenerationRequest) -> GenerationResponse:
        if not request.user_query:
            raise ValueError("user_query must be non-empty")
        text = self._generate(request)
        known = {block.chunk_id for block in request.context_blocks}
        cited: list[str] = []
        for chunk_id in extract_citations(text):
            if chunk_id in known:
                cited.append(chunk_id)
            else:
                logger.warning("stripping citation of unknown chunk %r", chunk_id)
                marker = f"[src:{chunk_id}]"
                text = text.replace(" " + marker, "").replace(marker, "")
        return GenerationResponse(text=text, cited_chunk_ids=tuple(cited))

    def _generate(self, request: GenerationRequest) -> str:
        raise NotImplementedError


class ScriptedGateway(LlmGateway):
    """Deterministic template backend; a pure function of the request.

    Tool results are verbalized first; then the first sentence of the
    highest-ranked context block is echoed with its provenance and
    citation marker; with no evidence at all, a fixed refusal is returned.
    """

    def _generate(self, request: GenerationRequest) -> str:
        parts = []
        if request.tool_results:
            parts.append(
                render_tool_sentences(
                    [(r.measure_id, r.quality) for r in request.tool_results]
                )
            )
        if request.context_blocks:
            top = request.context_blocks[0]
            parts.append(
                f"{first_sentence(top.text)} "
                f"Source: {top.doc_id}, page {top.page}, paragraph {top.paragraph}. "
                f"[src:{top.chunk_id}]"
            )
        if not parts:
            return REFUSAL_TEXT
        return " ".join(parts)


def request_to_wire(request: GenerationRequest) -> dict:
    """JSON-serializable form of a request (the remote wire format)."""
    return {
        "system_instructions": request.system_instructions,
        "context_blocks": [
            {
                "chunk_id": b.chunk_id,
                "text": b.text,
                "doc_id": b.doc_id,
                "page": b.page,
                "paragraph": b.paragraph,
            }
            for b in request.context_blocks
        ],
        "tool_results": [
            {"measure_id": r.measure_id, "quality": r.quality, "raw": r.raw}
            for r in request.tool_results
        ],
        "history": [{"role": role, "text": text} for role, text in request.history],
        "user_query": request.user_query,
    }


class RemoteGateway(LlmGateway):
    """Single HTTP POST per completion; no retries, the caller surfaces errors.

    The endpoint URL and bearer token come from FACEORACLE_LLM_URL and
    FACEORACLE_LLM_KEY unless given explicitly. The endpoint receives the
    request as one JSON object and must reply {"text": "..."}.
    """

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        timeout: float = REMOTE_TIMEOUT_SECONDS,
    ) -> None:
        self.url = url or os.environ.get(ENV_LLM_URL)
        self.api_key = api_key or os.environ.get(ENV_LLM_KEY)
        self.timeout = timeout

    def _generate(self, request: GenerationRequest) -> str:
        if not self.url:
            raise BackendUnavailable(f"no backend URL configured ({ENV_LLM_URL})")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        http_request = urllib.request.Request(
            self.url,
            data=json.dumps(request_to_wire(request)).encode("utf-8"),
            headers=headers,
            method="POST",
        )
        try:
            with urllib.request.urlopen(http_request, timeout=self.timeout) as response:
                body = response.read()
        except urllib.error.HTTPError as exc:
            raise BackendUnavailable(f"backend returned HTTP {exc.code}") from None
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (TimeoutError, socket.timeout)):
                raise BackendTimeout(f"backend timed out after {self.timeout}s") from None
            raise BackendUnavailable(f"backend unreachable: {exc.reason}") from None
        except (TimeoutError, socket.timeout):
            raise BackendTimeout(f"backend timed out after {self.timeout}s") from None
        try:
            payload = json.loads(body)
            text = payload["text"]
        except (ValueError, KeyError, TypeError):
            raise BackendUnavailable("malformed backend response") from None
        if not isinstance(text, str):
            raise BackendUnavailable("malformed backend response")
        return text
