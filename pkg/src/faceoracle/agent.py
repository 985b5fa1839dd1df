"""The conversation engine: planning, tool execution, evidence, answers.

Routing is a deterministic synonym table rather than model-driven function
calling, so tool selection accuracy is measurable offline; an LLM-routed
planner can be slotted behind the same plan() interface later.
"""
from __future__ import annotations

import logging
import re
import time
from dataclasses import dataclass, field, replace

from .embedding import embed_text
from .errors import NoImageAttached
from .image_quality import (
    MEASURE_LABELS,
    UNIFIED_MEASURE_ID,
    FaceAnnotation,
    LumaImage,
    QualityComponent,
    assess,
    decode_image,
    default_face_region,
)
from .llm_gateway import ContextBlock, GenerationRequest, LlmGateway, ToolReading
from .vector_index import ScoredChunk, VectorIndex

logger = logging.getLogger(__name__)

HISTORY_WINDOW = 20  # working-memory turns presented to the generator
DEFAULT_TOP_K = 4
MAX_CYCLES = 2

# Versioned system instructions; part of every generation request. v1.
SYSTEM_INSTRUCTIONS = (
    "You are FaceOracle, an assistant for face image quality assessment at a "
    "document issuing authority. Answer using only the provided tool results "
    "and context passages, cite supporting passages with [src:<chunk_id>] "
    "markers, and say plainly when no supporting information is available."
)

MEASURE_SYNONYMS: dict[str, tuple[str, ...]] = {
    "dynamic_range": ("dynamic range",),
    "over_exposure": ("overexposure", "over-exposure", "over exposure"),
    "under_exposure": ("underexposure", "under-exposure", "under exposure"),
    "illumination_uniformity": ("illumination uniformity", "lighting uniformity"),
    "background_uniformity": ("background uniformity",),
    "sharpness": ("sharpness", "blurriness"),
    "unified_quality_score": ("unified quality score", "overall quality"),
    "expression_neutrality": ("expression neutrality", "neutral expression"),
    "pose": ("pose",),
    "mouth_closed": ("mouth closed", "closed mouth"),
    "occlusion": ("occlusion", "occlusions"),
}

# Longest phrase first; a shorter phrase inside an already-matched span is
# ignored.
_MATCHERS: list[tuple[str, str, re.Pattern[str]]] = sorted(
    (
        (phrase, measure_id, re.compile(r"\b" + re.escape(phrase) + r"\b"))
        for measure_id, phrases in MEASURE_SYNONYMS.items()
        for phrase in phrases
    ),
    key=lambda item: (-len(item[0]), item[0]),
)

# Phrases that mark a query as definitional/interrogative; these route to
# retrieval. Note "what are the ... values" questions deliberately do not
# match, so pure value questions stay tool-only.
_DEFINITIONAL_PATTERNS: tuple[re.Pattern[str], ...] = tuple(
    re.compile(r"\b" + phrase + r"\b")
    for phrase in (
        "what is",
        "what does",
        "define",
        "definition",
        "meaning",
        "means",
        "mean",
        "explain",
        "why",
        "how",
    )
)


@dataclass
class ChatTurn:
    role: str  # "user" | "assistant"
    text: str
    image_id: str | None = None
    timestamp: float = 0.0


@dataclass
class ChatSession:
    session_id: str
    turns: list[ChatTurn] = field(default_factory=list)
    attached_images: dict[str, tuple[LumaImage, FaceAnnotation]] = field(
        default_factory=dict
    )

    def attach_image(self, image_id: str, img: LumaImage, ann: FaceAnnotation) -> None:
        # re-attaching moves the id to most-recent position
        self.attached_images.pop(image_id, None)
        self.attached_images[image_id] = (img, ann)

    def latest_image_id(self) -> str | None:
        if not self.attached_images:
            return None
        return next(reversed(self.attached_images))


@dataclass(frozen=True)
class Plan:
    tool_calls: tuple[tuple[str, str], ...]  # (measure_id, image_id)
    retrieval_queries: tuple[str, ...]
    cycle: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.cycle <= MAX_CYCLES:
            raise ValueError(f"cycle must be in 1..{MAX_CYCLES}")


@dataclass(frozen=True)
class Evidence:
    tool_results: tuple[tuple[str, QualityComponent], ...]
    retrieved: tuple[ScoredChunk, ...]


@dataclass(frozen=True)
class Citation:
    chunk_id: str
    doc_id: str
    page: int
    paragraph: int


@dataclass(frozen=True)
class Answer:
    text: str
    citations: tuple[Citation, ...]
    tool_results: tuple[tuple[str, QualityComponent], ...]


@dataclass(frozen=True)
class TurnResult:
    answer: Answer
    plan: Plan
    evidence: Evidence


def find_measure_mentions(query_lower: str) -> list[tuple[int, str]]:
    """(position, measure_id) of synonym hits, earliest first, one per measure."""
    matched_spans: list[tuple[int, int]] = []
    first_hit: dict[str, int] = {}
    for _phrase, measure_id, pattern in _MATCHERS:
        for match in pattern.finditer(query_lower):
            span = match.span()
            if any(span[0] >= s and span[1] <= e for s, e in matched_spans):
                continue  # inside a longer already-matched phrase
            matched_spans.append(span)
            if measure_id not in first_hit or span[0] < first_hit[measure_id]:
                first_hit[measure_id] = span[0]
    return sorted((pos, measure_id) for measure_id, pos in first_hit.items())


def is_definitional(query_lower: str) -> bool:
    return any(pattern.search(query_lower) for pattern in _DEFINITIONAL_PATTERNS)


def plan(query: str, session: ChatSession) -> Plan:
    """Route a query to tools, retrieval, or both.

    Measure mentions become tool calls against the most recently attached
    image. Without an image, a bare computation request is an error, while
    a definitional question about a measure falls through to retrieval
    (the no-hit fallback is always retrieval).
    """
    if not query.strip():
        raise ValueError("query must be non-empty")
    lower = query.lower()
    mentions = find_measure_mentions(lower)
    definitional = is_definitional(lower)
    image_id = session.latest_image_id()
    tool_calls: tuple[tuple[str, str], ...] = ()
    if mentions:
        if image_id is None:
            if not definitional:
                raise NoImageAttached(
                    "the question needs a quality computation but no image "
                    "is attached to the session"
                )
        else:
            tool_calls = tuple((measure_id, image_id) for _, measure_id in mentions)
    retrieval = (query,) if (definitional or not mentions) else ()
    return Plan(tool_calls=tool_calls, retrieval_queries=retrieval, cycle=1)


def _merge_retrieved(
    groups: list[list[ScoredChunk]],
) -> tuple[ScoredChunk, ...]:
    best: dict[str, ScoredChunk] = {}
    for group in groups:
        for scored in group:
            current = best.get(scored.chunk.chunk_id)
            if current is None or scored.similarity > current.similarity:
                best[scored.chunk.chunk_id] = scored
    return tuple(
        sorted(best.values(), key=lambda sc: (-sc.similarity, sc.chunk.chunk_id))
    )


def execute_plan(
    p: Plan, session: ChatSession, index: VectorIndex, k: int = DEFAULT_TOP_K
) -> Evidence:
    """Run tool calls and retrieval queries; merge and dedup the results."""
    tool_results: list[tuple[str, QualityComponent]] = []
    for measure_id, image_id in p.tool_calls:
        img, ann = session.attached_images[image_id]
        report = assess(img, ann, [measure_id], image_id=image_id)
        if measure_id == UNIFIED_MEASURE_ID:
            component = report.unified
        else:
            component = report.components[measure_id]
        tool_results.append((measure_id, component))
    groups: list[list[ScoredChunk]] = []
    for query in p.retrieval_queries:
        vec = embed_text(query)
        if not vec.any():
            logger.debug("skipping retrieval for token-free query %r", query)
            continue
        groups.append(index.search(vec, k))
    return Evidence(
        tool_results=tuple(tool_results), retrieved=_merge_retrieved(groups)
    )


def merge_evidence(a: Evidence, b: Evidence) -> Evidence:
    return Evidence(
        tool_results=a.tool_results + b.tool_results,
        retrieved=_merge_retrieved([list(a.retrieved), list(b.retrieved)]),
    )


def generate_answer(
    query: str, session: ChatSession, evidence: Evidence, gateway: LlmGateway
) -> Answer:
    """Build the generation request and map cited chunks back to provenance."""
    blocks = tuple(
        ContextBlock(
            chunk_id=sc.chunk.chunk_id,
            text=sc.chunk.text,
            doc_id=sc.chunk.doc_id,
            page=sc.chunk.page,
            paragraph=sc.chunk.paragraph,
        )
        for sc in evidence.retrieved
    )
    readings = tuple(
        ToolReading(measure_id, component.quality, component.raw)
        for measure_id, component in evidence.tool_results
    )
    history = tuple(
        (turn.role, turn.text) for turn in session.turns[-HISTORY_WINDOW:]
    )
    request = GenerationRequest(
        system_instructions=SYSTEM_INSTRUCTIONS,
        context_blocks=blocks,
        tool_results=readings,
        history=history,
        user_query=query,
    )
    response = gateway.complete(request)
    by_id = {block.chunk_id: block for block in blocks}
    citations = tuple(
        Citation(
            chunk_id=chunk_id,
            doc_id=by_id[chunk_id].doc_id,
            page=by_id[chunk_id].page,
            paragraph=by_id[chunk_id].paragraph,
        )
        for chunk_id in response.cited_chunk_ids
    )
    return Answer(
        text=response.text, citations=citations, tool_results=evidence.tool_results
    )


class Agent:
    """FaceOracle agent over a vector index and a generation backend."""

    def __init__(
        self,
        index: VectorIndex,
        gateway: LlmGateway,
        top_k: int = DEFAULT_TOP_K,
        retrieval_enabled: bool = True,
    ) -> None:
        self.index = index
        self.gateway = gateway
        self.top_k = top_k
        self.retrieval_enabled = retrieval_enabled

    def run_turn(
        self,
        session: ChatSession,
        user_text: str,
        image_bytes: bytes | None = None,
        annotation: FaceAnnotation | None = None,
        image_name: str | None = None,
    ) -> TurnResult:
        """handle_turn plus the plan and evidence, for logging harnesses."""
        if not user_text.strip():
            raise ValueError("user text must be non-empty")
        attached_id: str | None = None
        if image_bytes is not None:
            img = decode_image(image_bytes)
            ann = annotation or default_face_region(img.width, img.height)
            ann.validate_for(img)
            attached_id = image_name or f"image-{len(session.attached_images) + 1}"
            session.attach_image(attached_id, img, ann)

        first = plan(user_text, session)
        if not self.retrieval_enabled:
            first = replace(first, retrieval_queries=())
        evidence = execute_plan(first, session, self.index, self.top_k)

        # second cycle: a definitional question that also computed values
        # gets one follow-up retrieval per executed tool
        if (
            evidence.tool_results
            and self.retrieval_enabled
            and is_definitional(user_text.lower())
        ):
            followup = Plan(
                tool_calls=(),
                retrieval_queries=tuple(
                    f"{MEASURE_LABELS[measure_id]} definition"
                    for measure_id, _ in evidence.tool_results
                ),
                cycle=2,
            )
            evidence = merge_evidence(
                evidence, execute_plan(followup, session, self.index, self.top_k)
            )

        answer = generate_answer(user_text, session, evidence, self.gateway)
        now = time.time()
        session.turns.append(
            ChatTurn(role="user", text=user_text, image_id=attached_id, timestamp=now)
        )
        session.turns.append(
            ChatTurn(role="assistant", text=answer.text, timestamp=now)
        )
        return TurnResult(answer=answer, plan=first, evidence=evidence)

    def handle_turn(
        self,
        session: ChatSession,
        user_text: str,
        image_bytes: bytes | None = None,
        annotation: FaceAnnotation | None = None,
        image_name: str | None = None,
    ) -> Answer:
        return self.run_turn(
            session, user_text, image_bytes, annotation, image_name
        ).answer
