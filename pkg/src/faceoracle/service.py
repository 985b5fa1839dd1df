"""HTTP front door: sessions, chat turns with image upload, ingestion,
assessment, and evaluation runs.

Synchronous request/response only; concurrent requests across sessions are
fine, a second in-flight message to the same session gets 409 Busy.
"""
from __future__ import annotations

import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import evaluation
from .agent import Agent, ChatSession, TurnResult
from .corpus import Corpus
from .errors import (
    EmptyEvaluation,
    FaceOracleError,
    NotFoundError,
    SessionBusy,
    SessionNotFound,
    ValidationFailure,
)
from .image_quality import (
    COMPONENT_MEASURES,
    FaceAnnotation,
    assess,
    decode_image,
    default_face_region,
)
from .llm_gateway import LlmGateway, ScriptedGateway
from .pipeline import ingest_directory, ingest_payload
from .vector_index import VectorIndex

ENV_SNAPSHOT = "FACEORACLE_SNAPSHOT"

# every FaceOracleError code maps to exactly one HTTP status
ERROR_STATUS: dict[str, int] = {
    "unsupported_format": 400,
    "corrupt_image": 400,
    "invalid_encoding": 400,
    "parse_error": 400,
    "invalid_annotation": 422,
    "no_background": 422,
    "empty_components": 422,
    "unknown_measure": 422,
    "measure_unavailable": 422,
    "invalid_chunk_params": 422,
    "zero_vector": 422,
    "dimension_mismatch": 422,
    "no_image_attached": 422,
    "empty_evaluation": 422,
    "no_images": 422,
    "validation_error": 422,
    "duplicate_doc_id": 409,
    "session_busy": 409,
    "session_not_found": 404,
    "not_found": 404,
    "backend_unavailable": 502,
    "backend_timeout": 504,
    "internal_error": 500,
}


@dataclass
class ServiceState:
    corpus: Corpus
    index: VectorIndex
    agent: Agent
    sessions: dict[str, ChatSession] = field(default_factory=dict)
    session_locks: dict[str, threading.Lock] = field(default_factory=dict)
    registry_lock: threading.Lock = field(default_factory=threading.Lock)
    snapshot_path: Path | None = None

    def save_snapshot(self) -> None:
        if self.snapshot_path is not None:
            self.index.save_snapshot(self.snapshot_path)


def build_state(
    corpus_dir: Path | str | None = None,
    snapshot_path: Path | str | None = None,
    gateway: LlmGateway | None = None,
) -> ServiceState:
    if snapshot_path is None and os.environ.get(ENV_SNAPSHOT):
        snapshot_path = os.environ[ENV_SNAPSHOT]
    snapshot = Path(snapshot_path) if snapshot_path else None
    if snapshot is not None and snapshot.exists():
        index = VectorIndex.load_snapshot(snapshot)
    else:
        index = VectorIndex()
    corpus = Corpus()
    state = ServiceState(
        corpus=corpus,
        index=index,
        agent=Agent(index, gateway or ScriptedGateway()),
        snapshot_path=snapshot,
    )
    if corpus_dir is not None:
        ingest_directory(corpus, index, corpus_dir)
        state.save_snapshot()
    return state


class _DocumentPayload(BaseModel):
    name: str
    text: str


class IngestRequest(BaseModel):
    documents: list[_DocumentPayload]


class GenerateType1(BaseModel):
    image_dir: str
    n: int = 100
    templates: str = "canonical"


class EvalRequest(BaseModel):
    dataset: str | None = None
    generate_type1: GenerateType1 | None = None
    seed: int = 0


def _parse_facebox_param(value: str) -> FaceAnnotation:
    parts = value.split(",")
    if len(parts) != 4:
        raise ValidationFailure("facebox must be 'left,top,width,height'")
    try:
        left, top, width, height = (int(p.strip()) for p in parts)
    except ValueError:
        raise ValidationFailure("facebox fields must be integers") from None
    return FaceAnnotation(left, top, width, height)


def serialize_component(component) -> dict:
    return {
        "measure_id": component.measure_id,
        "raw": component.raw,
        "quality": component.quality,
    }


def serialize_turn(result: TurnResult) -> dict:
    chunk_texts = {sc.chunk.chunk_id: sc.chunk.text for sc in result.evidence.retrieved}
    return {
        "text": result.answer.text,
        "citations": [
            {
                "chunk_id": c.chunk_id,
                "doc_id": c.doc_id,
                "page": c.page,
                "paragraph": c.paragraph,
                "text": chunk_texts.get(c.chunk_id, ""),
            }
            for c in result.answer.citations
        ],
        "tool_results": [
            serialize_component(component) for _, component in result.answer.tool_results
        ],
    }


def serialize_report(report: evaluation.MetricsReport) -> dict:
    return {
        "tsa": report.tsa,
        "acd": report.acd,
        "qcd": report.qcd,
        "ard": report.ard,
        "counts": {"type1": report.type1_count, "type2": report.type2_count},
        "table": report.to_table(),
    }


def create_app(state: ServiceState | None = None) -> FastAPI:
    if state is None:
        state = build_state()
    app = FastAPI(title="faceoracle", version="0.1.0")
    app.state.service = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],  # the chat UI is served from a separate origin
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(FaceOracleError)
    async def _handle_package_error(_request: Request, exc: FaceOracleError):
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(
            status_code=status,
            content={"code": exc.code, "message": str(exc), "detail": None},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session() -> dict:
        session_id = uuid.uuid4().hex
        with state.registry_lock:
            state.sessions[session_id] = ChatSession(session_id=session_id)
            state.session_locks[session_id] = threading.Lock()
        return {"session_id": session_id}

    @app.post("/sessions/{session_id}/messages")
    def post_message(
        session_id: str,
        text: str = Form(...),
        image: UploadFile | None = File(None),
        facebox: str | None = Form(None),
    ) -> dict:
        session = state.sessions.get(session_id)
        if session is None:
            raise SessionNotFound(f"no such session: {session_id}")
        if not text.strip():
            raise ValidationFailure("message text must be non-empty")
        lock = state.session_locks[session_id]
        if not lock.acquire(blocking=False):
            raise SessionBusy(f"session {session_id} has a message in flight")
        try:
            image_bytes = image.file.read() if image is not None else None
            annotation = _parse_facebox_param(facebox) if facebox else None
            result = state.agent.run_turn(
                session,
                text,
                image_bytes=image_bytes,
                annotation=annotation,
                image_name=image.filename if image is not None else None,
            )
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from None
        finally:
            lock.release()
        return {"session_id": session_id, **serialize_turn(result)}

    @app.post("/corpus/documents")
    def ingest(request: IngestRequest) -> dict:
        with state.registry_lock:
            documents, chunks = ingest_payload(
                state.corpus,
                state.index,
                [item.model_dump() for item in request.documents],
            )
            state.save_snapshot()
        return {"documents": documents, "chunks": chunks}

    @app.post("/assess")
    def assess_endpoint(
        image: UploadFile = File(...),
        measures: str | None = Form(None),
        facebox: str | None = Form(None),
    ) -> dict:
        img = decode_image(image.file.read())
        if facebox:
            annotation = _parse_facebox_param(facebox)
            region_source = "provided"
        else:
            annotation = default_face_region(img.width, img.height)
            region_source = "default"
        requested = (
            [m.strip() for m in measures.split(",") if m.strip()]
            if measures
            else list(COMPONENT_MEASURES)
        )
        report = assess(img, annotation, requested, image_id=image.filename or "upload")
        return {
            "image_id": report.image_id,
            "components": {
                measure_id: serialize_component(component)
                for measure_id, component in report.components.items()
            },
            "unified": serialize_component(report.unified) if report.unified else None,
            "face_region": {
                "left": annotation.left,
                "top": annotation.top,
                "width": annotation.width,
                "height": annotation.height,
                "source": region_source,
            },
        }

    @app.post("/eval/run")
    def run_eval(request: EvalRequest) -> dict:
        samples: list[evaluation.EvalSample] = []
        image_dir: Path | None = None
        if request.generate_type1 is not None:
            image_dir = Path(request.generate_type1.image_dir)
            if not image_dir.is_dir():
                raise NotFoundError(f"no such image directory: {image_dir}")
            samples.extend(
                evaluation.generate_type1_dataset(
                    image_dir,
                    request.generate_type1.n,
                    seed=request.seed,
                    templates=request.generate_type1.templates,
                )
            )
        if request.dataset is not None:
            if request.dataset == "builtin:type2":
                dataset_path = evaluation.builtin_type2_path()
            else:
                dataset_path = Path(request.dataset)
            if not dataset_path.is_file():
                raise NotFoundError(f"no such dataset: {request.dataset}")
            samples.extend(evaluation.load_dataset(dataset_path))
        if not samples:
            raise EmptyEvaluation("no samples requested")
        # evaluation always runs against the deterministic scripted backend
        agent = Agent(state.index, ScriptedGateway(), top_k=state.agent.top_k)
        report = evaluation.run_evaluation(samples, agent, image_dir)
        return serialize_report(report)

    return app


def create_default_app() -> FastAPI:
    """Entry point for `uvicorn faceoracle.service:create_default_app --factory`."""
    return create_app()
