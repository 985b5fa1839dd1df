"""Conversational face image quality assistant.

Measure tools compute standard-style quality components on decoded images;
an agent routes questions to those tools and to passage retrieval over an
ingested document corpus, and answers with provenance-tracked citations. An
evaluation harness scores tool selection and answer/context distances.
"""

__version__ = "0.1.0"

from .agent import Agent, Answer, ChatSession, Citation, Evidence, Plan
from .embedding import EMBEDDING_DIM, cosine_distance, embed_text
from .errors import FaceOracleError
from .image_quality import (
    COMPONENT_MEASURES,
    FaceAnnotation,
    LumaImage,
    QualityComponent,
    QualityReport,
    assess,
    decode_image,
)
from .llm_gateway import RemoteGateway, ScriptedGateway
from .vector_index import ScoredChunk, VectorIndex

__all__ = [
    "Agent",
    "Answer",
    "ChatSession",
    "Citation",
    "COMPONENT_MEASURES",
    "EMBEDDING_DIM",
    "Evidence",
    "FaceAnnotation",
    "FaceOracleError",
    "LumaImage",
    "Plan",
    "QualityComponent",
    "QualityReport",
    "RemoteGateway",
    "ScoredChunk",
    "ScriptedGateway",
    "VectorIndex",
    "assess",
    "cosine_distance",
    "decode_image",
    "embed_text",
    "__version__",
]
