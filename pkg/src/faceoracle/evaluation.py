"""Dataset generation, evaluation runs against an agent, and summary metrics.

Two sample kinds: type1 pairs an image with a question about quality values
and the expected tool selections; type2 is a concept question with a
ground-truth answer. Tool selection accuracy (TSA) scores type1 runs; the
three cosine-distance metrics (ACD, QCD, ARD) score type2 runs, all using
the one shared embedder.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .agent import Agent, ChatSession
from .embedding import cosine_distance, embed_text
from .errors import EmptyEvaluation, FaceOracleError, NoImages, ParseError
from .image_quality import (
    COMPONENT_MEASURES,
    MEASURE_LABELS,
    FaceAnnotation,
    LumaImage,
    assess,
    decode_image,
    default_face_region,
    facebox_sidecar_path,
    parse_facebox,
)
from .llm_gateway import render_tool_sentences

TYPE1 = "type1"
TYPE2 = "type2"

# a sample whose run retrieved nothing is maximally distant from any context
EMPTY_CONTEXT_DISTANCE = 2.0

IMAGE_SUFFIXES = (".png", ".ppm")


@dataclass(frozen=True)
class EvalSample:
    kind: str
    question: str
    answer: str
    image: str | None = None
    expected_tools: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == TYPE1:
            if not self.image or not self.expected_tools:
                raise ValueError("type1 samples need an image and expected tools")
        elif self.kind == TYPE2:
            if self.image or self.expected_tools:
                raise ValueError("type2 samples carry neither image nor tools")
        else:
            raise ValueError(f"unknown sample kind: {self.kind}")


@dataclass(frozen=True)
class TurnLog:
    """Verbatim record of one evaluated agent turn."""

    sample: EvalSample
    selected_tools: tuple[str, ...]
    answer_text: str
    context_text: str  # retrieved chunk texts in rank order, newline-joined
    cited_chunk_ids: tuple[str, ...] = ()
    retrieved_chunk_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class MetricsReport:
    tsa: float | None
    acd: float | None
    qcd: float | None
    ard: float | None
    type1_count: int
    type2_count: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "tsa": self.tsa,
                "acd": self.acd,
                "qcd": self.qcd,
                "ard": self.ard,
                "counts": {TYPE1: self.type1_count, TYPE2: self.type2_count},
            },
            sort_keys=True,
        )

    def to_table(self, method: str = "faceoracle") -> str:
        def fmt(value: float | None) -> str:
            return "-" if value is None else f"{value:.3f}"

        headers = ("Method", "TSA", "ACD", "QCD", "ARD")
        row = (method, fmt(self.tsa), fmt(self.acd), fmt(self.qcd), fmt(self.ard))
        widths = [max(len(h), len(r)) for h, r in zip(headers, row)]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip(),
            "  ".join(r.ljust(w) for r, w in zip(row, widths)).rstrip(),
        ]
        return "\n".join(lines)


# --- question templates ---

def _join_labels(labels: list[str]) -> str:
    if len(labels) == 1:
        return labels[0]
    if len(labels) == 2:
        return f"{labels[0]} and {labels[1]}"
    return f"{', '.join(labels[:-1])} and {labels[-1]}"


def canonical_question(labels: list[str]) -> str:
    if len(labels) == 1:
        return f"what is the {labels[0]} quality value of this image?"
    return f"what are the {_join_labels(labels)} quality values of this image?"


# Colloquial aliases used by one paraphrase template. "tonal range" is not
# in the router's synonym table, so that template yields realistic misses.
_COLLOQUIAL = {"dynamic_range": "tonal range"}


def _labels(measure_ids: list[str]) -> list[str]:
    return [MEASURE_LABELS[m] for m in measure_ids]


PARAPHRASE_TEMPLATES = (
    lambda ms: f"for this image, what are the {_join_labels(_labels(ms))} quality values?",
    lambda ms: f"please compute the {_join_labels(_labels(ms))} values for the attached image",
    lambda ms: f"could you tell me this image's {_join_labels(_labels(ms))} quality values?",
    lambda ms: f"check the {_join_labels(_labels(ms))} of this photo",
    lambda ms: f"i need the {_join_labels(_labels(ms))} quality values for this picture",
    lambda ms: f"report the {_join_labels(_labels(ms))} readings on the attached photo",
    lambda ms: canonical_question(_labels(ms)),
    lambda ms: (
        "give me the "
        + _join_labels([_COLLOQUIAL.get(m, MEASURE_LABELS[m]) for m in ms])
        + " assessment of this image"
    ),
)


def _usable_images(image_dir: Path) -> dict[str, tuple[LumaImage, FaceAnnotation]]:
    usable: dict[str, tuple[LumaImage, FaceAnnotation]] = {}
    for path in sorted(image_dir.iterdir()):
        if path.suffix.lower() not in IMAGE_SUFFIXES or not path.is_file():
            continue
        try:
            img = decode_image(path.read_bytes())
            sidecar = facebox_sidecar_path(path)
            if sidecar.exists():
                ann = parse_facebox(sidecar.read_text())
            else:
                ann = default_face_region(img.width, img.height)
            ann.validate_for(img)
        except FaceOracleError:
            continue
        usable[path.name] = (img, ann)
    return usable


def generate_type1_dataset(
    image_dir: Path | str,
    n: int,
    seed: int = 0,
    templates: str = "canonical",
) -> list[EvalSample]:
    """Seeded sampling of (image, 1-3 component measures) question/answer pairs.

    Ground-truth answers are rendered from the same measure implementations
    the agent dispatches to, so a correctly routed tool call reproduces the
    ground truth by construction.
    """
    images = _usable_images(Path(image_dir))
    if not images:
        raise NoImages(f"no decodable images in {image_dir}")
    names = list(images)
    rng = random.Random(seed)
    samples: list[EvalSample] = []
    for _ in range(n):
        name = rng.choice(names)
        count = rng.randint(1, 3)
        measures = rng.sample(COMPONENT_MEASURES, count)
        img, ann = images[name]
        report = assess(img, ann, measures)
        answer = render_tool_sentences(
            [(m, report.components[m].quality) for m in measures]
        )
        if templates == "canonical":
            question = canonical_question(_labels(measures))
        elif templates == "paraphrase":
            question = rng.choice(PARAPHRASE_TEMPLATES)(measures)
        else:
            raise ValueError(f"unknown template set: {templates}")
        samples.append(
            EvalSample(
                kind=TYPE1,
                question=question,
                answer=answer,
                image=name,
                expected_tools=tuple(measures),
            )
        )
    return samples


# --- dataset files (JSON Lines) ---

def sample_to_dict(sample: EvalSample) -> dict:
    return {
        "kind": sample.kind,
        "image": sample.image,
        "question": sample.question,
        "answer": sample.answer,
        "expected_tools": list(sample.expected_tools),
    }


def save_dataset(samples: list[EvalSample], path: Path | str) -> None:
    lines = [
        json.dumps(sample_to_dict(s), ensure_ascii=False, sort_keys=True)
        for s in samples
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_dataset(path: Path | str) -> list[EvalSample]:
    samples: list[EvalSample] = []
    for line_no, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            samples.append(
                EvalSample(
                    kind=record["kind"],
                    question=record["question"],
                    answer=record["answer"],
                    image=record.get("image"),
                    expected_tools=tuple(record.get("expected_tools") or ()),
                )
            )
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}:{line_no}: {exc}") from None
    return samples


def load_type2_dataset(path: Path | str) -> list[EvalSample]:
    samples = load_dataset(path)
    for i, sample in enumerate(samples, start=1):
        if sample.kind != TYPE2:
            raise ParseError(f"{path}: record {i} is not a type2 sample")
    return samples


def builtin_type2_path() -> Path:
    return Path(__file__).parent / "data" / "type2_fiqa.jsonl"


def builtin_corpus_dir() -> Path:
    return Path(__file__).parent / "data" / "corpus"


# --- evaluation runs ---

def collect_turn_logs(
    samples: list[EvalSample],
    agent: Agent,
    image_dir: Path | str | None = None,
) -> list[TurnLog]:
    """Run every sample as a fresh single-turn session and record it."""
    logs: list[TurnLog] = []
    for i, sample in enumerate(samples):
        session = ChatSession(session_id=f"eval-{i}")
        image_bytes: bytes | None = None
        annotation: FaceAnnotation | None = None
        if sample.kind == TYPE1:
            if image_dir is None:
                raise ValueError("image_dir is required to run type1 samples")
            path = Path(image_dir) / sample.image
            image_bytes = path.read_bytes()
            sidecar = facebox_sidecar_path(path)
            if sidecar.exists():
                annotation = parse_facebox(sidecar.read_text())
        result = agent.run_turn(
            session,
            sample.question,
            image_bytes=image_bytes,
            annotation=annotation,
            image_name=sample.image,
        )
        logs.append(
            TurnLog(
                sample=sample,
                selected_tools=tuple(m for m, _ in result.answer.tool_results),
                answer_text=result.answer.text,
                context_text="\n".join(
                    sc.chunk.text for sc in result.evidence.retrieved
                ),
                cited_chunk_ids=tuple(c.chunk_id for c in result.answer.citations),
                retrieved_chunk_ids=tuple(
                    sc.chunk.chunk_id for sc in result.evidence.retrieved
                ),
            )
        )
    return logs


def compute_tsa(logs: list[TurnLog]) -> float:
    """Correct expected tool calls over total expected tool calls (type1 only).

    Extraneous selections neither score nor penalize.
    """
    total = 0
    correct = 0
    for log in logs:
        if log.sample.kind != TYPE1:
            continue
        expected = log.sample.expected_tools
        selected = set(log.selected_tools)
        total += len(expected)
        correct += sum(1 for tool in expected if tool in selected)
    if total == 0:
        raise EmptyEvaluation("no expected tool calls to score")
    return correct / total


def compute_distance_metrics(logs: list[TurnLog]) -> tuple[float, float, float]:
    """(ACD, QCD, ARD) means over type2 logs."""
    type2 = [log for log in logs if log.sample.kind == TYPE2]
    if not type2:
        raise EmptyEvaluation("no type2 samples to score")
    acd_sum = qcd_sum = ard_sum = 0.0
    for log in type2:
        answer_vec = embed_text(log.answer_text)
        truth_vec = embed_text(log.sample.answer)
        ard_sum += cosine_distance(answer_vec, truth_vec)
        if log.context_text:
            context_vec = embed_text(log.context_text)
            acd_sum += cosine_distance(answer_vec, context_vec)
            qcd_sum += cosine_distance(embed_text(log.sample.question), context_vec)
        else:
            acd_sum += EMPTY_CONTEXT_DISTANCE
            qcd_sum += EMPTY_CONTEXT_DISTANCE
    n = len(type2)
    return acd_sum / n, qcd_sum / n, ard_sum / n


def compute_report(logs: list[TurnLog]) -> MetricsReport:
    if not logs:
        raise EmptyEvaluation("no samples were evaluated")
    type1_count = sum(1 for log in logs if log.sample.kind == TYPE1)
    type2_count = len(logs) - type1_count
    tsa = compute_tsa(logs) if type1_count else None
    if type2_count:
        acd, qcd, ard = compute_distance_metrics(logs)
    else:
        acd = qcd = ard = None
    return MetricsReport(
        tsa=tsa,
        acd=acd,
        qcd=qcd,
        ard=ard,
        type1_count=type1_count,
        type2_count=type2_count,
    )


def run_evaluation(
    samples: list[EvalSample],
    agent: Agent,
    image_dir: Path | str | None = None,
) -> MetricsReport:
    """Evaluate every sample and aggregate all applicable metrics."""
    if not samples:
        raise EmptyEvaluation("dataset is empty")
    return compute_report(collect_turn_logs(samples, agent, image_dir))
