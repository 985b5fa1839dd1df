"""Command-line front door; every verb emits the same payloads as the HTTP API."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import evaluation
from .agent import Agent
from .corpus import Corpus
from .errors import EmptyEvaluation, FaceOracleError, NotFoundError
from .image_quality import (
    COMPONENT_MEASURES,
    assess,
    decode_image,
    default_face_region,
    facebox_sidecar_path,
    parse_facebox,
)
from .llm_gateway import RemoteGateway, ScriptedGateway
from .pipeline import ingest_directory
from .service import _parse_facebox_param, build_state, create_app, serialize_component, serialize_report
from .vector_index import VectorIndex


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faceoracle",
        description="Face image quality assistant: serve, ingest, assess, eval.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--corpus", help="directory of .txt/.md documents to ingest at startup")
    serve.add_argument("--snapshot", help="index snapshot path (also FACEORACLE_SNAPSHOT)")
    serve.add_argument(
        "--llm",
        choices=("scripted", "remote"),
        default="scripted",
        help="generation backend (remote reads FACEORACLE_LLM_URL / FACEORACLE_LLM_KEY)",
    )

    ingest = sub.add_parser("ingest", help="ingest a corpus directory into an index snapshot")
    ingest.add_argument("directory")
    ingest.add_argument("--snapshot", help="where to write the index snapshot")

    assess_cmd = sub.add_parser("assess", help="assess one image")
    assess_cmd.add_argument("image")
    assess_cmd.add_argument("--measures", help="comma-separated measure ids (default: all six components)")
    assess_cmd.add_argument("--facebox", help="face region as left,top,width,height")

    eval_cmd = sub.add_parser("eval", help="run the evaluation harness")
    eval_cmd.add_argument("--dataset", help="JSONL dataset path, or builtin:type2")
    eval_cmd.add_argument("--generate-type1", metavar="DIR", help="generate type1 samples over an image directory")
    eval_cmd.add_argument("--n", type=int, default=100, help="type1 sample count")
    eval_cmd.add_argument("--seed", type=int, default=0)
    eval_cmd.add_argument("--templates", choices=("canonical", "paraphrase"), default="canonical")
    eval_cmd.add_argument("--corpus", help="corpus directory to ingest before the run")
    eval_cmd.add_argument("--snapshot", help="index snapshot to load before the run")
    eval_cmd.add_argument("--no-retrieval", action="store_true", help="disable retrieval (ungrounded baseline)")
    eval_cmd.add_argument("--table", action="store_true", help="print the plain-text table instead of JSON")
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    gateway = RemoteGateway() if args.llm == "remote" else ScriptedGateway()
    state = build_state(
        corpus_dir=args.corpus, snapshot_path=args.snapshot, gateway=gateway
    )
    app = create_app(state)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    corpus = Corpus()
    index = VectorIndex()
    documents, chunks = ingest_directory(corpus, index, args.directory)
    if args.snapshot:
        index.save_snapshot(args.snapshot)
    print(json.dumps({"documents": documents, "chunks": chunks}))
    return 0


def _cmd_assess(args: argparse.Namespace) -> int:
    path = Path(args.image)
    img = decode_image(path.read_bytes())
    sidecar = facebox_sidecar_path(path)
    if args.facebox:
        annotation = _parse_facebox_param(args.facebox)
        source = "provided"
    elif sidecar.exists():
        annotation = parse_facebox(sidecar.read_text())
        source = "sidecar"
    else:
        annotation = default_face_region(img.width, img.height)
        source = "default"
    measures = (
        [m.strip() for m in args.measures.split(",") if m.strip()]
        if args.measures
        else list(COMPONENT_MEASURES)
    )
    report = assess(img, annotation, measures, image_id=path.name)
    print(
        json.dumps(
            {
                "image_id": report.image_id,
                "components": {
                    measure_id: serialize_component(component)
                    for measure_id, component in report.components.items()
                },
                "unified": serialize_component(report.unified)
                if report.unified
                else None,
                "face_region": {
                    "left": annotation.left,
                    "top": annotation.top,
                    "width": annotation.width,
                    "height": annotation.height,
                    "source": source,
                },
            }
        )
    )
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    corpus = Corpus()
    if args.snapshot:
        index = VectorIndex.load_snapshot(args.snapshot)
    else:
        index = VectorIndex()
    if args.corpus:
        ingest_directory(corpus, index, args.corpus)
    samples: list[evaluation.EvalSample] = []
    image_dir: Path | None = None
    if args.generate_type1:
        image_dir = Path(args.generate_type1)
        samples.extend(
            evaluation.generate_type1_dataset(
                image_dir, args.n, seed=args.seed, templates=args.templates
            )
        )
    if args.dataset:
        if args.dataset == "builtin:type2":
            dataset_path = evaluation.builtin_type2_path()
        else:
            dataset_path = Path(args.dataset)
        if not dataset_path.is_file():
            raise NotFoundError(f"no such dataset: {args.dataset}")
        samples.extend(evaluation.load_dataset(dataset_path))
    if not samples:
        raise EmptyEvaluation("nothing to evaluate: pass --dataset and/or --generate-type1")
    agent = Agent(index, ScriptedGateway(), retrieval_enabled=not args.no_retrieval)
    report = evaluation.run_evaluation(samples, agent, image_dir)
    if args.table:
        print(report.to_table())
    else:
        print(json.dumps(serialize_report(report)))
    return 0


_COMMANDS = {
    "serve": _cmd_serve,
    "ingest": _cmd_ingest,
    "assess": _cmd_assess,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FaceOracleError as exc:
        print(
            json.dumps({"code": exc.code, "message": str(exc), "detail": None}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
