"""``forge`` command line.

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 external-service failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from . import stages as st
from .config import PipelineConfig, load_config
from .errors import ConfigError, ForgeError, GatewayError
from .jsonl import dumps
from .pipeline import CompressionStrategy
from .retrieval import load_index, search

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG, EXIT_SERVICE = 0, 1, 2, 3

log = logging.getLogger("coreforge")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default="fixture",
                   help="config file, or a bundled profile name (fixture, full); default: fixture")
    p.add_argument("--workspace", help="override paths.workspace")
    p.add_argument("--mock", action="store_true", help="use the offline heuristic model")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=[s.value for s in CompressionStrategy],
                   help="history treatment; default: every strategy in the config")
    p.add_argument("--top-k", type=int)
    p.add_argument("--passages-m", type=int)
    p.add_argument("--history-window", type=int, help="keep only the last m turns of history")
    tf = p.add_mutually_exclusive_group()
    tf.add_argument("--teacher-forced", dest="teacher_forced", action="store_true", default=None,
                    help="feed golden responses forward (default)")
    tf.add_argument("--self-conditioned", dest="teacher_forced", action="store_false",
                    help="feed the model's own responses forward")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"forge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="parse pages and filter reference passages")
    sub.add_parser("sample", parents=[common], help="sample conversation flows")
    sub.add_parser("contextualize", parents=[common], help="write questions for every flow")
    sub.add_parser("assemble", parents=[common], help="build the dataset and passage corpus")
    sub.add_parser("validate", parents=[common], help="check dataset integrity")
    sub.add_parser("index", parents=[common], help="build the BM25 index and qrels")
    s = sub.add_parser("search", parents=[common], help="query the index")
    s.add_argument("query")
    s.add_argument("--top-k", type=int, default=10)
    r = sub.add_parser("run", parents=[common], help="run the RAG pipeline over the dataset")
    _run_flags(r)
    e = sub.add_parser("eval", parents=[common], help="score runs")
    e.add_argument("--strategy", choices=[s.value for s in CompressionStrategy])
    sub.add_parser("stats", parents=[common], help="dataset statistics")
    sub.add_parser("verify", parents=[common], help="recheck every manifest hash in the workspace")
    a = sub.add_parser("all", parents=[common], help="every stage, in order")
    _run_flags(a)
    return parser


def _apply_overrides(cfg: PipelineConfig, args) -> PipelineConfig:
    if getattr(args, "workspace", None):
        cfg.paths.workspace = Path(args.workspace).resolve()
    if args.mock:
        cfg.gateway = replace(cfg.gateway, mode="mock")
    pl = cfg.pipeline
    if getattr(args, "top_k", None) is not None and args.command != "search":
        if args.top_k < 1:
            raise ConfigError("--top-k must be >= 1", field="top_k")
        cfg.bm25 = replace(cfg.bm25, top_k=args.top_k)
    if getattr(args, "passages_m", None) is not None:
        if args.passages_m < 1:
            raise ConfigError("--passages-m must be >= 1", field="passages_m")
        pl = replace(pl, passages_m=args.passages_m)
    if getattr(args, "history_window", None) is not None:
        if args.history_window < 0:
            raise ConfigError("--history-window must be >= 0", field="history_window")
        pl = replace(pl, history_window=args.history_window)
    if getattr(args, "teacher_forced", None) is not None:
        pl = replace(pl, teacher_forced=args.teacher_forced)
    if getattr(args, "strategy", None):
        pl = replace(pl, strategies=[args.strategy])
    cfg.pipeline = pl
    return cfg


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def dispatch(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    ws = st.Workspace(cfg.paths.workspace)
    cmd = args.command

    if cmd == "ingest":
        _print(st.stage_ingest(cfg, ws))
    elif cmd == "sample":
        _print(st.stage_sample(cfg, ws))
    elif cmd == "contextualize":
        _print(st.stage_contextualize(cfg, ws, st.make_gateway(cfg, ws)))
    elif cmd == "assemble":
        _print(st.stage_assemble(cfg, ws))
    elif cmd == "validate":
        errors = st.stage_validate(ws)
        _print({"valid": not errors, "errors": errors})
        return EXIT_VALIDATION if errors else EXIT_OK
    elif cmd == "index":
        _print(st.stage_index(cfg, ws))
    elif cmd == "search":
        index = load_index(ws.require(st.INDEX))
        _, corpus = st.load_dataset(ws)
        for rank, (pid, score) in enumerate(search(index, args.query, args.top_k).entries, 1):
            print(f"{rank:>3}  [{pid}]  {score:.4f}  {corpus.text(pid)[:100]}")
    elif cmd == "run":
        gateway = st.make_gateway(cfg, ws)
        _print({s: st.stage_run(cfg, ws, s, gateway) for s in cfg.pipeline.strategies})
    elif cmd == "eval":
        gateway = st.make_gateway(cfg, ws) if cfg.judge.pairwise or cfg.judge.kind == "llm" else None
        for s in cfg.pipeline.strategies:
            st.stage_eval(cfg, ws, s, gateway)
            print(ws.path(st.report_file(s, "txt")).read_text(encoding="utf-8"))
    elif cmd == "stats":
        print(st.stage_stats(cfg, ws))
    elif cmd == "verify":
        issues = st.verify(ws)
        _print({"ok": not issues, "issues": [i.to_dict() for i in issues]})
        return EXIT_VALIDATION if issues else EXIT_OK
    elif cmd == "all":
        return run_all(cfg, ws)
    return EXIT_OK


def run_all(cfg: PipelineConfig, ws: st.Workspace) -> int:
    gateway = st.make_gateway(cfg, ws)
    log.info("ingest: %s", dumps(st.stage_ingest(cfg, ws)))
    log.info("sample: %s", dumps(st.stage_sample(cfg, ws)))
    log.info("contextualize: %s", dumps(st.stage_contextualize(cfg, ws, gateway)))
    log.info("assemble: %s", dumps(st.stage_assemble(cfg, ws)))
    errors = st.stage_validate(ws)
    if errors:
        _print({"valid": False, "errors": errors})
        return EXIT_VALIDATION
    log.info("index: %s", dumps(st.stage_index(cfg, ws)))
    for s in cfg.pipeline.strategies:
        log.info("run %s: %s", s, dumps(st.stage_run(cfg, ws, s, gateway)))
        st.stage_eval(cfg, ws, s, gateway)
        print(ws.path(st.report_file(s, "txt")).read_text(encoding="utf-8"))
    print(st.stage_stats(cfg, ws))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GatewayError as exc:
        print(f"model endpoint failure: {exc}", file=sys.stderr)
        return EXIT_SERVICE
    except ForgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
