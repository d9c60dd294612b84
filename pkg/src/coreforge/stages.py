"""Pipeline stages over a workspace directory, each leaving a hash manifest.

Workspace layout::

    ingest/         trees.jsonl passages.jsonl support.jsonl report.json
    sample/         flows.jsonl report.json
    contextualize/  drafts.jsonl report.json
    dataset/        conversations.jsonl corpus.jsonl manifest.json assemble_report.json
    index/          bm25.bin bm25.bin.json qrels.txt
    runs/           <strategy>.jsonl
    reports/        <strategy>.json <strategy>.txt <strategy>.trec
    stats/          stats.json stats.txt
    manifests/      <stage>.json
    cache/          llm.jsonl (live endpoint only)

A stage checks that every input exists and still matches the hash written
by the stage that produced it, so an edited or stale artifact is caught
before it is consumed.
"""

from __future__ import annotations

import hashlib
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from . import dataset as ds
from .citations import LexicalJudge, LlmJudge
from .config import PipelineConfig
from .contextualize import TurnDraft, build_keyword_chain, contextualize_conversation, generate_full_question
from .errors import ConfigError, MissingArtifact, ParseError, StaleArtifact, Unsatisfiable
from .evaluation import evaluate_run
from .fetch import Fetcher, ReferenceStore
from .ingest import Passage, SupportLink, TitleNode, TitleTree, ingest_pages, is_boilerplate, load_pages
from .jsonl import file_sha256, read_json, read_jsonl, write_json, write_jsonl
from .llm import Gateway, HttpGateway, ResponseCache
from .mock import heuristic_gateway
from .pipeline import CompressionStrategy, RunConfig, failures, run_conversations
from .prompting import PromptSet
from .retrieval import build_index, load_index, save_index, write_trec_qrels
from .sampling import ConversationFlow, Kind, SamplingStrategy, build_edges, pair_trees, sample_flow, title_index

log = logging.getLogger(__name__)

STAGES = ("ingest", "sample", "contextualize", "assemble", "index", "run", "eval", "stats")

TREES = "ingest/trees.jsonl"
PASSAGES = "ingest/passages.jsonl"
SUPPORT = "ingest/support.jsonl"
FLOWS = "sample/flows.jsonl"
DRAFTS = "contextualize/drafts.jsonl"
DATASET_DIR = "dataset"
DATASET_FILES = ("dataset/conversations.jsonl", "dataset/corpus.jsonl", "dataset/manifest.json")
INDEX = "index/bm25.bin"
INDEX_SIDECAR = "index/bm25.bin.json"
QRELS = "index/qrels.txt"


def run_file(strategy: str) -> str:
    return f"runs/{strategy}.jsonl"


def report_file(strategy: str, ext: str = "json") -> str:
    return f"reports/{strategy}.{ext}"


def _producer(rel: str) -> tuple[str, str]:
    """(command that makes ``rel``, manifest name)."""
    top = rel.split("/", 1)[0]
    if top == "runs":
        return "run", f"run-{Path(rel).stem}"
    if top == "reports":
        return "eval", f"eval-{Path(rel).stem}"
    if top == "dataset":
        return "assemble", "assemble"
    return top, top


def derive_seed(seed: int, *parts) -> int:
    blob = ":".join(str(p) for p in (seed, *parts))
    return int(hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16], 16)


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def path(self, rel: str) -> Path:
        return self.root / rel

    def manifest_path(self, name: str) -> Path:
        return self.root / "manifests" / f"{name}.json"

    def require(self, rel: str) -> Path:
        """Path of an input artifact, checked against its producer's manifest."""
        command, manifest_name = _producer(rel)
        path = self.path(rel)
        if not path.exists():
            raise MissingArtifact(f"{rel} is missing; it is produced by `forge {command}`",
                                  file=rel, stage=command)
        mpath = self.manifest_path(manifest_name)
        if not mpath.exists():
            raise MissingArtifact(f"manifest for {rel} is missing; rerun `forge {command}`",
                                  file=str(mpath.relative_to(self.root)), stage=command)
        recorded = read_json(mpath)["outputs"].get(rel)
        if recorded != file_sha256(path):
            raise StaleArtifact(f"{rel} does not match the hash recorded by `forge {command}`", file=rel)
        return path

    def write_manifest(self, name: str, cfg: PipelineConfig, inputs: dict[str, str], outputs: list[str],
                       extra: dict | None = None) -> None:
        write_json(
            self.manifest_path(name),
            {
                "stage": name,
                "tool_version": __version__,
                "config_hash": cfg.digest(),
                "inputs": dict(sorted(inputs.items())),
                "outputs": {rel: file_sha256(self.path(rel)) for rel in sorted(outputs)},
                **(extra or {}),
            },
        )

    def input_hashes(self, rels: list[str]) -> dict[str, str]:
        return {rel: file_sha256(self.require(rel)) for rel in rels}


def make_gateway(cfg: PipelineConfig, ws: Workspace) -> Gateway:
    g = cfg.gateway
    if g.mode == "mock":
        return heuristic_gateway(max_requests=g.max_requests, max_in_flight=g.max_in_flight)
    if not g.url or not g.model:
        raise ConfigError("gateway.url and gateway.model (or COREFORGE_LLM_URL / COREFORGE_LLM_MODEL) are required",
                          field="gateway.url")
    cache = ResponseCache(ws.path("cache/llm.jsonl")) if g.cache else None
    return HttpGateway(g.url, g.model, g.key, attempts=g.attempts, backoff=g.backoff, timeout=g.timeout,
                       max_requests=g.max_requests, max_in_flight=g.max_in_flight, cache=cache)


def prompt_set(cfg: PipelineConfig) -> PromptSet:
    return PromptSet(cfg.paths.prompts)


def _load_trees(ws: Workspace) -> dict[str, TitleTree]:
    trees = [TitleTree.from_dict(rec) for _, rec in read_jsonl(ws.require(TREES))]
    return {t.tree_id: t for t in trees}


def _external_hashes(directory: Path, label: str) -> dict[str, str]:
    return {f"{label}/{p.relative_to(directory).as_posix()}": file_sha256(p)
            for p in sorted(directory.rglob("*")) if p.is_file()}


# ---------------------------------------------------------------------------
# construction stages
# ---------------------------------------------------------------------------


def stage_ingest(cfg: PipelineConfig, ws: Workspace) -> dict:
    if not cfg.paths.pages.is_dir():
        raise ConfigError(f"pages directory not found: {cfg.paths.pages}", field="paths.pages")
    pages = load_pages(cfg.paths.pages)
    if cfg.fetch.online:
        loader = Fetcher(cfg.fetch.user_agent, cfg.fetch.min_interval)
    else:
        if not cfg.paths.references.is_dir():
            raise ConfigError(f"references directory not found: {cfg.paths.references}", field="paths.references")
        loader = ReferenceStore(cfg.paths.references)
    result = ingest_pages(pages, loader, target_words=cfg.filter.target_words, threshold=cfg.filter.threshold)
    write_jsonl(ws.path(TREES), (t.to_dict() for t in result.trees))
    write_jsonl(ws.path(PASSAGES), (p.to_dict() for p in result.passages))
    write_jsonl(ws.path(SUPPORT), (s.to_dict() for s in result.support))
    report = {
        "pages": len(pages),
        "trees": len(result.trees),
        "nodes": sum(len(t.nodes) for t in result.trees),
        "passages": len(result.passages),
        "missing_references": result.missing_references,
        "skipped_pages": [list(x) for x in result.skipped_pages],
    }
    write_json(ws.path("ingest/report.json"), report)
    inputs = _external_hashes(cfg.paths.pages, "pages")
    if not cfg.fetch.online:
        inputs.update(_external_hashes(cfg.paths.references, "references"))
    ws.write_manifest("ingest", cfg, inputs, [TREES, PASSAGES, SUPPORT, "ingest/report.json"])
    return report


def _supported_nodes(ws: Workspace) -> set[tuple[str, str]]:
    out = set()
    for _, rec in read_jsonl(ws.require(SUPPORT)):
        link = SupportLink.from_dict(rec)
        if link.passage_ids:
            out.add((link.page_url, link.node_id))
    return out


def stage_sample(cfg: PipelineConfig, ws: Workspace) -> dict:
    trees = _load_trees(ws)
    supported = _supported_nodes(ws)
    # node objects are unique per tree, so identity tells the trees apart
    usable = {id(n) for t in trees.values() for n in t.nodes.values() if (t.tree_id, n.node_id) in supported}

    def eligible(node: TitleNode) -> bool:
        return id(node) in usable and not is_boilerplate(node)

    pool = [trees[k] for k in sorted(trees) if id(trees[k].nodes[trees[k].root]) in usable]
    if not pool:
        raise Unsatisfiable("no tree has a usable root section")
    titles = title_index(pool) if len(pool) >= 2 else None
    graphs: dict[tuple, object] = {}

    def graph_for(kind: Kind, tree_ids: tuple[str, ...]):
        key = (kind, tree_ids)
        if key not in graphs:
            graphs[key] = build_edges([trees[t] for t in tree_ids], kind, eligible)
        return graphs[key]

    records, skipped = [], []
    for kind in Kind:
        n = cfg.mix.counts[kind.value]
        n_long = 0 if kind is Kind.LDS else round(n * cfg.mix.long_fraction)
        for i in range(n):
            long = i < n_long
            lo, hi = cfg.sampler.long_bounds if long else cfg.sampler.bounds[kind.value]
            order = list(pool)
            random.Random(derive_seed(cfg.seed, kind.value, i, "tree")).shuffle(order)
            flow = None
            for tree in order:
                if kind is Kind.DTRW:
                    if titles is None:
                        break
                    partner = pair_trees(tree.title, pool, titles, exclude_url=tree.page_url)
                    tree_ids = (tree.tree_id, partner.tree_id)
                else:
                    tree_ids = (tree.tree_id,)
                strategy = SamplingStrategy(kind, lo, hi, derive_seed(cfg.seed, kind.value, i, tree.tree_id))
                try:
                    flow = sample_flow(graph_for(kind, tree_ids), strategy, cfg.sampler.restarts)
                    break
                except Unsatisfiable:
                    continue
            if flow is None:
                skipped.append({"kind": kind.value, "index": i, "reason": "no tree admits a flow"})
                continue
            records.append({"flow_index": len(records), "long": long, "flow": flow.to_dict()})
    write_jsonl(ws.path(FLOWS), records)
    report = {"flows": len(records), "skipped": skipped}
    write_json(ws.path("sample/report.json"), report)
    ws.write_manifest("sample", cfg, ws.input_hashes([TREES, SUPPORT]), [FLOWS, "sample/report.json"])
    return report


def _load_flows(ws: Workspace) -> list[tuple[int, ConversationFlow]]:
    return [(rec["flow_index"], ConversationFlow.from_dict(rec["flow"])) for _, rec in read_jsonl(ws.require(FLOWS))]


def stage_contextualize(cfg: PipelineConfig, ws: Workspace, gateway: Gateway) -> dict:
    trees = _load_trees(ws)
    flows = _load_flows(ws)
    prompts = prompt_set(cfg)

    def one(item):
        idx, flow = item
        drafts = []
        for i, (tid, nid) in enumerate(flow.steps, 1):
            drafts.append(TurnDraft(i, build_keyword_chain(trees, (tid, nid)), trees[tid].nodes[nid].content,
                                    source=(tid, nid)))
        try:
            for d in drafts:
                generate_full_question(d, gateway, prompts)
            contextualize_conversation(drafts, flow.strategy.kind, gateway,
                                       topic=trees[flow.steps[0][0]].title, prompts=prompts)
        except ParseError as exc:
            return idx, None, str(exc)
        return idx, drafts, None

    workers = max(1, min(cfg.pipeline.workers, gateway.max_in_flight))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(one, flows))
    else:
        results = [one(f) for f in flows]
    records, skipped = [], []
    for idx, drafts, err in results:
        if drafts is None:
            skipped.append({"flow_index": idx, "reason": err})
        else:
            records.append({"flow_index": idx, "drafts": [d.to_dict() for d in drafts]})
    write_jsonl(ws.path(DRAFTS), records)
    report = {
        "conversations": len(records),
        "skipped": skipped,
        "needs_review": sum(d["needs_review"] for r in records for d in r["drafts"]),
    }
    write_json(ws.path("contextualize/report.json"), report)
    ws.write_manifest("contextualize", cfg, ws.input_hashes([TREES, FLOWS]), [DRAFTS, "contextualize/report.json"],
                      {"gateway": gateway.accounting()})
    return report


def stage_assemble(cfg: PipelineConfig, ws: Workspace) -> dict:
    inputs = ws.input_hashes([TREES, PASSAGES, SUPPORT, FLOWS, DRAFTS])
    trees = _load_trees(ws)
    passages = [Passage.from_dict(rec) for _, rec in read_jsonl(ws.path(PASSAGES))]
    support = [SupportLink.from_dict(rec) for _, rec in read_jsonl(ws.path(SUPPORT))]
    flows = dict(_load_flows(ws))
    paired = [(flows[rec["flow_index"]], [TurnDraft.from_dict(d) for d in rec["drafts"]])
              for _, rec in read_jsonl(ws.path(DRAFTS))]
    conversations, corpus, report = ds.assemble(
        [f for f, _ in paired], [d for _, d in paired], trees, passages, support, seed=cfg.seed,
    )
    ds.save(conversations, corpus, ws.path(DATASET_DIR), seed=cfg.seed)
    write_json(ws.path("dataset/assemble_report.json"), report.to_dict())
    ws.write_manifest("assemble", cfg, inputs, [*DATASET_FILES, "dataset/assemble_report.json"])
    return {"conversations": len(conversations), "passages": len(corpus), **report.to_dict()}


def load_dataset(ws: Workspace) -> tuple[list[ds.Conversation], ds.PassageCorpus]:
    for rel in DATASET_FILES:
        ws.require(rel)
    return ds.load(ws.path(DATASET_DIR))


def stage_validate(ws: Workspace) -> list[dict]:
    conversations, corpus = load_dataset(ws)
    return ds.validate(conversations, corpus)


def stage_index(cfg: PipelineConfig, ws: Workspace) -> dict:
    inputs = ws.input_hashes(list(DATASET_FILES))
    conversations, corpus = ds.load(ws.path(DATASET_DIR))
    index = build_index(corpus, cfg.bm25.k1, cfg.bm25.b)
    save_index(index, ws.path(INDEX))
    qrels = {(c.conversation_id, t.turn_id): set(t.golden_passage_ids) for c in conversations for t in c.turns}
    write_trec_qrels(qrels, ws.path(QRELS))
    ws.write_manifest("index", cfg, inputs, [INDEX, INDEX_SIDECAR, QRELS])
    return {"documents": index.doc_count, "terms": len(index.postings)}


# ---------------------------------------------------------------------------
# experiment stages
# ---------------------------------------------------------------------------


def run_config(cfg: PipelineConfig, strategy: str) -> RunConfig:
    p = cfg.pipeline
    return RunConfig(strategy=CompressionStrategy(strategy), top_k=cfg.bm25.top_k, passages_m=p.passages_m,
                     history_window=p.history_window, teacher_forced=p.teacher_forced, passage_mode=p.passage_mode)


def stage_run(cfg: PipelineConfig, ws: Workspace, strategy: str, gateway: Gateway) -> dict:
    inputs = ws.input_hashes([*DATASET_FILES, INDEX, INDEX_SIDECAR])
    conversations, corpus = ds.load(ws.path(DATASET_DIR))
    if cfg.pipeline.split != "all":
        conversations = [c for c in conversations if c.split == cfg.pipeline.split]
    index = load_index(ws.path(INDEX))
    records = run_conversations(conversations, index, corpus, gateway, run_config(cfg, strategy),
                                prompt_set(cfg), workers=cfg.pipeline.workers)
    rel = run_file(strategy)
    write_jsonl(ws.path(rel), (r.to_dict() for r in records))
    failed = failures(records)
    ws.write_manifest(f"run-{strategy}", cfg, inputs, [rel],
                      {"run_config": run_config(cfg, strategy).to_dict(), "failures": failed,
                       "gateway": gateway.accounting()})
    return {"turns": len(records), "failures": len(failed)}


def stage_eval(cfg: PipelineConfig, ws: Workspace, strategy: str, gateway: Gateway | None = None) -> dict:
    rel = run_file(strategy)
    inputs = ws.input_hashes([rel, *DATASET_FILES])
    conversations, corpus = ds.load(ws.path(DATASET_DIR))
    judge = LexicalJudge(cfg.judge.threshold)
    if cfg.judge.kind == "llm":
        if gateway is None:
            raise ConfigError("the llm judge needs a gateway", field="judge.kind")
        judge = LlmJudge(gateway)
    report = evaluate_run(
        ws.path(rel), conversations, corpus, judge,
        config_hash=cfg.digest(), dataset_hash=file_sha256(ws.path("dataset/manifest.json")),
        compare_gateway=gateway if cfg.judge.pairwise else None, seed=cfg.seed,
    )
    outs = [report_file(strategy, e) for e in ("json", "txt", "trec")]
    report.save(ws.path(outs[0]))
    ws.path(outs[1]).write_text(report.table() + "\n", encoding="utf-8")
    report.write_trec(ws.path(outs[2]))
    ws.write_manifest(f"eval-{strategy}", cfg, inputs, outs)
    return report.aggregate


def stage_stats(cfg: PipelineConfig, ws: Workspace) -> str:
    inputs = ws.input_hashes(list(DATASET_FILES))
    conversations, _ = ds.load(ws.path(DATASET_DIR))
    stats = ds.compute_stats(conversations)
    table = ds.format_stats_table(stats)
    write_json(ws.path("stats/stats.json"), ds.stats_to_dict(stats))
    ws.path("stats/stats.txt").write_text(table + "\n", encoding="utf-8")
    ws.write_manifest("stats", cfg, inputs, ["stats/stats.json", "stats/stats.txt"])
    return table


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass
class VerifyIssue:
    manifest: str
    file: str
    problem: str

    def to_dict(self) -> dict:
        return {"manifest": self.manifest, "file": self.file, "problem": self.problem}


def verify(ws: Workspace) -> list[VerifyIssue]:
    """Recheck every manifest: outputs still match, and inputs match their producers' outputs."""
    issues = []
    mdir = ws.path("manifests")
    if not mdir.is_dir():
        return [VerifyIssue("-", "manifests", "workspace has no manifests")]
    produced: dict[str, str] = {}
    manifests = {p.stem: read_json(p) for p in sorted(mdir.glob("*.json"))}
    for name, m in manifests.items():
        for rel, digest in m["outputs"].items():
            produced[rel] = digest
            path = ws.path(rel)
            if not path.exists():
                issues.append(VerifyIssue(name, rel, "missing"))
            elif file_sha256(path) != digest:
                issues.append(VerifyIssue(name, rel, "modified since it was written"))
    for name, m in manifests.items():
        for rel, digest in m["inputs"].items():
            if rel in produced and produced[rel] != digest:
                issues.append(VerifyIssue(name, rel, "consumed a different version than the current producer output"))
    return issues
