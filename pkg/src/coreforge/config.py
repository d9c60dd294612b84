"""Pipeline configuration: one TOML file, environment overrides for endpoint settings.

Environment variables in ``[paths]`` entries are expanded. Relative entries
resolve against the config file's directory, except ``workspace``, which
resolves against the working directory so a bundled profile can write next
to the caller.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .llm import ENV_KEY, ENV_MODEL, ENV_URL
from .pipeline import CompressionStrategy, PassageMode
from .sampling import DEFAULT_BOUNDS, LONG_BOUNDS, Kind

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BUNDLED_PROFILES = ("fixture", "full")


@dataclass
class Paths:
    pages: Path
    references: Path
    workspace: Path
    prompts: Path | None = None


@dataclass
class Mix:
    counts: dict[str, int] = field(default_factory=lambda: {k.value: 0 for k in Kind})
    long_fraction: float = 0.0


@dataclass
class SamplerSettings:
    restarts: int = 32
    bounds: dict[str, tuple[int, int]] = field(default_factory=lambda: {k.value: v for k, v in DEFAULT_BOUNDS.items()})
    long_bounds: tuple[int, int] = LONG_BOUNDS


@dataclass
class FilterSettings:
    threshold: float = 0.2
    target_words: int = 128


@dataclass
class Bm25Settings:
    k1: float = 0.9
    b: float = 0.4
    top_k: int = 100


@dataclass
class PipelineSettings:
    strategies: list[str] = field(default_factory=lambda: [s.value for s in CompressionStrategy])
    passages_m: int = 5
    history_window: int | None = None
    teacher_forced: bool = True
    passage_mode: str = PassageMode.PASSTHROUGH.value
    split: str = "all"
    workers: int = 1


@dataclass
class GatewaySettings:
    mode: str = "mock"
    url: str | None = None
    model: str | None = None
    key: str | None = field(default=None, repr=False)
    max_requests: int | None = None
    max_in_flight: int = 4
    attempts: int = 3
    backoff: float = 1.0
    timeout: float = 120.0
    cache: bool = True


@dataclass
class JudgeSettings:
    kind: str = "lexical"
    threshold: float = 0.6
    pairwise: bool = False


@dataclass
class FetchSettings:
    online: bool = False
    user_agent: str = "coreforge/0.1"
    min_interval: float = 1.0


@dataclass
class PipelineConfig:
    seed: int
    paths: Paths
    mix: Mix = field(default_factory=Mix)
    sampler: SamplerSettings = field(default_factory=SamplerSettings)
    filter: FilterSettings = field(default_factory=FilterSettings)
    bm25: Bm25Settings = field(default_factory=Bm25Settings)
    pipeline: PipelineSettings = field(default_factory=PipelineSettings)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    judge: JudgeSettings = field(default_factory=JudgeSettings)
    fetch: FetchSettings = field(default_factory=FetchSettings)
    source: str = ""

    def hashable(self) -> dict:
        """Settings that affect outputs: no paths, no secrets, no endpoint location."""
        d = asdict(self)
        for k in ("paths", "source"):
            d.pop(k)
        for k in ("key", "url", "max_requests", "max_in_flight", "attempts", "backoff", "timeout", "cache"):
            d["gateway"].pop(k)
        d["pipeline"].pop("workers")
        return d

    def digest(self) -> str:
        blob = json.dumps(self.hashable(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _section(raw: dict, name: str) -> dict:
    value = raw.get(name, {})
    if not isinstance(value, dict):
        raise ConfigError(f"[{name}] must be a table", field=name)
    return value


def _get(table: dict, name: str, kind, default, where: str):
    if name not in table:
        return default
    value = table[name]
    ok = isinstance(value, kind) and not (kind in (int, float, (int, float)) and isinstance(value, bool))
    if not ok:
        raise ConfigError(f"{where}.{name} has the wrong type: {value!r}", field=f"{where}.{name}")
    return value


def _require(cond: bool, fieldname: str, reason: str) -> None:
    if not cond:
        raise ConfigError(f"{fieldname}: {reason}", field=fieldname, reason=reason)


def _bounds(value, where: str) -> tuple[int, int]:
    if not (isinstance(value, list) and len(value) == 2 and all(isinstance(x, int) for x in value)):
        raise ConfigError(f"{where} must be a [min, max] pair of integers", field=where)
    lo, hi = value
    _require(1 <= lo <= hi, where, "need 1 <= min <= max")
    return lo, hi


def parse_config(raw: dict, base_dir: Path, cwd: Path | None = None, source: str = "") -> PipelineConfig:
    cwd = cwd or Path.cwd()
    if "seed" not in raw:
        raise ConfigError("seed is required (no implicit randomness)", field="seed")
    seed = _get(raw, "seed", int, None, "config")

    p = _section(raw, "paths")
    for name in ("pages", "references"):
        _require(name in p, f"paths.{name}", "missing")

    def path(name, default=""):
        return Path(os.path.expandvars(_get(p, name, str, default, "paths")))

    paths = Paths(
        pages=(base_dir / path("pages")).resolve(),
        references=(base_dir / path("references")).resolve(),
        workspace=(cwd / path("workspace", "forge-workspace")).resolve(),
        prompts=(base_dir / path("prompts")).resolve() if p.get("prompts") else None,
    )

    m = _section(raw, "mix")
    counts = {}
    for kind in Kind:
        n = _get(m, kind.value, int, 0, "mix")
        _require(n >= 0, f"mix.{kind.value}", "count must be >= 0")
        counts[kind.value] = n
    long_fraction = float(_get(m, "long_fraction", (int, float), 0.0, "mix"))
    _require(0.0 <= long_fraction <= 1.0, "mix.long_fraction", "must be in [0, 1]")

    s = _section(raw, "sampler")
    sampler = SamplerSettings(restarts=_get(s, "restarts", int, 32, "sampler"))
    _require(sampler.restarts >= 1, "sampler.restarts", "must be >= 1")
    for kind in Kind:
        key = f"{kind.value.lower()}_bounds"
        if key in s:
            sampler.bounds[kind.value] = _bounds(s[key], f"sampler.{key}")
    if "long_bounds" in s:
        sampler.long_bounds = _bounds(s["long_bounds"], "sampler.long_bounds")

    f = _section(raw, "filter")
    filt = FilterSettings(
        threshold=float(_get(f, "threshold", (int, float), 0.2, "filter")),
        target_words=_get(f, "target_words", int, 128, "filter"),
    )
    _require(0.0 <= filt.threshold <= 1.0, "filter.threshold", "must be in [0, 1]")
    _require(filt.target_words >= 16, "filter.target_words", "must be >= 16")

    b = _section(raw, "bm25")
    bm25 = Bm25Settings(
        k1=float(_get(b, "k1", (int, float), 0.9, "bm25")),
        b=float(_get(b, "b", (int, float), 0.4, "bm25")),
        top_k=_get(b, "top_k", int, 100, "bm25"),
    )
    _require(bm25.k1 >= 0, "bm25.k1", "must be >= 0")
    _require(0.0 <= bm25.b <= 1.0, "bm25.b", "must be in [0, 1]")
    _require(bm25.top_k >= 1, "bm25.top_k", "must be >= 1")

    pl = _section(raw, "pipeline")
    strategies = _get(pl, "strategies", list, [s.value for s in CompressionStrategy], "pipeline")
    valid = {s.value for s in CompressionStrategy}
    _require(bool(strategies) and all(x in valid for x in strategies), "pipeline.strategies",
             f"each entry must be one of {sorted(valid)}")
    window = _get(pl, "history_window", int, -1, "pipeline")
    pipeline = PipelineSettings(
        strategies=list(strategies),
        passages_m=_get(pl, "passages_m", int, 5, "pipeline"),
        history_window=None if window < 0 else window,
        teacher_forced=_get(pl, "teacher_forced", bool, True, "pipeline"),
        passage_mode=_get(pl, "passage_mode", str, "passthrough", "pipeline"),
        split=_get(pl, "split", str, "all", "pipeline"),
        workers=_get(pl, "workers", int, 1, "pipeline"),
    )
    _require(pipeline.passages_m >= 1, "pipeline.passages_m", "must be >= 1")
    _require(pipeline.passage_mode in {x.value for x in PassageMode}, "pipeline.passage_mode",
             "must be passthrough or llm")
    _require(pipeline.split in ("all", "train", "test"), "pipeline.split", "must be all, train or test")
    _require(pipeline.workers >= 1, "pipeline.workers", "must be >= 1")

    g = _section(raw, "gateway")
    gateway = GatewaySettings(
        mode=_get(g, "mode", str, "mock", "gateway"),
        url=_get(g, "url", str, None, "gateway"),
        model=_get(g, "model", str, None, "gateway"),
        max_requests=_get(g, "max_requests", int, None, "gateway"),
        max_in_flight=_get(g, "max_in_flight", int, 4, "gateway"),
        attempts=_get(g, "attempts", int, 3, "gateway"),
        backoff=float(_get(g, "backoff", (int, float), 1.0, "gateway")),
        timeout=float(_get(g, "timeout", (int, float), 120.0, "gateway")),
        cache=_get(g, "cache", bool, True, "gateway"),
    )
    _require(gateway.mode in ("mock", "http"), "gateway.mode", "must be mock or http")
    _require(gateway.max_in_flight >= 1, "gateway.max_in_flight", "must be >= 1")
    _require(gateway.attempts >= 1, "gateway.attempts", "must be >= 1")
    gateway.url = os.environ.get(ENV_URL) or gateway.url
    gateway.model = os.environ.get(ENV_MODEL) or gateway.model
    gateway.key = os.environ.get(ENV_KEY) or None

    j = _section(raw, "judge")
    judge = JudgeSettings(
        kind=_get(j, "kind", str, "lexical", "judge"),
        threshold=float(_get(j, "threshold", (int, float), 0.6, "judge")),
        pairwise=_get(j, "pairwise", bool, False, "judge"),
    )
    _require(judge.kind in ("lexical", "llm"), "judge.kind", "must be lexical or llm")
    _require(0.0 <= judge.threshold <= 1.0, "judge.threshold", "must be in [0, 1]")

    fe = _section(raw, "fetch")
    fetch = FetchSettings(
        online=_get(fe, "online", bool, False, "fetch"),
        user_agent=_get(fe, "user_agent", str, "coreforge/0.1", "fetch"),
        min_interval=float(_get(fe, "min_interval", (int, float), 1.0, "fetch")),
    )

    return PipelineConfig(seed, paths, Mix(counts, long_fraction), sampler, filt, bm25, pipeline,
                          gateway, judge, fetch, source)


def load_config(spec: str | Path, cwd: Path | None = None) -> PipelineConfig:
    """Load a config file, or a bundled profile by name (``fixture``, ``full``)."""
    text_spec = str(spec)
    if text_spec in BUNDLED_PROFILES:
        ref = resources.files("coreforge").joinpath("profiles", f"{text_spec}.toml")
        with resources.as_file(ref) as path:
            return _load_path(Path(path), cwd, source=f"profile:{text_spec}")
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", field="config")
    return _load_path(path, cwd, source=str(path))


def _load_path(path: Path, cwd: Path | None, source: str) -> PipelineConfig:
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}", field="config") from exc
    return parse_config(raw, path.resolve().parent, cwd, source)
