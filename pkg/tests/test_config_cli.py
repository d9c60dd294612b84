from __future__ import annotations

import json
from pathlib import Path

import pytest

from coreforge import cli
from coreforge.config import load_config, parse_config
from coreforge.errors import ConfigError, MissingArtifact
from coreforge.stages import Workspace, verify

FIXTURE_ROOT = Path(__file__).resolve().parents[1] / "src" / "coreforge" / "fixtures"


def minimal(**extra) -> dict:
    raw = {"seed": 1, "paths": {"pages": "p", "references": "r"}}
    raw.update(extra)
    return raw


# -- config ----------------------------------------------------------------------

def test_bundled_fixture_profile_loads():
    cfg = load_config("fixture")
    assert cfg.seed == 20240501
    assert cfg.bm25.k1 == 0.9 and cfg.bm25.b == 0.4
    assert cfg.pipeline.strategies == ["raw", "last", "rewrite", "summ"]
    assert cfg.paths.pages.is_dir()


def test_seed_is_required():
    with pytest.raises(ConfigError):
        parse_config({"paths": {"pages": "p", "references": "r"}}, Path("."))


@pytest.mark.parametrize("raw,field", [
    (minimal(bm25={"b": 1.5}), "bm25.b"),
    (minimal(bm25={"k1": "big"}), "bm25.k1"),
    (minimal(mix={"LDS": -1}), "mix.LDS"),
    (minimal(pipeline={"strategies": ["raw", "nope"]}), "pipeline.strategies"),
    (minimal(sampler={"lds_bounds": [5, 3]}), "sampler.lds_bounds"),
    (minimal(filter={"target_words": 8}), "filter.target_words"),
    (minimal(judge={"kind": "oracle"}), "judge.kind"),
    (minimal(paths={"pages": "p"}), "paths.references"),
    (minimal(seed=True), "config.seed"),
])
def test_invalid_values_name_the_field(raw, field):
    with pytest.raises(ConfigError) as info:
        parse_config(raw, Path("."))
    assert info.value.context["field"] == field


def test_digest_ignores_paths_and_secrets(monkeypatch, tmp_path):
    a = parse_config(minimal(), tmp_path / "a")
    monkeypatch.setenv("COREFORGE_LLM_KEY", "sk-secret")
    monkeypatch.setenv("COREFORGE_LLM_URL", "http://elsewhere/v1")
    b = parse_config(minimal(), tmp_path / "b")
    assert b.gateway.key == "sk-secret"
    assert a.digest() == b.digest()
    assert "sk-secret" not in json.dumps(b.hashable(), default=str)
    assert parse_config(minimal(seed=2), tmp_path).digest() != a.digest()


def test_relative_paths_resolve_against_the_config_file(tmp_path):
    (tmp_path / "conf").mkdir()
    cfg_file = tmp_path / "conf" / "c.toml"
    cfg_file.write_text('seed = 3\n[paths]\npages = "pages"\nreferences = "refs"\nworkspace = "ws"\n')
    cfg = load_config(cfg_file, cwd=tmp_path / "run")
    assert cfg.paths.pages == (tmp_path / "conf" / "pages").resolve()
    assert cfg.paths.workspace == (tmp_path / "run" / "ws").resolve()


def test_bad_toml_and_missing_file(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 3")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


# -- CLI -------------------------------------------------------------------------

def test_config_error_exits_2(tmp_path, capsys):
    bad = tmp_path / "c.toml"
    bad.write_text('seed = 1\n[paths]\npages = "p"\nreferences = "r"\n[bm25]\nb = 2.0\n')
    assert cli.main(["ingest", "--config", str(bad)]) == 2
    assert "bm25.b" in capsys.readouterr().err


def test_eval_before_run_names_the_missing_file(tmp_path, capsys):
    ws = tmp_path / "ws"
    code = cli.main(["eval", "--mock", "--workspace", str(ws), "--strategy", "raw"])
    assert code == 1
    err = capsys.readouterr().err
    assert "MissingArtifact" in err and "runs/raw.jsonl" in err and "forge run" in err


def test_require_points_at_the_producing_stage(tmp_path):
    with pytest.raises(MissingArtifact) as info:
        Workspace(tmp_path).require("runs/raw.jsonl")
    assert info.value.context == {"file": "runs/raw.jsonl", "stage": "run"}


def test_stages_in_order_and_rerun_is_stable(tmp_path, capsys):
    ws = tmp_path / "ws"
    base = ["--mock", "--workspace", str(ws)]
    assert cli.main(["ingest", *base]) == 0
    assert cli.main(["sample", *base]) == 0
    first = (ws / "sample" / "flows.jsonl").read_bytes()
    assert cli.main(["sample", *base]) == 0
    assert (ws / "sample" / "flows.jsonl").read_bytes() == first
    assert cli.main(["contextualize", *base]) == 0
    assert cli.main(["assemble", *base]) == 0
    assert cli.main(["validate", *base]) == 0
    assert cli.main(["index", *base]) == 0
    capsys.readouterr()
    assert cli.main(["search", "Emmy Awards ceremony", "--top-k", "3", *base]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 3
    assert cli.main(["run", "--strategy", "last", "--history-window", "2", *base]) == 0
    assert cli.main(["eval", "--strategy", "last", *base]) == 0
    assert cli.main(["stats", *base]) == 0
    assert cli.main(["verify", *base]) == 0


def test_verify_detects_tampering(fixture_run):
    ws, code, _ = fixture_run
    assert code == 0
    assert verify(ws) == []
    target = ws.path("dataset/corpus.jsonl")
    original = target.read_bytes()
    try:
        target.write_bytes(original + b"\n")
        issues = verify(ws)
        assert [(i.file, i.problem) for i in issues if i.manifest == "assemble"] == [
            ("dataset/corpus.jsonl", "modified since it was written")]
        assert cli.main(["verify", "--mock", "--workspace", str(ws.root)]) == 1
    finally:
        target.write_bytes(original)
    assert verify(ws) == []


def test_negative_flag_is_a_config_error(tmp_path):
    assert cli.main(["run", "--mock", "--workspace", str(tmp_path), "--history-window", "-1"]) == 2


def http_config(tmp_path, gateway: str) -> str:
    cfg = tmp_path / "c.toml"
    cfg.write_text(
        f'seed = 1\n[paths]\npages = "{FIXTURE_ROOT / "pages"}"\nreferences = "{FIXTURE_ROOT / "refs"}"\n'
        f'workspace = "{tmp_path / "ws"}"\n[mix]\nLDS = 1\n[gateway]\nmode = "http"\n{gateway}'
    )
    assert cli.main(["ingest", "--config", str(cfg)]) == 0
    assert cli.main(["sample", "--config", str(cfg)]) == 0
    return str(cfg)


def test_http_mode_without_endpoint_is_a_config_error(tmp_path):
    assert cli.main(["contextualize", "--config", http_config(tmp_path, "")]) == 2


def test_unreachable_endpoint_exits_3(tmp_path):
    # port 9 (discard) on loopback: nothing listens, the connection is refused
    cfg = http_config(tmp_path, 'url = "http://127.0.0.1:9/v1"\nmodel = "m"\nattempts = 1\ntimeout = 2.0\n')
    assert cli.main(["contextualize", "--config", cfg]) == 3
