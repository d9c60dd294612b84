from __future__ import annotations

import time
from pathlib import Path

import pytest

from coreforge import cli
from coreforge.ingest import TitleNode, TitleTree
from coreforge.stages import Workspace

_ACCEPTANCE: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): one of the nine acceptance criteria")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        status = "PASS" if rep.passed else "FAIL"
        _ACCEPTANCE[number] = (title, status, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, duration = _ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number}: {title} ({duration:.2f} s)")


def outline_tree(outline, url: str = "https://example.org/wiki/T") -> TitleTree:
    """Tree from ``(title, [children...])`` tuples; ids n0, n1, ... in pre-order."""
    nodes: dict[str, TitleNode] = {}

    def add(item, parent, level):
        title, kids = item
        nid = f"n{len(nodes)}"
        nodes[nid] = TitleNode(nid, level, title, content=f"{title} section text.", parent=parent)
        if parent is not None:
            nodes[parent].children.append(nid)
        for k in kids:
            add(k, nid, level + 1)

    add(outline, None, 1)
    tree = TitleTree("n0", nodes, url)
    tree.check()
    return tree


def run_forge_all(workspace: Path, *extra: str) -> tuple[int, float]:
    start = time.perf_counter()
    code = cli.main(["all", "--mock", "--workspace", str(workspace), *extra])
    return code, time.perf_counter() - start


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """One end-to-end mock run over the bundled fixture, shared by the suite."""
    root = tmp_path_factory.mktemp("forge") / "ws"
    code, seconds = run_forge_all(root)
    return Workspace(root), code, seconds


@pytest.fixture(autouse=True)
def _no_endpoint_env(monkeypatch):
    for var in ("COREFORGE_LLM_URL", "COREFORGE_LLM_MODEL", "COREFORGE_LLM_KEY"):
        monkeypatch.delenv(var, raising=False)
