"""Reference-page sources: a local snapshot directory and a polite HTTP fetcher."""

from __future__ import annotations

import logging
import threading
import time
from pathlib import Path
from typing import Callable
from urllib.parse import urlsplit

import requests

from .jsonl import read_json

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "coreforge/0.1 (benchmark construction; contact: maintainer)"


class ReferenceStore:
    """Reference pages saved on disk, located through ``manifest.json`` (url -> file name)."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        manifest = self.directory / "manifest.json"
        self.files: dict[str, str] = read_json(manifest) if manifest.exists() else {}

    def __call__(self, url: str) -> str | None:
        name = self.files.get(url)
        if name is None:
            return None
        path = self.directory / name
        return path.read_text(encoding="utf-8") if path.exists() else None


class Fetcher:
    """GET with a fixed user agent and a minimum interval between requests to the same host."""

    def __init__(self, user_agent: str = DEFAULT_USER_AGENT, min_interval: float = 1.0,
                 timeout: float = 30.0, session: requests.Session | None = None,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.user_agent = user_agent
        self.min_interval = min_interval
        self.timeout = timeout
        self.session = session or requests.Session()
        self._clock = clock
        self._sleep = sleep
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def _wait_for(self, host: str) -> None:
        with self._lock:
            now = self._clock()
            ready = self._last.get(host, float("-inf")) + self.min_interval
            if now < ready:
                self._sleep(ready - now)
                now = ready
            self._last[host] = now

    def __call__(self, url: str) -> str | None:
        """Page HTML, or None on any failure (logged)."""
        self._wait_for(urlsplit(url).netloc)
        try:
            resp = self.session.get(url, headers={"User-Agent": self.user_agent}, timeout=self.timeout)
        except requests.RequestException as exc:
            log.warning("fetch failed for %s: %s", url, exc)
            return None
        if resp.status_code != 200:
            log.warning("fetch of %s returned HTTP %d", url, resp.status_code)
            return None
        return resp.text
