"""Best-effort retrieval of trend series over HTTP.

The endpoint is unofficial, so the fetcher is kept deliberately small: one
GET per request, exponential backoff on 429/5xx, and a recorded-response
transport so tests and offline runs replay saved payloads.

Request shape::

    GET {base}/multiline?req={"terms": [...], "geo": "US", "time": "2020-01-20 2020-03-23"}

Response shape (an optional ``)]}',`` anti-XSSI prefix is tolerated)::

    {"default": {"timelineData": [{"time": "1579478400", "value": [12, 40]}, ...]}}
"""
from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from pathlib import Path
from typing import Callable, Sequence

from .core import TrendSeries
from .errors import FetchError, HttpStatusError, OfflineError, QuotaError, SchemaError
from .ingest import format_trends_long

ENDPOINT_ENV = "TRENDCAST_TRENDS_URL"
DEFAULT_ENDPOINT = "https://trends.google.com/trends/api/widgetdata"

Transport = Callable[[str], tuple[int, str]]


def urllib_transport(url: str, timeout: float = 30.0) -> tuple[int, str]:
    req = urllib.request.Request(url, headers={"User-Agent": "trendcast/0.1"})
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, resp.read().decode("utf-8")
    except urllib.error.HTTPError as exc:
        return exc.code, exc.read().decode("utf-8", "replace")
    except (urllib.error.URLError, OSError) as exc:
        raise FetchError(f"request to {url} failed: {exc}") from exc


def _key(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:32]


class RecordedTransport:
    """Replays (or records) responses keyed by a hash of the request URL.

    ``mode="replay"`` never touches the network; a missing recording is an
    OfflineError. ``mode="record"`` forwards to ``inner`` and saves the result.
    """

    def __init__(self, directory, mode: str = "replay", inner: Transport | None = None):
        if mode not in ("replay", "record"):
            raise ValueError("mode must be 'replay' or 'record'")
        self.directory = Path(directory)
        self.mode = mode
        self.inner = inner or urllib_transport

    def path_for(self, url: str) -> Path:
        return self.directory / f"{_key(url)}.json"

    def save(self, url: str, status: int, body: str) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        record = {"url": url, "status": status, "body": body}
        self.path_for(url).write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")

    def __call__(self, url: str) -> tuple[int, str]:
        path = self.path_for(url)
        if self.mode == "replay":
            if not path.exists():
                raise OfflineError(f"offline and no recorded response for {url}")
            record = json.loads(path.read_text())
            return int(record["status"]), record["body"]
        status, body = self.inner(url)
        self.save(url, status, body)
        return status, body


_host_locks: dict[str, threading.Lock] = {}
_host_locks_guard = threading.Lock()


def _host_lock(url: str) -> threading.Lock:
    host = urllib.parse.urlsplit(url).netloc
    with _host_locks_guard:
        return _host_locks.setdefault(host, threading.Lock())


class TrendsFetcher:
    def __init__(self, base_url: str | None = None, transport: Transport | None = None,
                 max_retries: int = 4, backoff: float = 1.0, backoff_factor: float = 2.0,
                 sleep: Callable[[float], None] = time.sleep):
        self.base_url = (base_url or os.environ.get(ENDPOINT_ENV) or DEFAULT_ENDPOINT).rstrip("/")
        self.transport = transport or urllib_transport
        self.max_retries = max_retries
        self.backoff = backoff
        self.backoff_factor = backoff_factor
        self.sleep = sleep

    def url(self, terms: Sequence[str], start: dt.date, end: dt.date, geo: str = "") -> str:
        req = {"terms": list(terms), "geo": geo, "time": f"{start.isoformat()} {end.isoformat()}"}
        query = urllib.parse.urlencode({"req": json.dumps(req, sort_keys=True, separators=(",", ":"))})
        return f"{self.base_url}/multiline?{query}"

    def _get(self, url: str) -> str:
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            with _host_lock(url):
                status, body = self.transport(url)
            if status == 200:
                return body
            retryable = status == 429 or status >= 500
            if not retryable or attempt == self.max_retries:
                if status == 429:
                    raise QuotaError(status, url)
                raise HttpStatusError(status, url)
            self.sleep(delay)
            delay *= self.backoff_factor
        raise AssertionError("unreachable")

    def fetch(self, terms: Sequence[str], start: dt.date, end: dt.date,
              geo: str = "") -> list[TrendSeries]:
        if not terms:
            raise ValueError("no terms requested")
        url = self.url(terms, start, end, geo)
        return parse_timeline_json(self._get(url), terms, geo)


def parse_timeline_json(body: str, terms: Sequence[str], geo: str = "") -> list[TrendSeries]:
    text = body.lstrip()
    if text.startswith(")]}'"):
        text = text[4:].lstrip(",").lstrip()
    try:
        rows = json.loads(text)["default"]["timelineData"]
    except (ValueError, KeyError, TypeError) as exc:
        raise SchemaError(f"unexpected response layout: {exc!r}") from None
    points = [[] for _ in terms]
    try:
        for row in rows:
            day = dt.datetime.fromtimestamp(int(row["time"]), dt.timezone.utc).date()
            values = row["value"]
            if len(values) != len(terms):
                raise SchemaError(f"{len(values)} values for {len(terms)} terms on {day}")
            for j, v in enumerate(values):
                points[j].append((day, float(v)))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"malformed timeline row: {exc!r}") from None
    try:
        return [TrendSeries(term, geo, tuple(pts)) for term, pts in zip(terms, points)]
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def fetch_trends(terms: Sequence[str], start: dt.date, end: dt.date, geo: str = "",
                 out=None, fetcher: TrendsFetcher | None = None) -> list[TrendSeries]:
    """Fetch all terms in one request; write canonical long CSV to ``out`` if given.

    Nothing is written unless every series parsed.
    """
    series = (fetcher or TrendsFetcher()).fetch(terms, start, end, geo)
    if out is not None:
        Path(out).write_text(format_trends_long(series))
    return series
