"""Readers and writers for trend, case and related-query files."""
from __future__ import annotations

import csv
import io
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import datetime as dt

from .core import CaseSeries, DateStamp, TrendSeries
from .errors import ArgumentError, ParseError

LESS_THAN_ONE = 0.5
BREAKOUT_WEIGHT = 5000

# Google exports country names in headers; the toolkit keys regions by ISO code.
GEO_CODES = {
    "Worldwide": "", "United States": "US", "Italy": "IT", "France": "FR",
    "Spain": "ES", "Germany": "DE", "United Kingdom": "GB", "China": "CN",
    "Iran": "IR", "South Korea": "KR", "Switzerland": "CH",
}


class DataWarning(UserWarning):
    pass


def _text(data) -> str:
    if isinstance(data, (bytes, bytearray)):
        data = bytes(data).decode("utf-8-sig")
    elif data.startswith("﻿"):
        data = data[1:]
    return data


def _rows(data) -> list[tuple[int, list[str]]]:
    reader = csv.reader(io.StringIO(_text(data)))
    return [(reader.line_num, row) for row in reader]


def _date(cell: str, line: int, source) -> DateStamp:
    try:
        return dt.date.fromisoformat(cell.strip())
    except ValueError:
        raise ParseError(f"malformed date {cell!r}", line, source) from None


def _trend_value(cell: str, line: int, source, term: str) -> float:
    cell = cell.strip()
    if cell == "<1":
        return LESS_THAN_ONE
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric value {cell!r} for {term!r}", line, source) from None
    if value != value:
        raise ParseError(f"non-numeric value {cell!r} for {term!r}", line, source)
    if not 0.0 <= value <= 100.0:
        clamped = min(max(value, 0.0), 100.0)
        warnings.warn(f"line {line}: {term!r} value {value} clamped to {clamped}",
                      DataWarning, stacklevel=3)
        value = clamped
    return value


def _split_header_term(cell: str) -> tuple[str, str]:
    # "covid19: (Worldwide)" -> ("covid19", "")
    cell = cell.strip()
    if cell.endswith(")") and ": (" in cell:
        term, _, geo = cell.rpartition(": (")
        geo = geo[:-1].strip()
        return term.strip(), GEO_CODES.get(geo, geo)
    return cell, ""


def parse_trends_csv(data, source=None) -> list[TrendSeries]:
    """Parse a multiTimeline export or the canonical ``date,term,geo,value`` file."""
    rows = [(ln, r) for ln, r in _rows(data) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty trends file", None, source)
    ln, head = rows[0]
    if len(head) == 1 and head[0].startswith("Category:"):
        rows = rows[1:]
        if not rows:
            raise ParseError("missing header after preamble", ln, source)
        ln, head = rows[0]
    head = [h.strip() for h in head]
    if head == ["date", "term", "geo", "value"]:
        return _parse_trends_long(rows[1:], source)
    if head[0] not in ("Day", "Week", "Month") or len(head) < 2:
        raise ParseError(f"unrecognized trends header {','.join(head)!r}", ln, source)

    cols = [_split_header_term(h) for h in head[1:]]
    points = [[] for _ in cols]
    seen = set()
    for line, row in rows[1:]:
        if len(row) != len(head):
            raise ParseError(f"expected {len(head)} cells, found {len(row)}", line, source)
        d = _date(row[0], line, source)
        if d in seen:
            raise ParseError(f"duplicate date {d}", line, source)
        seen.add(d)
        for j, (term, _) in enumerate(cols):
            points[j].append((d, _trend_value(row[j + 1], line, source, term)))
    out = []
    for (term, geo), pts in zip(cols, points):
        pts.sort()
        try:
            out.append(TrendSeries(term, geo, tuple(pts)))
        except ValueError as exc:
            raise ParseError(str(exc), None, source) from None
    return out


def _parse_trends_long(rows, source) -> list[TrendSeries]:
    groups: dict[tuple[str, str], dict] = {}
    for line, row in rows:
        if len(row) != 4:
            raise ParseError(f"expected 4 cells, found {len(row)}", line, source)
        d = _date(row[0], line, source)
        key = (row[1].strip(), row[2].strip())
        if not key[0]:
            raise ParseError("empty term", line, source)
        pts = groups.setdefault(key, {})
        if d in pts:
            raise ParseError(f"duplicate date {d} for {key[0]!r}", line, source)
        pts[d] = _trend_value(row[3], line, source, key[0])
    return [TrendSeries(term, geo, tuple(sorted(pts.items())))
            for (term, geo), pts in groups.items()]


def parse_cases_csv(data, cumulative: bool = False, on_negative: str = "clamp",
                    source=None) -> list[CaseSeries]:
    """Parse ``date,region,new_cases`` (or ``total_cases`` when ``cumulative``).

    Cumulative input is first-differenced per region and its first day
    dropped. A negative difference is clamped to zero with a warning, or
    raised as a ParseError when ``on_negative="reject"``.
    """
    if on_negative not in ("clamp", "reject"):
        raise ArgumentError("on_negative must be 'clamp' or 'reject'")
    rows = [(ln, r) for ln, r in _rows(data) if any(c.strip() for c in r)]
    if not rows:
        raise ParseError("empty cases file", None, source)
    ln, head = rows[0]
    head = [h.strip() for h in head]
    expected = ["date", "region", "total_cases" if cumulative else "new_cases"]
    if head != expected:
        hint = ""
        if head == ["date", "region", "total_cases"]:
            hint = " (cumulative file: pass cumulative=True / --cumulative)"
        raise ParseError(f"expected header {','.join(expected)!r}, found {','.join(head)!r}{hint}",
                         ln, source)

    groups: dict[str, dict] = defaultdict(dict)
    lines: dict[tuple[str, DateStamp], int] = {}
    for line, row in rows[1:]:
        if len(row) != 3:
            raise ParseError(f"expected 3 cells, found {len(row)}", line, source)
        d = _date(row[0], line, source)
        region = row[1].strip()
        try:
            value = int(row[2].strip())
        except ValueError:
            raise ParseError(f"non-integer count {row[2]!r}", line, source) from None
        if value < 0:
            raise ParseError(f"negative count {value}", line, source)
        if d in groups[region]:
            raise ParseError(f"duplicate date {d} for region {region!r}", line, source)
        groups[region][d] = value
        lines[(region, d)] = line

    out = []
    for region, pts in groups.items():
        items = sorted(pts.items())
        if cumulative:
            diffed = []
            for (_, prev), (d, total) in zip(items, items[1:]):
                delta = total - prev
                if delta < 0:
                    if on_negative == "reject":
                        raise ParseError(f"cumulative total decreases by {-delta} in {region!r}",
                                         lines[(region, d)], source)
                    warnings.warn(f"{region!r} {d}: cumulative total decreases by {-delta}; "
                                  "clamped to 0", DataWarning, stacklevel=2)
                    delta = 0
                diffed.append((d, delta))
            items = diffed
        out.append(CaseSeries(region, tuple(items)))
    return out


def _fmt(value: float) -> str:
    return format(value, ".15g")


def format_trends_long(series: Iterable[TrendSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "term", "geo", "value"])
    for s in series:
        for d, v in s.points:
            w.writerow([d.isoformat(), s.term, s.geo, _fmt(v)])
    return buf.getvalue()


def format_cases_csv(series: Iterable[CaseSeries]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["date", "region", "new_cases"])
    for s in series:
        for d, v in s.points:
            w.writerow([d.isoformat(), s.region, _fmt(v)])
    return buf.getvalue()


# -- related queries and topics ------------------------------------------------

@dataclass(frozen=True)
class RelatedQueryTable:
    seed_term: str
    date: DateStamp | None
    entries: tuple[tuple[str, int, str], ...]  # (query, weight, kind)

    def __post_init__(self):
        seen = set()
        for query, weight, kind in self.entries:
            if kind not in ("top", "rising"):
                raise ValueError(f"kind must be top or rising, got {kind!r}")
            if kind == "top" and not 0 <= weight <= 100:
                raise ValueError(f"top weight {weight} for {query!r} outside [0, 100]")
            if (query, kind) in seen:
                raise ValueError(f"duplicate entry ({query!r}, {kind})")
            seen.add((query, kind))

    def top(self) -> list[tuple[str, int]]:
        return [(q, w) for q, w, k in self.entries if k == "top"]


@dataclass(frozen=True)
class RelatedTopicTable:
    seed_term: str
    date: DateStamp | None
    entries: tuple[tuple[str, str, int], ...]  # (topic_title, category, weight)

    def __post_init__(self):
        for title, category, _ in self.entries:
            if not category:
                raise ValueError(f"topic {title!r} has an empty category")


def _weight(cell: str, line, source) -> int:
    cell = cell.strip()
    if cell.lower() == "breakout":
        return BREAKOUT_WEIGHT
    try:
        return int(cell.rstrip("%").lstrip("+").replace(",", ""))
    except ValueError:
        raise ParseError(f"non-integer weight {cell!r}", line, source) from None


def _optional_date(cell: str, line, source):
    return _date(cell, line, source) if cell.strip() else None


def parse_related_queries_csv(data, source=None) -> list[RelatedQueryTable]:
    """Parse ``seed,date,kind,query,weight``; an empty date marks a range aggregate."""
    rows = _rows(data)
    if not rows or [h.strip() for h in rows[0][1]] != ["seed", "date", "kind", "query", "weight"]:
        raise ParseError("expected header 'seed,date,kind,query,weight'", 1, source)
    groups: dict = {}
    for line, row in rows[1:]:
        if not any(c.strip() for c in row):
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 cells, found {len(row)}", line, source)
        key = (row[0].strip(), _optional_date(row[1], line, source))
        kind = row[2].strip()
        if kind not in ("top", "rising"):
            raise ParseError(f"kind must be top or rising, got {kind!r}", line, source)
        entry = (row[3].strip(), _weight(row[4], line, source), kind)
        if kind == "top" and not 0 <= entry[1] <= 100:
            raise ParseError(f"top weight {entry[1]} outside [0, 100]", line, source)
        bucket = groups.setdefault(key, {})
        if (entry[0], kind) in bucket:
            raise ParseError(f"duplicate entry ({entry[0]!r}, {kind})", line, source)
        bucket[(entry[0], kind)] = entry
    return [RelatedQueryTable(seed, d, tuple(b.values())) for (seed, d), b in groups.items()]


def parse_related_topics_csv(data, source=None) -> list[RelatedTopicTable]:
    """Parse ``seed,date,topic,category,weight``."""
    rows = _rows(data)
    if not rows or [h.strip() for h in rows[0][1]] != ["seed", "date", "topic", "category", "weight"]:
        raise ParseError("expected header 'seed,date,topic,category,weight'", 1, source)
    groups: dict = {}
    for line, row in rows[1:]:
        if not any(c.strip() for c in row):
            continue
        if len(row) != 5:
            raise ParseError(f"expected 5 cells, found {len(row)}", line, source)
        if not row[3].strip():
            raise ParseError("empty category", line, source)
        key = (row[0].strip(), _optional_date(row[1], line, source))
        groups.setdefault(key, []).append(
            (row[2].strip(), row[3].strip(), _weight(row[4], line, source)))
    return [RelatedTopicTable(seed, d, tuple(e)) for (seed, d), e in groups.items()]


# -- seed-term expansion ----------------------------------------------------

@dataclass(frozen=True)
class TermGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]


def _ranked_top(tables: Sequence[RelatedQueryTable]) -> list[tuple[str, float]]:
    """Top-kind entries for one seed, best first.

    The range aggregate is used when present. Otherwise daily tables are
    merged by averaging each query's weight over the days supplied.
    """
    aggregate = [t for t in tables if t.date is None]
    if aggregate:
        merged = {}
        for t in aggregate:
            for q, w in t.top():
                merged[q] = max(w, merged.get(q, w))
    else:
        sums: dict[str, float] = defaultdict(float)
        for t in tables:
            for q, w in t.top():
                sums[q] += w
        merged = {q: s / len(tables) for q, s in sums.items()}
    return sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))


def expand_terms(seeds: Sequence[str], tables: Sequence[RelatedQueryTable],
                 k: int = 5, depth: int = 1) -> TermGraph:
    """Breadth-first expansion of seed terms through their top related queries.

    Each expanded term contributes its ``k`` highest-weighted top queries.
    Queries already in the graph are not re-added, but their edge is kept.
    """
    if k < 1:
        raise ArgumentError("k must be >= 1")
    if depth < 1:
        raise ArgumentError("depth must be >= 1")
    by_seed: dict[str, list] = defaultdict(list)
    for t in tables:
        by_seed[t.seed_term].append(t)
    missing = [s for s in seeds if s not in by_seed]
    if missing:
        raise ArgumentError(f"no related-query table for seed(s): {', '.join(missing)}")

    nodes = list(dict.fromkeys(seeds))
    known = set(nodes)
    edges = []
    frontier = list(nodes)
    for level in range(depth):
        if level > 0:
            frontier = [t for t in frontier if t in by_seed]
        added = []
        for term in frontier:
            for query, weight in _ranked_top(by_seed[term])[:k]:
                if query == term:
                    continue
                edges.append((term, query, weight))
                if query not in known:
                    known.add(query)
                    nodes.append(query)
                    added.append(query)
        frontier = added
    return TermGraph(tuple(nodes), tuple(edges))
