"""Exploratory summaries of trend and related-query data, as plot-ready CSV."""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .core import DateStamp, TrendSeries
from .errors import ArgumentError, InsufficientDataError
from .ingest import RelatedQueryTable, RelatedTopicTable

# Small English function-word list, used only when stop-word removal is asked for.
STOP_WORDS = frozenset(
    "a an and are as at be by for from how in is it of on or the to what when where who why with".split()
)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(v: float) -> str:
    return format(float(v), ".15g")


def daily_change(series: TrendSeries) -> list[tuple[DateStamp, float]]:
    """Day-over-day change in interest, dated by the later day."""
    if len(series.points) < 2:
        raise InsufficientDataError(f"{series.term!r} has {len(series.points)} point(s); need 2")
    values = series.values
    deltas = np.diff(values)
    return [(d, float(v)) for d, v in zip(series.dates[1:], deltas)]


def daily_change_csv(changes) -> str:
    return _csv(["date", "delta"], [(d.isoformat(), _num(v)) for d, v in changes])


def tokenize(query: str, drop_stop_words: bool = False) -> list[str]:
    tokens = query.lower().split()
    if drop_stop_words:
        tokens = [t for t in tokens if t not in STOP_WORDS]
    return tokens


def _queries(tables: Sequence[RelatedQueryTable]):
    for t in tables:
        for query, _, _ in t.entries:
            yield query


def term_frequencies(tables: Sequence[RelatedQueryTable],
                     drop_stop_words: bool = False) -> list[tuple[str, int]]:
    """Token counts over every related query, most frequent first."""
    if not tables:
        raise ArgumentError("no related-query tables given")
    counts = Counter()
    for query in _queries(tables):
        counts.update(tokenize(query, drop_stop_words))
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def term_frequencies_csv(freqs) -> str:
    return _csv(["token", "count"], freqs)


@dataclass(frozen=True)
class Cooccurrence:
    tokens: tuple[str, ...]
    counts: np.ndarray  # symmetric; diagonal holds token occurrence counts

    def count(self, a: str, b: str) -> int:
        i, j = self.tokens.index(a), self.tokens.index(b)
        return int(self.counts[i, j])

    def partners(self, token: str) -> list[tuple[str, int]]:
        """Other tokens ranked by how often they share a query with ``token``."""
        i = self.tokens.index(token)
        out = [(t, int(self.counts[i, j])) for j, t in enumerate(self.tokens)
               if j != i and self.counts[i, j] > 0]
        return sorted(out, key=lambda kv: (-kv[1], kv[0]))

    def to_csv(self) -> str:
        rows = []
        n = len(self.tokens)
        for i in range(n):
            for j in range(i, n):
                if self.counts[i, j]:
                    rows.append((self.tokens[i], self.tokens[j], int(self.counts[i, j])))
        return _csv(["token_a", "token_b", "count"], rows)


def cooccurrence(tables: Sequence[RelatedQueryTable], drop_stop_words: bool = False) -> Cooccurrence:
    """Pair counts of tokens appearing together in a related query.

    Each query adds one to every unordered pair of distinct tokens it
    contains. The diagonal counts every occurrence of a token, so it bounds
    its row.
    """
    seeds = {t.seed_term for t in tables}
    if len(seeds) > 1:
        raise ArgumentError(f"co-occurrence needs tables for one seed, got {sorted(seeds)}")
    queries = [tokenize(q, drop_stop_words) for q in _queries(tables)]
    tokens = tuple(sorted({t for q in queries for t in q}))
    index = {t: i for i, t in enumerate(tokens)}
    counts = np.zeros((len(tokens), len(tokens)), dtype=np.int64)
    for q in queries:
        for t in q:
            counts[index[t], index[t]] += 1
        for a, b in combinations(sorted(set(q)), 2):
            i, j = index[a], index[b]
            counts[i, j] += 1
            counts[j, i] += 1
    return Cooccurrence(tokens, counts)


@dataclass(frozen=True)
class CategoryGrid:
    dates: tuple[DateStamp, ...]
    categories: tuple[str, ...]  # by total count, largest first
    counts: np.ndarray  # dates x categories

    def totals(self) -> dict[str, int]:
        return {c: int(v) for c, v in zip(self.categories, self.counts.sum(axis=0))}

    def to_csv(self) -> str:
        rows = [(d.isoformat(), c, int(self.counts[i, j]))
                for i, d in enumerate(self.dates) for j, c in enumerate(self.categories)]
        return _csv(["date", "category", "count"], rows)


def category_heatmap(tables: Sequence[RelatedTopicTable], top_k: int = 20) -> CategoryGrid:
    """Topic counts per (date, category) for the ``top_k`` busiest categories."""
    if top_k < 1:
        raise ArgumentError("top_k must be >= 1")
    dated = [t for t in tables if t.date is not None]
    if not dated:
        raise InsufficientDataError("no dated topic tables; range aggregates have no time axis")
    per_day: dict = {}
    totals = Counter()
    for t in dated:
        day = per_day.setdefault(t.date, Counter())
        for _, category, _ in t.entries:
            day[category] += 1
            totals[category] += 1
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))[:top_k]
    categories = tuple(c for c, _ in ranked)
    dates = tuple(sorted(per_day))
    counts = np.array([[per_day[d][c] for c in categories] for d in dates], dtype=np.int64)
    return CategoryGrid(dates, categories, counts.reshape(len(dates), len(categories)))
