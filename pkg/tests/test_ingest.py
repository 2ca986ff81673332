import datetime as dt
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from trendcast.core import CaseSeries, TrendSeries
from trendcast.errors import ArgumentError, ParseError
from trendcast.ingest import (DataWarning, RelatedQueryTable, expand_terms, format_cases_csv,
                              format_trends_long, parse_cases_csv, parse_related_queries_csv,
                              parse_related_topics_csv, parse_trends_csv)

SEEDS = ["coronavirus", "covid19", "covid19 cases"]
TABLE_TERMS = {
    "cases of covid19", "corona", "coronavirus", "coronavirus cases", "coronavirus covid19",
    "coronavirus news", "coronavirus symptoms", "coronavirus update", "covid", "covid 19",
    "covid 19 cases", "covid19", "covid19 cases",
}


def test_multitimeline_single_term():
    text = ("Category: All categories\n\nDay,covid19: (Worldwide)\n"
            "2020-01-20,0\n2020-01-21,3\n2020-01-22,7\n")
    (s,) = parse_trends_csv(text.encode())
    assert (s.term, s.geo) == ("covid19", "")
    assert s.values.tolist() == [0, 3, 7]


def test_multitimeline_without_preamble_and_country_geo():
    text = "Day,corona: (Italy),virus: (Italy)\n2020-02-01,10,20\n2020-02-02,<1,30\n"
    a, b = parse_trends_csv(text)
    assert (a.term, a.geo, b.term) == ("corona", "IT", "virus")
    assert a.values.tolist() == [10, 0.5]


def test_less_than_one_round_trips_as_midpoint():
    (s,) = parse_trends_csv("Day,x: (Worldwide)\n2020-01-01,<1\n")
    assert s.values.tolist() == [0.5]
    (back,) = parse_trends_csv(format_trends_long([s]))
    assert back == s


def test_long_format_two_terms():
    text = "date,term,geo,value\n2020-01-01,a,,1\n2020-01-02,a,,2\n2020-01-01,b,,3\n2020-01-02,b,,4\n"
    out = parse_trends_csv(text)
    assert [(s.term, len(s.points)) for s in out] == [("a", 2), ("b", 2)]


@pytest.mark.parametrize("row,line_no", [
    ("2020-13-01,5", 3), ("2020-01-01,abc", 3), ("2020-01-01,5\n2020-01-01,6", 4)])
def test_trend_parse_errors_carry_line_numbers(row, line_no):
    text = "Day,x: (Worldwide)\n2019-12-31,1\n" + row + "\n"
    with pytest.raises(ParseError) as exc:
        parse_trends_csv(text, source="t.csv")
    assert exc.value.line == line_no
    assert str(exc.value).startswith(f"t.csv:{line_no}:")


def test_out_of_range_value_clamped_with_warning():
    with pytest.warns(DataWarning):
        (s,) = parse_trends_csv("Day,x: (Worldwide)\n2020-01-01,120\n")
    assert s.values.tolist() == [100]


def test_cumulative_cases_are_differenced():
    text = "date,region,total_cases\n2020-01-01,w,100\n2020-01-02,w,150\n2020-01-03,w,150\n"
    (s,) = parse_cases_csv(text, cumulative=True)
    assert s.values.tolist() == [50, 0]
    assert s.dates[0] == dt.date(2020, 1, 2)


def test_negative_cumulative_diff_clamp_or_reject():
    text = "date,region,total_cases\n2020-01-01,w,10\n2020-01-02,w,8\n2020-01-03,w,12\n"
    with pytest.warns(DataWarning):
        (s,) = parse_cases_csv(text, cumulative=True)
    assert s.values.tolist() == [0, 4]
    with pytest.raises(ParseError):
        parse_cases_csv(text, cumulative=True, on_negative="reject")


def test_negative_new_cases_rejected():
    with pytest.raises(ParseError) as exc:
        parse_cases_csv("date,region,new_cases\n2020-01-01,w,5\n2020-01-02,w,-1\n")
    assert exc.value.line == 3


def test_interleaved_regions_are_separated_and_sorted():
    text = ("date,region,new_cases\n2020-01-02,FR,2\n2020-01-01,IT,5\n"
            "2020-01-01,FR,1\n2020-01-02,IT,6\n")
    out = {s.region: s for s in parse_cases_csv(text)}
    assert out["FR"].values.tolist() == [1, 2]
    assert out["IT"].values.tolist() == [5, 6]


def test_bundled_cases_fixture(data_dir):
    (s,) = parse_cases_csv((data_dir / "worldwide_cases.csv").read_bytes())
    assert len(s.points) == 64
    assert s.dates[0] == dt.date(2020, 1, 20) and s.dates[-1] == dt.date(2020, 3, 23)


def test_multitimeline_exports_match_long_fixture(data_dir):
    long = {s.term: s for s in parse_trends_csv((data_dir / "worldwide_trends.csv").read_bytes())}
    wide = {}
    for p in sorted(data_dir.glob("multiTimeline_*.csv")):
        wide.update({s.term: s for s in parse_trends_csv(p.read_bytes())})
    assert wide == long


values = st.lists(st.integers(0, 200).map(lambda v: v / 2), min_size=1, max_size=30)


@given(values, st.sampled_from(["", "US", "FR"]), st.text("abc xyz", min_size=1, max_size=8).filter(str.strip))
def test_trend_round_trip(vals, geo, term):
    term = term.strip()
    start = dt.date(2020, 1, 1)
    s = TrendSeries(term, geo, tuple((start + dt.timedelta(days=i), v) for i, v in enumerate(vals)))
    (back,) = parse_trends_csv(format_trends_long([s]))
    assert back == s


@given(st.lists(st.integers(0, 10**6), min_size=2, max_size=40))
def test_difference_then_cumsum_recovers_totals(increments):
    totals = np.cumsum(increments)
    start = dt.date(2020, 1, 1)
    text = "date,region,total_cases\n" + "".join(
        f"{start + dt.timedelta(days=i)},w,{t}\n" for i, t in enumerate(totals))
    (s,) = parse_cases_csv(text, cumulative=True)
    np.testing.assert_array_equal(totals[0] + np.cumsum(s.values), totals[1:])


def test_cases_round_trip():
    s = CaseSeries("w", ((dt.date(2020, 1, 1), 3), (dt.date(2020, 1, 2), 0)))
    assert parse_cases_csv(format_cases_csv([s])) == [s]


def _table(seed, entries):
    return RelatedQueryTable(seed, None, tuple((q, w, "top") for q, w in entries))


def test_expand_single_seed():
    g = expand_terms(["A"], [_table("A", [("B", 90), ("C", 80)])], k=2)
    assert set(g.nodes) == {"A", "B", "C"}
    assert set(g.edges) == {("A", "B", 90), ("A", "C", 80)}


def test_expand_skips_known_terms_but_keeps_edges():
    tables = [_table("A", [("B", 70), ("C", 60)]), _table("B", [("D", 50)])]
    g = expand_terms(["A", "B"], tables, k=2)
    assert g.nodes.count("B") == 1
    assert ("A", "B", 70) in g.edges


def test_expand_missing_seed_is_an_error():
    with pytest.raises(ArgumentError, match="Z"):
        expand_terms(["A", "Z"], [_table("A", [("B", 1)])])


def test_expand_uses_only_top_entries():
    t = RelatedQueryTable("A", None, (("B", 50, "top"), ("R", 5000, "rising")))
    assert set(expand_terms(["A"], [t], k=5).nodes) == {"A", "B"}


def test_fixture_expansion_yields_table_terms(data_dir):
    tables = parse_related_queries_csv((data_dir / "related_queries.csv").read_bytes())
    g = expand_terms(SEEDS, tables, k=5)
    assert len(g.nodes) <= 3 + 15
    assert set(g.nodes) == TABLE_TERMS


@given(st.permutations(SEEDS))
def test_expansion_node_set_independent_of_seed_order(order):
    from conftest import DATA

    tables = parse_related_queries_csv((DATA / "related_queries.csv").read_bytes())
    assert set(expand_terms(list(order), tables, k=5).nodes) == TABLE_TERMS


def test_related_parsers(data_dir):
    q = parse_related_queries_csv("seed,date,kind,query,weight\ns,,top,a b,100\ns,,rising,c,Breakout\n")
    assert q[0].date is None and q[0].entries[1][1] == 5000
    t = parse_related_topics_csv((data_dir / "related_topics.csv").read_bytes())
    assert all(tbl.date is not None for tbl in t)
    with pytest.raises(ParseError):
        parse_related_topics_csv("seed,date,topic,category,weight\ns,2020-01-01,Virus,,3\n")
    with pytest.raises(ParseError):
        parse_related_queries_csv("seed,date,kind,query,weight\ns,,top,a,100\ns,,top,a,90\n")
