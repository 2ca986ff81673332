"""Regenerate the bundled example data under src/trendcast/data/.

The data are synthetic. The trend series are integer-valued (as Google
exports them) and tuned so their Pearson correlation with the case series
matches a target table to four decimals. Run from the repository root:

    python scripts/make_fixtures.py
"""
from __future__ import annotations

import csv
import datetime as dt
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "src" / "trendcast" / "data"
START = dt.date(2020, 1, 20)
N_DAYS = 64  # 2020-01-20 .. 2020-03-23
DATES = [START + dt.timedelta(days=i) for i in range(N_DAYS)]
SEED = 20200323

TARGET_R = {
    "cases of covid19": 0.8633,
    "corona": 0.7789,
    "coronavirus": 0.7408,
    "coronavirus cases": 0.8196,
    "coronavirus covid19": 0.8174,
    "coronavirus news": 0.7750,
    "coronavirus symptoms": 0.6664,
    "coronavirus update": 0.7796,
    "covid": 0.8650,
    "covid 19": 0.8627,
    "covid 19 cases": 0.8687,
    "covid19": 0.8506,
    "covid19 cases": 0.8584,
}
# terms carrying the "covid" name show no interest before 2020-01-24
LATE_START = {t: 4 for t in TARGET_R if "covid" in t and t != "covid"}
LATE_START["covid"] = 2


def worldwide_cases(rng) -> np.ndarray:
    t = np.arange(N_DAYS, dtype=float)
    china = 2600 * np.exp(-0.5 * ((t - 16) / 6.5) ** 2)  # early-February wave
    spike = np.where(t == 24, 12500.0, 0.0)  # one-day reclassification jump
    spike += np.where(t == 25, 2500.0, 0.0)
    tail = 500 * np.exp(-0.5 * ((t - 30) / 10.0) ** 2)
    world = 150 * np.exp(0.138 * np.clip(t - 33, 0, None)) * (t > 33)
    base = 80 + 400 * (t / 10.0) * (t < 10)
    y = china + spike + tail + world + base
    y *= np.exp(rng.normal(0, 0.08, N_DAYS))
    return np.round(y).astype(int)


def pearson(x, y):
    dx = x - x.mean()
    dy = y - y.mean()
    return float(dx @ dy / np.sqrt((dx @ dx) * (dy @ dy)))


def tuned_trend(y, target, rng, frozen):
    """Integer series in [0, 100] with corr(x, y) within 2e-5 of target."""
    n = len(y)
    ys = (y - y.mean()) / y.std()
    # smooth term-specific profile, made orthogonal to the target
    walk = np.cumsum(rng.normal(0, 1, n))
    walk = np.convolve(walk, np.ones(5) / 5, mode="same")
    e = walk - walk.mean()
    e -= (e @ ys) / (ys @ ys) * ys
    e /= e.std()
    x = target * ys + np.sqrt(1 - target ** 2) * e
    free = np.arange(frozen, n)
    x[free] = 100 * (x[free] - x[free].min()) / (x[free].max() - x[free].min())
    x[:frozen] = 0
    x = np.round(x)
    for _ in range(5000):
        r = pearson(x, y)
        if abs(r - target) < 2e-5:
            return x.astype(int)
        best = None
        for i in free:
            for step in (-1.0, 1.0):
                v = x[i] + step
                if not 0 <= v <= 100:
                    continue
                x[i] = v
                gap = abs(pearson(x, y) - target)
                x[i] = v - step
                if best is None or gap < best[0]:
                    best = (gap, i, step)
        x[best[1]] += best[2]
    raise RuntimeError(f"could not tune series to r={target}")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def related_queries(rng):
    rows = []
    aggregate = {
        "coronavirus": [("coronavirus cases", 100), ("coronavirus update", 88),
                        ("coronavirus symptoms", 75), ("coronavirus news", 70), ("corona", 62),
                        ("coronavirus uk", 41), ("china coronavirus", 35), ("coronavirus usa", 30)],
        "covid19": [("covid19 cases", 100), ("covid", 76), ("covid 19", 70),
                    ("coronavirus covid19", 55), ("coronavirus", 48), ("covid19 virus", 30),
                    ("covid19 usa", 22)],
        "covid19 cases": [("cases of covid19", 100), ("covid 19 cases", 85), ("covid19", 80),
                          ("coronavirus cases", 60), ("covid", 45), ("covid19 cases usa", 20)],
        "corona": [("corona virus", 100), ("coronavirus", 92), ("corona news", 30)],
        "coronavirus cases": [("coronavirus", 100), ("coronavirus cases uk", 52)],
        "coronavirus update": [("coronavirus", 100), ("coronavirus update uk", 44)],
        "coronavirus symptoms": [("coronavirus", 100), ("virus symptoms", 61)],
        "coronavirus news": [("coronavirus", 100), ("virus news", 38)],
        "covid": [("covid 19", 100), ("covid19", 80), ("covid virus", 33)],
        "covid 19": [("covid", 100), ("covid 19 cases", 70)],
        "coronavirus covid19": [("covid19", 100), ("coronavirus", 90)],
        "cases of covid19": [("covid19 cases", 100), ("covid19", 70)],
        "covid 19 cases": [("covid 19", 100), ("covid19 cases", 66)],
    }
    rising = {
        "coronavirus": [("coronavirus stimulus", 5000), ("coronavirus lockdown", 3250)],
        "covid19": [("covid19 testing", 4100), ("covid19 stimulus check", 2800)],
        "covid19 cases": [("covid19 cases by state", 3700)],
    }
    for seed, entries in aggregate.items():
        for q, w in entries:
            rows.append([seed, "", "top", q, w])
        for q, w in rising.get(seed, []):
            rows.append([seed, "", "rising", q, w])

    pools = {
        "coronavirus": ["coronavirus cases", "coronavirus uk", "coronavirus symptoms",
                        "coronavirus news", "coronavirus update", "corona virus",
                        "coronavirus cases uk", "virus symptoms", "china virus",
                        "corona virus cases", "virus news", "virus update", "wuhan virus",
                        "virus outbreak", "new virus", "coronavirus usa"],
        "covid19": ["covid19 cases", "covid19 virus", "coronavirus covid19", "covid 19",
                    "virus covid19", "covid19 symptoms", "corona virus covid19",
                    "virus news today", "virus usa", "virus cases", "covid 19 virus"],
        "covid19 cases": ["cases of covid19", "covid 19 cases", "covid19 cases usa",
                          "covid19 cases virus", "cases of covid 19", "covid19 cases world",
                          "virus cases", "number of virus cases", "virus cases uk"],
    }
    rising_pool = ["virus lockdown", "virus stimulus", "virus testing near me",
                   "school closures", "virus map", "toilet paper"]
    first_day = {"coronavirus": 0, "covid19": 4, "covid19 cases": 4}
    for seed, pool in pools.items():
        base = np.linspace(100, 20, len(pool))
        for i, d in enumerate(DATES):
            if i < first_day[seed]:
                continue
            w = base * np.exp(rng.normal(0, 0.35, len(pool)))
            order = np.argsort(-w, kind="stable")[:8]
            top = w[order]
            top = np.round(100 * top / top[0]).astype(int)
            for j, wj in zip(order, top):
                rows.append([seed, d.isoformat(), "top", pool[j], int(wj)])
            for q in rng.choice(rising_pool, size=2, replace=False):
                rows.append([seed, d.isoformat(), "rising", q, int(rng.integers(110, 5000))])
    return rows


TOPICS = [
    # (title, category, first day index, last day index, base weight)
    ("Coronavirus", "Virus", 0, 63, 100),
    ("Severe acute respiratory syndrome coronavirus 2", "Virus", 0, 63, 70),
    ("Middle East respiratory syndrome-related coronavirus", "Virus", 0, 40, 30),
    ("Virus", "Infectious agent", 20, 60, 55),
    ("Pathogen", "Infectious agent", 26, 58, 25),
    ("Coronavirus disease 2019", "Disease", 38, 53, 45),
    ("Pneumonia", "Disease", 10, 40, 20),
    ("United States", "Country in North America", 40, 63, 40),
    ("Canada", "Country in North America", 45, 63, 20),
    ("China", "Country in East Asia", 4, 63, 35),
    ("South Korea", "Country in Asia", 22, 63, 22),
    ("Wuhan", "City in China", 0, 45, 40),
    ("Shanghai", "City in China", 5, 30, 15),
    ("Italy", "Country in Europe", 34, 63, 30),
    ("California", "US State", 36, 50, 15),
    ("Washington", "US State", 40, 50, 18),
    ("New York", "US State", 41, 63, 20),
    ("Australia", "Country in Oceania", 12, 40, 10),
    ("Corona", "Beer", 38, 50, 12),
    ("Case", "Topic", 28, 63, 30),
    ("Symptom", "Topic", 30, 63, 25),
    ("World Health Organization", "Organization", 10, 63, 20),
    ("Hubei", "Province of China", 2, 40, 25),
    ("Diamond Princess", "Cruise ship", 16, 35, 15),
]


def related_topics(rng):
    rows = []
    for seed in ("coronavirus", "covid19", "covid19 cases"):
        start = 0 if seed == "coronavirus" else 4
        for i, d in enumerate(DATES):
            if i < start:
                continue
            live = [t for t in TOPICS if t[2] <= i <= t[3]]
            w = np.array([t[4] for t in live]) * np.exp(rng.normal(0, 0.3, len(live)))
            order = np.argsort(-w, kind="stable")[:10]
            top = np.round(100 * w[order] / w[order[0]]).astype(int)
            for j, wj in zip(order, top):
                rows.append([seed, d.isoformat(), live[j][0], live[j][1], int(wj)])
    return rows


RECORD_BASE_URL = "https://trends.example.test/api"


def recorded_fetch(series):
    """A saved response for a 'covid19' request, replayed by the fetch tests."""
    import json
    import sys
    sys.path.insert(0, str(OUT.parents[1]))
    from trendcast.fetch import RecordedTransport, TrendsFetcher

    fetcher = TrendsFetcher(base_url=RECORD_BASE_URL)
    url = fetcher.url(["covid19"], DATES[0], DATES[-1], "")
    timeline = [{"time": str(int(dt.datetime(d.year, d.month, d.day, tzinfo=dt.timezone.utc).timestamp())),
                 "formattedTime": d.strftime("%b %-d, %Y"), "value": [int(v)]}
                for d, v in zip(DATES, series)]
    body = ")]}',\n" + json.dumps({"default": {"timelineData": timeline}})
    RecordedTransport(Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "recorded",
                      mode="record").save(url, 200, body)


def main():
    rng = np.random.default_rng(SEED)
    OUT.mkdir(parents=True, exist_ok=True)
    cases = worldwide_cases(rng)
    write_csv(OUT / "worldwide_cases.csv", ["date", "region", "new_cases"],
              [[d.isoformat(), "world", int(c)] for d, c in zip(DATES, cases)])

    series = {}
    y = cases.astype(float)
    for term, target in TARGET_R.items():
        series[term] = tuned_trend(y, target, rng, LATE_START.get(term, 0))
        print(f"{term:22s} target {target:.4f} got {pearson(series[term].astype(float), y):.6f}")
    write_csv(OUT / "worldwide_trends.csv", ["date", "term", "geo", "value"],
              [[d.isoformat(), term, "", int(v)] for term, vals in series.items()
               for d, v in zip(DATES, vals)])

    # the same values as Google's multiTimeline exports (at most five terms per file)
    terms = list(series)
    for k in range(0, len(terms), 5):
        chunk = terms[k:k + 5]
        with open(OUT / f"multiTimeline_{k // 5 + 1}.csv", "w", newline="") as fh:
            fh.write("Category: All categories\n\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["Day"] + [f"{t}: (Worldwide)" for t in chunk])
            for i, d in enumerate(DATES):
                w.writerow([d.isoformat()] + [int(series[t][i]) for t in chunk])

    recorded_fetch(series["covid19"])

    write_csv(OUT / "related_queries.csv", ["seed", "date", "kind", "query", "weight"],
              related_queries(rng))
    write_csv(OUT / "related_topics.csv", ["seed", "date", "topic", "category", "weight"],
              related_topics(rng))


if __name__ == "__main__":
    main()
