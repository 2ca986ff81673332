"""Command-line interface: ingest, correlate, train, evaluate, analyze, plot, fetch.

Exit codes: 0 success, 1 other toolkit error, 2 bad arguments, 3 unreadable
input, 4 model failure, 5 protocol mismatch, 6 file-system error, 7 fetch
failure.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import shlex
import sys
import warnings
from pathlib import Path

import numpy as np

from . import analysis, ingest, plots
from .core import CaseSeries, TrendSeries, align, parse_date
from .correlate import DEFAULT_THRESHOLD, lead, screen
from .errors import ArgumentError, ParseError, StorageError, TrendcastError
from .evaluate import MODEL_LABELS, compare, report
from .neuralnet import DEFAULT_STACK, NetworkConfig, TrainConfig
from .pipeline import LAG_FEATURE, MODELS, SPLIT_RATIO, build_dataset, run

WORLD = "world"


# -- file helpers -------------------------------------------------------------

def _read(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc.strerror}") from None


def _write(path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc.strerror}") from None


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out:
        _write(out, text)
    else:
        sys.stdout.write(text)


def load_trends(paths) -> list[TrendSeries]:
    series = []
    for p in paths:
        series.extend(ingest.parse_trends_csv(_read(p), source=str(p)))
    seen = set()
    for s in series:
        if (s.term, s.geo) in seen:
            raise ArgumentError(f"term {s.term!r} (geo {s.geo!r}) appears in more than one input")
        seen.add((s.term, s.geo))
    return series


def load_cases(path, cumulative=False, on_negative="clamp") -> list[CaseSeries]:
    return ingest.parse_cases_csv(_read(path), cumulative=cumulative, on_negative=on_negative,
                                  source=str(path))


def _data_paths(args):
    trends = args.trends or ([Path(args.data) / "trends.csv"] if args.data else None)
    cases = args.cases or (Path(args.data) / "cases.csv" if args.data else None)
    if not trends or not cases:
        raise ArgumentError("give --data DIR or both --trends and --cases")
    return trends, cases


def _pick_region(all_cases, region):
    if region is None:
        if len(all_cases) != 1:
            names = ", ".join(c.region for c in all_cases)
            raise ArgumentError(f"cases cover several regions ({names}); choose one with --region")
        return all_cases[0]
    for c in all_cases:
        if c.region == region:
            return c
    raise ArgumentError(f"no cases for region {region!r}")


def _pick_geo(trends, region: str, geo):
    geos = sorted({s.geo for s in trends})
    if geo is None:
        if len(geos) == 1:
            geo = geos[0]
        else:
            geo = "" if region == WORLD else region
    picked = [s for s in trends if s.geo == geo]
    if not picked:
        raise ArgumentError(f"no trend series for geo {geo!r}; available: {geos}")
    return picked


def load_region(args):
    """Trend series and case series for the region selected on the command line."""
    trend_paths, case_path = _data_paths(args)
    cases = _pick_region(load_cases(case_path), args.region)
    trends = _pick_geo(load_trends(trend_paths), cases.region, args.geo)
    return trends, cases


# -- commands ---------------------------------------------------------------------

def cmd_ingest(args) -> int:
    trends = load_trends(args.trends)
    cases = load_cases(args.cases, args.cumulative, args.on_negative)
    out = Path(args.out)
    trends_text = ingest.format_trends_long(trends)
    cases_text = ingest.format_cases_csv(cases)
    _write(out / "trends.csv", trends_text)
    _write(out / "cases.csv", cases_text)
    dates = [d for s in trends for d in s.dates] + [d for c in cases for d in c.dates]
    manifest = {
        "inputs": [{"name": Path(p).name, "sha256": _sha256(_read(p))}
                   for p in list(args.trends) + [args.cases]],
        "files": {"trends.csv": _sha256(trends_text.encode()),
                  "cases.csv": _sha256(cases_text.encode())},
        "date_range": [min(dates).isoformat(), max(dates).isoformat()],
        "terms": sorted({s.term for s in trends}),
        "geos": sorted({s.geo for s in trends}),
        "regions": sorted({c.region for c in cases}),
    }
    _write(out / "manifest.json", _dump(manifest))
    print(f"ingested {len(trends)} trend series and {len(cases)} case series into {out}")
    return 0


def cmd_correlate(args) -> int:
    trends, cases = load_region(args)
    if args.lag < 0:
        raise ArgumentError("--lag must be >= 0")
    features = [lead(s, args.lag) for s in trends] if args.lag else trends
    ds = align(features, cases)
    rep = screen(ds, args.threshold, args.absolute)
    _emit(rep.to_csv(), args.out)
    print(f"{len(rep.kept)} kept, {len(rep.dropped)} dropped at threshold {args.threshold} (n={ds.n})",
          file=sys.stderr if not args.out else sys.stdout)
    for term in rep.dropped:
        print(f"  dropped: {term}", file=sys.stderr if not args.out else sys.stdout)
    return 0


def _train_configs(args, window):
    net_cfg = NetworkConfig(layers=DEFAULT_STACK, dropout_rate=args.dropout, window=window)
    train_cfg = TrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                            seed=args.seed, weight_decay=args.weight_decay)
    return net_cfg, train_cfg


def cmd_train(args) -> int:
    trends, cases = load_region(args)
    ds = build_dataset(trends, cases)
    screened = None
    if args.use_trends and args.threshold is not None:
        rep = screen(ds.columns([c for c in ds.feature_names if c != LAG_FEATURE]), args.threshold)
        if not rep.kept:
            raise ArgumentError(f"no trend term clears threshold {args.threshold}")
        ds = ds.columns(rep.kept + [LAG_FEATURE])
        screened = rep.dropped
    net_cfg, train_cfg = _train_configs(args, args.window)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = run(ds, args.model, uses_trends=args.use_trends, seed=args.seed, window=args.window,
                  ratio=args.ratio, with_lag=not args.trends_only, net_cfg=net_cfg,
                  train_cfg=train_cfg, clamp=args.clamp)
    m = res.metrics()
    out = Path(args.out)
    _write(out / "fit.json", res.fit.to_json())
    _write(out / "predictions.csv", res.predictions_csv())
    log = io.StringIO()
    w = csv.writer(log, lineterminator="\n")
    if args.model == "dnn":
        w.writerow(["epoch", "train_mse"])
        w.writerows((i + 1, repr(float(v))) for i, v in enumerate(res.history))
    else:
        w.writerow(["key", "value"])
        if args.model == "nb2":
            fit = res.fit
            w.writerows([("iterations", fit.iterations), ("converged", str(fit.converged).lower()),
                         ("initial_log_likelihood", repr(fit.initial_log_likelihood)),
                         ("log_likelihood", repr(fit.log_likelihood)), ("alpha", repr(fit.alpha))])
        else:
            w.writerow(("sigma2", repr(res.fit.sigma2)))
    for warn in caught:
        w.writerow(("warning", str(warn.message)))
    _write(out / "train_log.csv", log.getvalue())
    meta = {
        "model": args.model,
        "uses_trends": args.use_trends,
        "trends_only": bool(args.trends_only),
        "region": res.region,
        "seed": args.seed,
        "window": args.window,
        "ratio": args.ratio,
        "features": list(res.features),
        "screened_out": screened,
        "split_key": res.split.key,
        "n_train": len(res.split.train_rows),
        "n_test": len(res.split.test_rows),
        "metrics": {"rmse": m.rmse, "mae": m.mae, "mape": m.mape, "r2_abs": m.r2_abs, "r2": m.r2},
    }
    _write(out / "run.json", _dump(meta))
    print(f"{m.label} [{res.region}]: RMSE {m.rmse:.6g}  MAE {m.mae:.6g}  MAPE {m.mape:.6g}")
    return 0


def _read_predictions(path):
    text = _read(path).decode("utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["date", "actual", "predicted"]:
        raise ParseError("expected header 'date,actual,predicted'", 1, str(path))
    dates, actual, pred = [], [], []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            dates.append(parse_date(row[0]))
            actual.append(float(row[1]))
            pred.append(float(row[2]))
        except (ValueError, IndexError):
            raise ParseError(f"bad prediction row {row!r}", i, str(path)) from None
    return dates, np.array(actual), np.array(pred)


def _run_dirs(manifest_path):
    base = Path(manifest_path).parent
    data = json.loads(_read(manifest_path).decode("utf-8"))
    entries = data["runs"] if isinstance(data, dict) else data
    if not isinstance(entries, list) or not entries:
        raise ArgumentError(f"{manifest_path}: expected a nonempty list of run directories")
    return [base / e for e in entries]


def cmd_evaluate(args) -> int:
    reports = []
    for d in _run_dirs(args.runs):
        meta = json.loads(_read(d / "run.json").decode("utf-8"))
        _, actual, pred = _read_predictions(d / "predictions.csv")
        reports.append(report(meta["model"], meta["region"], meta["uses_trends"], actual, pred,
                              meta["split_key"]))
    comp = compare(reports)
    text = comp.to_csv() if args.format == "csv" else comp.to_text()
    _emit(text, args.out)
    if args.improvements:
        _write(args.improvements, comp.improvements_csv())
    return 0


def cmd_analyze(args) -> int:
    if args.what == "daily-change":
        series = [s for s in load_trends(args.trends) if s.term == args.term]
        if args.geo is not None:
            series = [s for s in series if s.geo == args.geo]
        if len(series) != 1:
            raise ArgumentError(f"expected one series for term {args.term!r}, found {len(series)}")
        text = analysis.daily_change_csv(analysis.daily_change(series[0]))
    elif args.what == "wordcloud":
        tables = ingest.parse_related_queries_csv(_read(args.queries), source=args.queries)
        text = analysis.term_frequencies_csv(analysis.term_frequencies(tables, args.drop_stop_words))
    elif args.what == "cooccur":
        tables = [t for t in ingest.parse_related_queries_csv(_read(args.queries), source=args.queries)
                  if t.seed_term == args.seed_term]
        if not tables:
            raise ArgumentError(f"no related-query tables for seed {args.seed_term!r}")
        text = analysis.cooccurrence(tables, args.drop_stop_words).to_csv()
    else:
        tables = ingest.parse_related_topics_csv(_read(args.topics), source=args.topics)
        text = analysis.category_heatmap(tables, args.top_k).to_csv()
    _emit(text, args.out)
    return 0


def _read_comparison(path):
    text = _read(path).decode("utf-8")
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or not {"region", "model", "uses_trends", "rmse"} <= set(rows[0]):
        raise ParseError("expected a comparison table with region, model, uses_trends, rmse", 1, str(path))
    return rows


def cmd_plot(args) -> int:
    if args.kind == "actual-vs-pred":
        dates, actual, pred = _read_predictions(args.input)
        if not dates:
            raise ArgumentError(f"{args.input} has no predictions")
        origin = parse_date(args.origin)
        svg = plots.actual_vs_predicted_svg(plots.days_since(dates, origin), actual, pred,
                                            title=args.title or "Actual versus prediction", origin=origin)
    else:
        rows = [r for r in _read_comparison(args.input) if r["model"] == args.model]
        if not rows:
            raise ArgumentError(f"no rows for model {args.model!r} in {args.input}")
        regions = list(dict.fromkeys(r["region"] for r in rows))
        label = MODEL_LABELS.get(args.model, args.model)
        variants = [label, f"{label} + GT"]
        table = []
        for region in regions:
            cells = {r["uses_trends"]: float(r["rmse"]) for r in rows if r["region"] == region}
            if set(cells) != {"false", "true"}:
                raise ArgumentError(f"region {region!r} needs runs with and without trends")
            table.append([cells["false"], cells["true"]])
        svg = plots.grouped_bars_svg(regions, variants, table, title=args.title or "RMSE by region")
    _write(args.out, svg)
    return 0


def cmd_fetch(args) -> int:
    from .fetch import RecordedTransport, TrendsFetcher, fetch_trends

    transport = None
    if args.replay:
        transport = RecordedTransport(args.replay, mode="replay")
    elif args.record:
        transport = RecordedTransport(args.record, mode="record")
    fetcher = TrendsFetcher(base_url=args.base_url, transport=transport)
    series = fetch_trends(args.terms, parse_date(args.start), parse_date(args.end), args.geo,
                          out=args.out, fetcher=fetcher)
    print(f"fetched {len(series)} series into {args.out}")
    return 0


# -- parser ---------------------------------------------------------------------

def _data_flags(p, region=True):
    p.add_argument("--data", help="directory written by 'ingest' (trends.csv, cases.csv)")
    p.add_argument("--trends", nargs="+", help="trend CSV file(s)")
    p.add_argument("--cases", help="case CSV file")
    if region:
        p.add_argument("--region", help="case region to model (needed when several are present)")
        p.add_argument("--geo", help="trend geo code; defaults to the one matching the region")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trendcast",
                                     description="Forecast daily case counts from search-interest series.")
    parser.add_argument("--config", help="INI file whose keys mirror the command-line flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse raw exports into canonical CSVs and a manifest")
    p.add_argument("--trends", nargs="+", required=True)
    p.add_argument("--cases", required=True)
    p.add_argument("--cumulative", action="store_true", help="cases file holds running totals")
    p.add_argument("--on-negative", choices=("clamp", "reject"), default="clamp")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("correlate", help="screen trend terms by correlation with cases")
    _data_flags(p)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--lag", type=int, default=0, help="days by which trends lead cases")
    p.add_argument("--absolute", action="store_true", help="screen on |r| instead of r")
    p.add_argument("--out")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("train", help="fit one model and score it on the held-out days")
    _data_flags(p)
    p.add_argument("--model", choices=MODELS, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--use-trends", dest="use_trends", action="store_true", default=True)
    g.add_argument("--no-trends", dest="use_trends", action="store_false")
    p.add_argument("--trends-only", action="store_true",
                   help="with trends, leave out the previous-day case count")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="keep trend terms whose correlation exceeds this")
    p.add_argument("--no-screen", dest="threshold", action="store_const", const=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=28)
    p.add_argument("--ratio", type=float, default=SPLIT_RATIO)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--dropout", type=float, default=0.05)
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--clamp", action="store_true", help="clip negative forecasts to zero")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="compare runs listed in a manifest")
    p.add_argument("--runs", required=True, help="JSON list of run directories")
    p.add_argument("--format", choices=("csv", "text"), default="csv")
    p.add_argument("--out")
    p.add_argument("--improvements", help="also write per-model RMSE improvements here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("analyze", help="exploratory summaries")
    asub = p.add_subparsers(dest="what", required=True)
    a = asub.add_parser("daily-change")
    a.add_argument("--trends", nargs="+", required=True)
    a.add_argument("--term", required=True)
    a.add_argument("--geo")
    a = asub.add_parser("wordcloud")
    a.add_argument("--queries", required=True)
    a.add_argument("--drop-stop-words", action="store_true")
    a = asub.add_parser("cooccur")
    a.add_argument("--queries", required=True)
    a.add_argument("--seed-term", required=True)
    a.add_argument("--drop-stop-words", action="store_true")
    a = asub.add_parser("heatmap")
    a.add_argument("--topics", required=True)
    a.add_argument("--top-k", type=int, default=20)
    for a in asub.choices.values():
        a.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("plot", help="render an SVG chart")
    p.add_argument("--kind", choices=("actual-vs-pred", "bars"), required=True)
    p.add_argument("--input", required=True, help="predictions.csv or a comparison CSV")
    p.add_argument("--model", choices=MODELS, default="dnn", help="model shown in a bar chart")
    p.add_argument("--origin", default="2020-01-20", help="day zero of the x axis")
    p.add_argument("--title")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("fetch", help="download trend series over HTTP")
    p.add_argument("--terms", nargs="+", required=True)
    p.add_argument("--start", required=True)
    p.add_argument("--end", required=True)
    p.add_argument("--geo", default="")
    p.add_argument("--base-url")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--record", help="save responses in this directory")
    g.add_argument("--replay", help="answer from recordings in this directory; no network")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fetch)
    return parser


def _subparsers(parser):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices
    return {}


def _config_value(action, raw: str):
    if isinstance(action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
        flag = raw.strip().lower() in ("1", "yes", "true", "on")
        if raw.strip().lower() not in ("1", "yes", "true", "on", "0", "no", "false", "off"):
            raise ArgumentError(f"config key {action.dest}: expected a boolean, got {raw!r}")
        return flag if isinstance(action, argparse._StoreTrueAction) else not flag
    convert = action.type or str
    try:
        if action.nargs in ("+", "*"):
            return [convert(v) for v in shlex.split(raw)]
        value = convert(raw)
    except ValueError:
        raise ArgumentError(f"config key {action.dest}: bad value {raw!r}") from None
    if action.choices is not None and value not in action.choices:
        raise ArgumentError(f"config key {action.dest}: {value!r} not in {list(action.choices)}")
    return value


def apply_config(parser, path, command: str, what: str | None = None) -> None:
    """Use ``[command]`` (and ``[command.what]``) sections of an INI file as flag defaults.

    Keys are flag names without the leading dashes. Values given on the
    command line still win.
    """
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise StorageError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ParseError(f"bad config file: {exc}", source=str(path)) from None
    target = _subparsers(parser)[command]
    sections = [command]
    if what is not None:
        target = _subparsers(target)[what]
        sections.append(f"{command}.{what}")
    actions = {}
    for action in target._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                actions[opt[2:]] = action
    defaults = {}
    for section in sections:
        if not cp.has_section(section):
            continue
        for key, raw in cp.items(section):
            name = key.replace("_", "-")
            if name not in actions or name == "help":
                raise ArgumentError(f"config section [{section}]: unknown key {key!r}")
            action = actions[name]
            if isinstance(action, argparse._StoreConstAction) and not isinstance(
                    action, (argparse._StoreTrueAction, argparse._StoreFalseAction)):
                raise ArgumentError(f"config section [{section}]: {key!r} is a command-line switch only")
            defaults[action.dest] = _config_value(action, raw)
    target.set_defaults(**defaults)
    for action in target._actions:
        if action.dest in defaults:
            action.required = False


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    words = [w for w in rest if not w.startswith("-")]
    try:
        if known.config and words:
            what = words[1] if words[0] == "analyze" and len(words) > 1 else None
            if words[0] in _subparsers(parser) and (what is None or what in _subparsers(
                    _subparsers(parser)[words[0]])):
                apply_config(parser, known.config, words[0], what)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except TrendcastError as exc:
        print(f"trendcast: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"trendcast: error: {exc}", file=sys.stderr)
        return StorageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
