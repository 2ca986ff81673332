import json

import pytest

from trendcast.cli import main

EPOCHS = ["--epochs", "20"]


@pytest.fixture(scope="module")
def ingested(tmp_path_factory, data_dir):
    out = tmp_path_factory.mktemp("ingest")
    rc = main(["ingest", "--trends", str(data_dir / "worldwide_trends.csv"),
               "--cases", str(data_dir / "worldwide_cases.csv"), "--out", str(out)])
    assert rc == 0
    return out


def test_ingest_writes_manifest(ingested):
    man = json.loads((ingested / "manifest.json").read_text())
    assert len(man["terms"]) == 13
    assert man["date_range"] == ["2020-01-20", "2020-03-23"]
    assert man["regions"] == ["world"]
    assert {i["name"] for i in man["inputs"]} == {"worldwide_trends.csv", "worldwide_cases.csv"}


def test_ingest_is_idempotent(ingested, data_dir, tmp_path):
    main(["ingest", "--trends", str(data_dir / "worldwide_trends.csv"),
          "--cases", str(data_dir / "worldwide_cases.csv"), "--out", str(tmp_path)])
    for name in ("trends.csv", "cases.csv", "manifest.json"):
        assert (tmp_path / name).read_bytes() == (ingested / name).read_bytes()


def test_ingest_wide_exports(data_dir, tmp_path):
    files = [str(data_dir / f"multiTimeline_{i}.csv") for i in (1, 2, 3)]
    assert main(["ingest", "--trends", *files, "--cases", str(data_dir / "worldwide_cases.csv"),
                 "--out", str(tmp_path)]) == 0
    assert len(json.loads((tmp_path / "manifest.json").read_text())["terms"]) == 13


def test_bad_date_exits_3(tmp_path, data_dir, capsys):
    bad = tmp_path / "cases.csv"
    bad.write_text("date,region,new_cases\n2020-13-01,world,5\n")
    rc = main(["ingest", "--trends", str(data_dir / "worldwide_trends.csv"), "--cases", str(bad),
               "--out", str(tmp_path / "o")])
    assert rc == 3
    assert "2020-13-01" in capsys.readouterr().err


def test_missing_file_exits_6(tmp_path):
    assert main(["correlate", "--trends", str(tmp_path / "nope.csv"), "--cases", str(tmp_path / "x.csv")]) == 6


def test_bad_flag_exits_2():
    assert main(["train", "--model", "forest", "--out", "x"]) == 2


def test_correlate_keeps_twelve(ingested, tmp_path, capsys):
    out = tmp_path / "corr.csv"
    assert main(["correlate", "--data", str(ingested), "--out", str(out)]) == 0
    assert "12 kept, 1 dropped" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert len(lines) == 14
    assert main(["correlate", "--data", str(ingested), "--threshold", "0.9", "--out", str(out)]) == 0
    assert int(capsys.readouterr().out.split()[0]) < 12


def test_constant_cases_fail_cleanly(tmp_path, data_dir, capsys):
    cases = tmp_path / "cases.csv"
    rows = "".join(f"2020-{1 + (19 + i) // 31:02d}-{(19 + i) % 31 + 1:02d},world,7\n" for i in range(10))
    cases.write_text("date,region,new_cases\n" + rows)
    rc = main(["correlate", "--trends", str(data_dir / "worldwide_trends.csv"), "--cases", str(cases)])
    assert rc not in (0, 1)
    assert "Traceback" not in capsys.readouterr().err


def test_fractional_cases_are_rejected_at_parse(tmp_path, data_dir):
    src = (data_dir / "worldwide_cases.csv").read_text().splitlines()
    src[5] = src[5] + ".5"
    cases = tmp_path / "cases.csv"
    cases.write_text("\n".join(src) + "\n")
    rc = main(["train", "--trends", str(data_dir / "worldwide_trends.csv"), "--cases", str(cases),
               "--model", "nb2", "--out", str(tmp_path / "r")])
    assert rc == 3


def _train(ingested, out, model, trends=True, extra=()):
    args = ["train", "--data", str(ingested), "--model", model, "--seed", "7", "--out", str(out),
            "--use-trends" if trends else "--no-trends", *EPOCHS, *extra]
    assert main(args) == 0
    return json.loads((out / "run.json").read_text())


def test_train_outputs(ingested, tmp_path):
    meta = _train(ingested, tmp_path / "lin", "linear")
    assert meta["screened_out"] == ["coronavirus symptoms"]
    assert meta["features"][-1] == "cases_lag1" and len(meta["features"]) == 13
    assert meta["n_train"] + meta["n_test"] == 63 - 28  # first day has no lagged count
    for name in ("fit.json", "predictions.csv", "train_log.csv"):
        assert (tmp_path / "lin" / name).exists()
    assert _train(ingested, tmp_path / "base", "linear", trends=False)["features"] == ["cases_lag1"]


def test_dnn_reruns_are_bit_identical(ingested, tmp_path):
    _train(ingested, tmp_path / "a", "dnn")
    _train(ingested, tmp_path / "b", "dnn")
    for name in ("fit.json", "predictions.csv", "train_log.csv", "run.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.fixture(scope="module")
def six_runs(ingested, tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    names = []
    for model in ("linear", "nb2", "dnn"):
        for trends in (False, True):
            name = f"{model}_{'gt' if trends else 'base'}"
            _train(ingested, root / name, model, trends)
            names.append(name)
    (root / "runs.json").write_text(json.dumps(names))
    return root


def test_evaluate_table(six_runs, tmp_path, capsys):
    out = tmp_path / "table.csv"
    imp = tmp_path / "imp.csv"
    assert main(["evaluate", "--runs", str(six_runs / "runs.json"), "--out", str(out),
                 "--improvements", str(imp)]) == 0
    assert len(out.read_text().splitlines()) == 7
    assert len(imp.read_text().splitlines()) == 4
    assert main(["evaluate", "--runs", str(six_runs / "runs.json"), "--format", "text"]) == 0
    assert "Deep Neural Network + GT" in capsys.readouterr().out


def test_evaluate_mismatched_splits_exit_5(six_runs, ingested, tmp_path):
    _train(ingested, tmp_path / "other", "linear", extra=["--seed", "8"])
    man = tmp_path / "runs.json"
    man.write_text(json.dumps([str(six_runs / "linear_base"), "other"]))
    assert main(["evaluate", "--runs", str(man)]) == 5


def test_plots_from_cli(six_runs, tmp_path):
    svg = tmp_path / "p.svg"
    assert main(["plot", "--kind", "actual-vs-pred", "--input", str(six_runs / "dnn_gt" / "predictions.csv"),
                 "--out", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 2
    table = tmp_path / "t.csv"
    main(["evaluate", "--runs", str(six_runs / "runs.json"), "--out", str(table)])
    assert main(["plot", "--kind", "bars", "--input", str(table), "--out", str(svg)]) == 0
    assert svg.read_text().count('class="bar"') == 2


def test_plot_empty_predictions_is_an_error(tmp_path):
    p = tmp_path / "predictions.csv"
    p.write_text("date,actual,predicted\n")
    assert main(["plot", "--kind", "actual-vs-pred", "--input", str(p), "--out", str(tmp_path / "x.svg")]) == 2
    assert not (tmp_path / "x.svg").exists()


def test_config_file_supplies_defaults_and_flags_win(ingested, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[train]\ndata = {ingested}\nmodel = linear\nseed = 3\nout = {tmp_path / 'cfg'}\n")
    assert main(["--config", str(cfg), "train"]) == 0
    assert json.loads((tmp_path / "cfg" / "run.json").read_text())["seed"] == 3
    assert main(["--config", str(cfg), "train", "--seed", "5"]) == 0
    assert json.loads((tmp_path / "cfg" / "run.json").read_text())["seed"] == 5
    cfg.write_text("[train]\nbogus = 1\n")
    assert main(["--config", str(cfg), "train", "--model", "linear", "--out", "x"]) == 2


def test_analyze_subcommands(data_dir, tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analyze", "daily-change", "--trends", str(data_dir / "worldwide_trends.csv"),
                 "--term", "covid", "--out", str(out)]) == 0
    assert out.read_text().startswith("date,delta\n")
    assert main(["analyze", "wordcloud", "--queries", str(data_dir / "related_queries.csv"),
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1].startswith("virus,")
    assert main(["analyze", "cooccur", "--queries", str(data_dir / "related_queries.csv"),
                 "--seed-term", "coronavirus", "--out", str(out)]) == 0
    assert main(["analyze", "heatmap", "--topics", str(data_dir / "related_topics.csv"),
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "date,category,count"
