import csv
import json

import numpy as np
import pandas as pd
import pytest

from bmidas import cli
from bmidas.ingest import (DataError, FrequencyError, IngestSpec, ingest_csv, ingest_frames,
                           panel_frames, write_panel_csv)

TOY = IngestSpec(y_col="gdp", C=3)
FAST = ["--S", "600", "--burn-in", "200", "--thin", "2"]


@pytest.fixture
def toy(fixtures_dir):
    return fixtures_dir / "toy_low.csv", fixtures_dir / "toy_high.csv"


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- ingestion --------------------------------------------------------------------------

def test_toy_panel_counts(toy):
    panel = ingest_csv(*toy, TOY)
    assert (panel.T, panel.m, panel.C, panel.K) == (8, 3, 3, 2)
    assert panel.names == ("ip", "spread") and panel.periods[0] == "2010Q1"
    # lag 0 of 2010Q1 is March 2010, the third monthly row
    assert panel.x[0, panel.lag0_index(0)] == pd.read_csv(toy[1])["ip"][2]
    assert panel.first_usable() == 0


def test_alignment_loss_with_longer_window(toy):
    panel = ingest_csv(*toy, IngestSpec(y_col="gdp", C=6))
    assert panel.T == 8 and panel.first_usable() == 1   # a 6-month window needs two quarters


def test_round_trip_identity(toy, tmp_path):
    panel = ingest_csv(*toy, TOY)
    low, high = tmp_path / "l.csv", tmp_path / "h.csv"
    write_panel_csv(panel, low, high)
    again = ingest_csv(low, high, IngestSpec(y_col="y", C=3))
    np.testing.assert_array_equal(again.y, panel.y)
    np.testing.assert_array_equal(again.x, panel.x)
    assert (again.head, again.periods, again.names) == (panel.head, panel.periods, panel.names)


def test_round_trip_full_precision(tmp_path):
    rng = np.random.default_rng(0)
    from bmidas.design import MixedFreqPanel
    panel = MixedFreqPanel(y=rng.standard_normal(6), x=rng.standard_normal((2, 21)), m=3, C=6,
                           h=0.0, head=3)
    write_panel_csv(panel, tmp_path / "l.csv", tmp_path / "h.csv", start="1999Q3")
    again = ingest_csv(tmp_path / "l.csv", tmp_path / "h.csv", IngestSpec(C=6))
    np.testing.assert_array_equal(again.x, panel.x)
    np.testing.assert_array_equal(again.y, panel.y)
    assert again.head == 3


def test_high_frequency_starting_late_drops_response_rows(toy):
    low = pd.read_csv(toy[0])
    high = pd.read_csv(toy[1]).iloc[4:]   # starts in May 2010: Q2 is incomplete, July is offset 2
    panel = ingest_frames(low, high, TOY)
    assert panel.T == 6 and panel.periods[0] == "2010Q3" and panel.head == 2


def test_weekly_monthly_rejected():
    low = pd.DataFrame({"date": ["2020-01", "2020-02"], "y": [1.0, 2.0]})
    high = pd.DataFrame({"date": [str(p) for p in pd.period_range("2020-01-06", periods=9,
                                                                   freq="W")], "x": range(9)})
    with pytest.raises(FrequencyError, match="frequency"):
        ingest_frames(low, high, IngestSpec(low_freq="M", high_freq="W"))


def test_duplicate_dates_rejected(toy):
    high = pd.read_csv(toy[1])
    high.loc[5, "date"] = high.loc[4, "date"]
    with pytest.raises(DataError, match="duplicate"):
        ingest_frames(pd.read_csv(toy[0]), high, TOY)


def test_missing_values_listed(toy):
    high = pd.read_csv(toy[1])
    high.loc[3, "spread"] = np.nan
    high.loc[7, "ip"] = np.nan
    with pytest.raises(DataError) as err:
        ingest_frames(pd.read_csv(toy[0]), high, TOY)
    msg = str(err.value)
    assert "(2010-04, spread)" in msg and "(2010-08, ip)" in msg


def test_missing_date_and_columns(toy):
    high = pd.read_csv(toy[1]).drop(index=6)
    with pytest.raises(DataError, match="missing dates"):
        ingest_frames(pd.read_csv(toy[0]), high, TOY)
    with pytest.raises(DataError, match="response"):
        ingest_csv(*toy, IngestSpec(y_col="nope"))
    with pytest.raises(DataError, match="no such file"):
        ingest_csv("/nonexistent/low.csv", toy[1], TOY)


def test_panel_frames_inverse(toy):
    panel = ingest_csv(*toy, TOY)
    low, high = panel_frames(panel)
    assert list(low["date"]) == list(panel.periods)
    assert high["date"].iloc[0] == "2010-01"


# --- CLI --------------------------------------------------------------------------------

def run(args, out):
    return cli.main(list(args) + ["--output-dir", str(out)])


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    rc = cli.main(["simulate", "--dgp", "1", "--K", "30", "--sigma-eps", "0.5", "--T", "80",
                   "--seed", "4", "--output-dir", str(out)])
    assert rc == 0
    return out


def test_simulate_outputs(simulated):
    names = {p.name for p in simulated.iterdir()}
    assert {"low_freq.csv", "high_freq.csv", "truth.json", "manifest.json"} <= names
    man = json.loads((simulated / "manifest.json").read_text())
    assert man["command"] == "simulate" and man["config"]["seed"] == 4
    assert man["config"]["C"] == 24 and man["config"]["sigma_eps"] == 0.5
    truth = json.loads((simulated / "truth.json").read_text())
    assert len(truth["beta_true"]) == 30
    assert truth["noise_to_signal"] == pytest.approx(0.2, rel=0.02)
    panel = ingest_csv(simulated / "low_freq.csv", simulated / "high_freq.csv", IngestSpec(C=24))
    assert panel.K == 30 and panel.T == 81


def fit_args(sim, *extra):
    return ["fit", "--low-freq-path", str(sim / "low_freq.csv"),
            "--high-freq-path", str(sim / "high_freq.csv"), "--C", "24", "--seed", "11",
            *FAST, *extra]


def test_fit_is_deterministic(simulated, tmp_path):
    assert run(fit_args(simulated), tmp_path / "a") == 0
    assert run(fit_args(simulated), tmp_path / "b") == 0
    a = (tmp_path / "a" / "draws.csv").read_bytes()
    assert a == (tmp_path / "b" / "draws.csv").read_bytes()
    header = a.decode().splitlines()[0].split(",")
    assert header[:2] == ["θ_g1_1", "θ_g1_2"]
    assert {"tau2_1", "sigma2", "lambda_30", "pi0", "gamma_30"} <= set(header)
    sel = read_csv_rows(tmp_path / "a" / "selection.csv")
    assert len(sel) == 30 and sel[0]["criterion"] == "posterior_median"


def test_manifest_rerun_reproduces(simulated, tmp_path):
    assert run(fit_args(simulated, "--model", "agl"), tmp_path / "a") == 0
    manifest = tmp_path / "a" / "manifest.json"
    assert cli.main(["fit", "--config", str(manifest), "--output-dir", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "draws.csv").read_bytes() == \
        (tmp_path / "b" / "draws.csv").read_bytes()
    cfg = json.loads(manifest.read_text())["config"]
    for key in ("a1", "b1", "sa_q", "e_bar", "c_bound", "level", "thin"):
        assert key in cfg


def test_toml_config(simulated, tmp_path):
    toml = tmp_path / "run.toml"
    toml.write_text(
        f'low_freq_path = "{simulated / "low_freq.csv"}"\n'
        f'high_freq_path = "{simulated / "high_freq.csv"}"\n'
        'C = 24\nseed = 2\n[model]\nmodel = "al"\n'
        '[schedule]\nS = 400\nburn_in = 100\nthin = 3\n')
    assert cli.main(["fit", "--config", str(toml), "--output-dir", str(tmp_path / "o")]) == 0
    cfg = json.loads((tmp_path / "o" / "manifest.json").read_text())["config"]
    assert (cfg["model"], cfg["S"], cfg["thin"], cfg["seed"]) == ("al", 400, 3, 2)
    header = (tmp_path / "o" / "draws.csv").read_text().splitlines()[0].split(",")
    assert "θ_g60_1" in header and "pi0" not in header     # one group per coefficient
    assert len((tmp_path / "o" / "draws.csv").read_text().splitlines()) == 1 + 100


def test_npz_draws(simulated, tmp_path):
    assert run(fit_args(simulated, "--draws-format", "npz"), tmp_path) == 0
    with np.load(tmp_path / "draws.npz") as z:
        assert z["draws"].shape[1] == len(z["names"])


def test_config_errors(simulated, tmp_path, toy):
    bad = tmp_path / "bad.toml"
    bad.write_text("not_a_key = 1\n")
    assert cli.main(["fit", "--config", str(bad)]) == 2
    assert run(fit_args(simulated, "--r", "5"), tmp_path) == 2
    assert run(fit_args(simulated, "--sa-q", "1.5"), tmp_path) == 2
    assert run(["fit", "--bogus-flag", "1"], tmp_path) == 2
    assert run(["fit"], tmp_path) == 2


def test_io_errors(tmp_path, toy):
    assert run(["fit", "--low-freq-path", "/nonexistent.csv", "--high-freq-path", str(toy[1])],
               tmp_path) == 4
    broken = tmp_path / "high.csv"
    df = pd.read_csv(toy[1])
    df.loc[2, "ip"] = np.nan
    df.to_csv(broken, index=False)
    assert run(["fit", "--low-freq-path", str(toy[0]), "--high-freq-path", str(broken),
                "--y-col", "gdp", "--C", "3"], tmp_path) == 4


def test_numerical_error_exit_code(simulated, tmp_path, monkeypatch, capsys):
    def boom(*a, **kw):
        raise cli.SamplerError("non-finite sigma2 at iteration 17")

    monkeypatch.setattr(cli, "fit_panel", boom)
    assert run(fit_args(simulated), tmp_path) == 3
    assert "iteration 17" in capsys.readouterr().err


def test_env_output_dir(simulated, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(fit_args(simulated)) == 0
    assert (tmp_path / "env" / "draws.csv").exists()


def test_forecast_and_evaluate(toy, tmp_path):
    base = ["forecast", "--low-freq-path", str(toy[0]), "--high-freq-path", str(toy[1]),
            "--y-col", "gdp", "--C", "3", "--n-test", "2", *FAST, "--seed", "1"]
    assert run(base + ["--save-predictive"], tmp_path / "a") == 0
    assert run(base + ["--model", "agl"], tmp_path / "b") == 0
    rows = read_csv_rows(tmp_path / "a" / "forecasts.csv")
    assert [r["target"] for r in rows] == ["2011Q3", "2011Q4"]
    assert float(rows[0]["crps"]) >= 0
    pred = read_csv_rows(tmp_path / "a" / "predictive_draws.csv")
    assert len(pred) == 200 and set(pred[0]) == {"2011Q3", "2011Q4"}
    ev = ["evaluate", "--forecasts", f"ss={tmp_path / 'a' / 'forecasts.csv'}",
          f"agl={tmp_path / 'b' / 'forecasts.csv'}", "--benchmark", "agl"]
    assert run(ev, tmp_path / "ev") == 0
    scores = read_csv_rows(tmp_path / "ev" / "scores.csv")
    assert {r["model"] for r in scores} == {"ss", "agl"}
    rel = {r["model"]: r for r in read_csv_rows(tmp_path / "ev" / "relative.csv")}
    assert float(rel["agl"]["rmsfe_ratio"]) == 1.0
    assert run(ev[:-1] + ["nope"], tmp_path / "ev2") == 2


def test_montecarlo_command(tmp_path):
    args = ["montecarlo", "--K", "9", "--T", "60", "--R", "2", "--seed", "3", "--model", "agl",
            *FAST]
    assert run(args, tmp_path) == 0
    metrics = read_csv_rows(tmp_path / "metrics.csv")[0]
    assert metrics["R"] == "2" and metrics["failures"] == "0"
    assert 0 <= float(metrics["tpr"]) <= 1
    reps = read_csv_rows(tmp_path / "replications.csv")
    assert [r["replication"] for r in reps] == ["0", "1"]


@pytest.mark.slow
def test_fit_illustration_selects_second_predictor(tmp_path):
    sim = tmp_path / "sim"
    assert cli.main(["simulate", "--scenario", "illustration", "--seed", "0",
                     "--n-holdout", "0", "--output-dir", str(sim)]) == 0
    assert cli.main(["fit", "--model", "agl_ss", "--low-freq-path", str(sim / "low_freq.csv"),
                     "--high-freq-path", str(sim / "high_freq.csv"), "--C", "12",
                     "--seed", "0", "--output-dir", str(tmp_path / "fit")]) == 0
    sel = read_csv_rows(tmp_path / "fit" / "selection.csv")
    assert [int(r["included"]) for r in sel] == [0, 1, 0, 0]
