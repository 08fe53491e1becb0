"""Command-line interface: ``bmidas {simulate,fit,forecast,evaluate,montecarlo}``.

Settings are resolved as defaults < config file (TOML, or a previous run's
manifest.json) < command-line flags.  Every run writes ``manifest.json`` with
the fully resolved configuration, so ``--config <dir>/manifest.json``
reproduces it.  The output directory defaults to ``$BMIDAS_OUTPUT_DIR`` and
then ``./bmidas_out``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O or
input-data error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .design import DesignError, MixedFreqPanel
from .forecast import (ForecastRecord, ScoreTable, crps, dmw_test, forecast_period, log_score,
                       rmsfe)
from .gibbs import Hyperparams, PosteriorDraws, SamplerError, Schedule
from .inference import selection_rates
from .ingest import FREQ_PAIRS, DataError, IngestSpec, ingest_csv, write_panel_csv
from .rng import RngHandle
from .simulate import DgpConfig, ModelSpec, fit_panel, generate_dataset, run_monte_carlo
from .tuning import SaConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

log = logging.getLogger("bmidas")

OUTPUT_ENV = "BMIDAS_OUTPUT_DIR"
COMMANDS = ("simulate", "fit", "forecast", "evaluate", "montecarlo")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass
class RunConfig:
    command: str = "fit"
    # data
    low_freq_path: str | None = None
    high_freq_path: str | None = None
    date_col: str = "date"
    y_col: str = "y"
    x_cols: list | None = None
    low_freq: str = "Q"
    high_freq: str = "M"
    # model and basis
    model: str = "agl_ss"
    p: int = 3
    r: int = 2
    C: int | None = None
    h: float = 0.0
    ar_lags: int = 0
    level: float = 0.95
    selection: str | None = None
    # schedule
    S: int = 20000
    burn_in: int = 10000
    thin: int = 10
    trace_every: int = 0
    # hyper-parameters
    a1: float = 1.001
    b1: float = 0.001
    a2: float = 1.0
    b2: float = 1.0
    c: float | None = None
    d: float = 1.0
    tuning_mode: str = "stochastic_approximation"
    pi0_fixed: float | None = None
    # stochastic approximation
    sa_q: float = 0.8
    e_bar: float = 3.0
    alpha_e: float = 0.1
    c_bound: float = 5.0
    omega_init: float = 0.0
    restart_sigma2: str = "conditional"
    # simulation
    scenario: str = "dgp"
    dgp: int = 1
    K: int = 30
    m: int = 3
    T: int | None = None
    sigma_eps: float = 0.5
    noise_to_signal: float = 0.2
    n_holdout: int = 1
    R: int = 50
    workers: int = 1
    # forecasting / evaluation
    n_test: int = 8
    save_predictive: bool = False
    forecasts: list | None = None
    benchmark: str | None = None
    dmw_losses: list = field(default_factory=lambda: ["squared_error", "crps", "neg_log_score"])
    # output
    draws_format: str = "csv"
    seed: int | None = None
    output_dir: str | None = None

    # -- resolution ------------------------------------------------------
    def resolve(self) -> "RunConfig":
        """Fill scenario-dependent defaults and validate; raises ConfigError."""
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.scenario not in ("dgp", "illustration"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.C is None:
            self.C = 24 if self.command in ("simulate", "montecarlo") and \
                self.scenario == "dgp" else 12
        if self.T is None:
            self.T = 500 if self.scenario == "illustration" else 200
        if self.seed is None:
            self.seed = int(np.random.SeedSequence().entropy % 2**32)
        if self.output_dir is None:
            self.output_dir = os.environ.get(OUTPUT_ENV) or "bmidas_out"
        if self.draws_format not in ("csv", "npz"):
            raise ConfigError(f"draws_format must be csv or npz, got {self.draws_format!r}")
        if self.ar_lags < 0 or self.n_test < 1 or self.R < 1 or self.workers < 1:
            raise ConfigError("ar_lags >= 0, n_test >= 1, R >= 1 and workers >= 1 required")
        if self.command in ("fit", "forecast") and not (self.low_freq_path and self.high_freq_path):
            raise ConfigError(f"{self.command} needs --low-freq-path and --high-freq-path")
        if self.command == "evaluate" and not self.forecasts:
            raise ConfigError("evaluate needs --forecasts name=path ...")
        # build every typed config once so errors surface before any computation
        self.model_spec()
        self.hyperparams()
        self.schedule()
        self.sa_config()
        if self.command in ("simulate", "montecarlo"):
            self.dgp_config()
        return self

    def model_spec(self) -> ModelSpec:
        return _typed(ModelSpec, model=self.model, p=self.p, r=self.r, level=self.level,
                      selection=self.selection)

    def hyperparams(self) -> Hyperparams:
        return _typed(Hyperparams, a1=self.a1, b1=self.b1, a2=self.a2, b2=self.b2, c=self.c,
                      d=self.d, tuning_mode=self.tuning_mode, pi0_fixed=self.pi0_fixed)

    def schedule(self) -> Schedule:
        return _typed(Schedule, S=self.S, burn_in=self.burn_in, thin=self.thin)

    def sa_config(self) -> SaConfig:
        return _typed(SaConfig, q=self.sa_q, e_bar=self.e_bar, alpha_e=self.alpha_e,
                      c_bound=self.c_bound, omega_init=self.omega_init,
                      restart_sigma2=self.restart_sigma2)

    def dgp_config(self) -> DgpConfig:
        common = dict(m=self.m, C=self.C, T=self.T, n_holdout=self.n_holdout, seed=self.seed)
        if self.scenario == "illustration":
            return _typed(DgpConfig.illustration, **common)
        if self.dgp not in (1, 2, 3):
            raise ConfigError(f"dgp must be 1, 2 or 3, got {self.dgp}")
        return _typed(DgpConfig.dgp, self.dgp, K=self.K, sigma_eps=self.sigma_eps,
                      noise_to_signal=self.noise_to_signal, **common)

    def ingest_spec(self) -> IngestSpec:
        return IngestSpec(date_col=self.date_col, y_col=self.y_col,
                          x_cols=tuple(self.x_cols) if self.x_cols else None,
                          low_freq=self.low_freq, high_freq=self.high_freq, C=self.C, h=self.h)


def _typed(factory, *args, **kw):
    try:
        return factory(*args, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config_file(path) -> dict:
    """Flat key-value settings from TOML (tables are flattened) or a manifest."""
    path = Path(path)
    try:
        text = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
            raw = raw.get("config", raw)
        else:
            raw = tomllib.loads(text.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    flat: dict = {}
    for key, val in raw.items():
        if isinstance(val, dict):
            flat.update(val)
        else:
            flat[key] = val
    flat = {k.replace("-", "_"): v for k, v in flat.items()}
    unknown = sorted(set(flat) - FIELD_NAMES)
    if unknown:
        raise ConfigError(f"unknown config keys {unknown}")
    flat.pop("command", None)
    return flat


# ---------------------------------------------------------------------------
# argument parsing

def _add(parser, name, typ, help_, **kw):
    parser.add_argument(f"--{name.replace('_', '-')}", dest=name, type=typ, help=help_,
                        default=argparse.SUPPRESS, **kw)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bmidas", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"bmidas {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="TOML config or manifest.json")
        _add(p, "output_dir", str, f"output directory (default ${OUTPUT_ENV} or ./bmidas_out)")
        _add(p, "seed", int, "master seed")
        p.add_argument("-v", "--verbose", action="store_true")

    def model(p):
        _add(p, "model", str, "agl, agl_ss or al")
        _add(p, "p", int, "Almon polynomial degree")
        _add(p, "r", int, "endpoint restrictions (0, 1, 2)")
        _add(p, "C", int, "lag window in high-frequency periods")
        _add(p, "level", float, "credible level for interval selection")
        _add(p, "selection", str, "credible_interval or posterior_median")
        for n in ("S", "burn_in", "thin", "trace_every"):
            _add(p, n, int, f"chain {n}")
        for n in ("a1", "b1", "a2", "b2", "c", "d", "pi0_fixed", "sa_q", "e_bar", "alpha_e",
                  "c_bound", "omega_init"):
            _add(p, n, float, f"hyper-parameter {n}")
        _add(p, "tuning_mode", str, "stochastic_approximation or full_bayes")
        _add(p, "restart_sigma2", str, "conditional or prior")

    def data(p):
        _add(p, "low_freq_path", str, "low-frequency CSV (date, response)")
        _add(p, "high_freq_path", str, "high-frequency CSV (date, predictors)")
        _add(p, "date_col", str, "date column name")
        _add(p, "y_col", str, "response column name")
        _add(p, "x_cols", str, "predictor columns", nargs="+")
        _add(p, "low_freq", str, "pandas frequency of the response (e.g. Q)")
        _add(p, "high_freq", str, "pandas frequency of the predictors (e.g. M)")
        _add(p, "h", float, "forecast horizon in low-frequency units (multiple of 1/m)")
        _add(p, "ar_lags", int, "unpenalized lags of the response")
        _add(p, "draws_format", str, "csv or npz")

    def dgp(p):
        _add(p, "scenario", str, "dgp or illustration")
        _add(p, "dgp", int, "weight scheme 1 (fast), 2 (slow), 3 (near flat)")
        _add(p, "K", int, "number of predictors")
        _add(p, "m", int, "frequency ratio")
        _add(p, "T", int, "in-sample length")
        _add(p, "sigma_eps", float, "innovation cross-correlation base")
        _add(p, "noise_to_signal", float, "error to signal variance ratio")
        _add(p, "n_holdout", int, "extra simulated periods after T")

    p = sub.add_parser("simulate", help="simulate a dataset")
    common(p), dgp(p), _add(p, "C", int, "lag window")
    p = sub.add_parser("fit", help="fit a model to a CSV panel")
    common(p), model(p), data(p)
    p = sub.add_parser("forecast", help="expanding-window forecasts for the last periods")
    common(p), model(p), data(p)
    _add(p, "n_test", int, "number of forecast targets at the end of the sample")
    p.add_argument("--save-predictive", dest="save_predictive", action="store_true",
                   default=argparse.SUPPRESS, help="write per-date predictive draws")
    p = sub.add_parser("evaluate", help="score and compare forecast files")
    common(p)
    _add(p, "forecasts", str, "name=path/to/forecasts.csv entries", nargs="+")
    _add(p, "benchmark", str, "benchmark model name")
    _add(p, "dmw_losses", str, "losses for the DMW test", nargs="+")
    p = sub.add_parser("montecarlo", help="Monte Carlo replications on a simulated design")
    common(p), model(p), dgp(p)
    _add(p, "R", int, "replications")
    _add(p, "workers", int, "worker processes")
    return ap


def config_from_args(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    path = ns.pop("config", None)
    ns.pop("verbose", None)
    settings = load_config_file(path) if path else {}
    settings.update(ns)
    try:
        cfg = RunConfig(**settings)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.resolve()


# ---------------------------------------------------------------------------
# persistence

def draw_columns(draws: PosteriorDraws) -> tuple[list[str], np.ndarray]:
    """Header and matrix of the thinned draws, one column per parameter."""
    names, cols = [], []
    for j, (s, g) in enumerate(draws.group_offsets, start=1):
        for i in range(g):
            names.append(f"θ_g{j}_{i + 1}")
            cols.append(draws.theta[:, s + i])
    for i, c in enumerate(draws.unpenalized_cols, start=1):
        names.append(f"θ_u_{i}")
        cols.append(draws.theta[:, c])
    G = len(draws.group_offsets)
    names += [f"tau2_{j}" for j in range(1, G + 1)]
    cols += list(draws.tau2.T)
    names.append("sigma2")
    cols.append(draws.sigma2)
    names += [f"lambda_{j}" for j in range(1, G + 1)]
    cols += list(draws.lam.T)
    if draws.pi0 is not None:
        names.append("pi0")
        cols.append(draws.pi0)
        names += [f"gamma_{j}" for j in range(1, G + 1)]
        cols += list(draws.gamma.T.astype(float))
    return names, np.column_stack(cols)


def write_draws(draws: PosteriorDraws, out: Path, fmt: str = "csv") -> Path:
    names, mat = draw_columns(draws)
    if fmt == "npz":
        path = out / "draws.npz"
        np.savez_compressed(path, names=np.array(names), draws=mat)
        return path
    path = out / "draws.csv"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in mat:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


def write_rows(path: Path, rows: list[dict]) -> Path:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if not rows:
            return path
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return path


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_manifest(cfg: RunConfig, out: Path, outputs: list[Path], extra: dict | None = None):
    manifest = {"bmidas_version": __version__, "command": cfg.command,
                "config": asdict(cfg), "outputs": sorted(p.name for p in outputs)}
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n",
                    encoding="utf-8")
    return path


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# data helpers

def with_ar_lags(panel: MixedFreqPanel, lags: int):
    """Trim the panel so that ``lags`` lags of y exist and return the aligned
    unpenalized matrix.  Lag l of period t is y at t - d - l + 1 where
    d = max(1, ceil(h)) is the first response lag known at the forecast origin."""
    if lags == 0:
        return panel, None
    d = max(1, math.ceil(panel.h - 1e-12))
    start = d + lags - 1
    if start >= panel.T:
        raise ConfigError(f"ar_lags={lags} leaves no usable periods")
    y = panel.y
    mat = np.column_stack([y[start - d - l + 1:panel.T - d - l + 1] for l in range(1, lags + 1)])
    trimmed = MixedFreqPanel(y=y[start:], x=panel.x, m=panel.m, C=panel.C, h=panel.h,
                             head=panel.head + start * panel.m, names=panel.names,
                             periods=None if panel.periods is None else panel.periods[start:])
    return trimmed, mat


def ar_row(y: np.ndarray, t: int, lags: int, h: float) -> np.ndarray | None:
    if lags == 0:
        return None
    d = max(1, math.ceil(h - 1e-12))
    return np.array([y[t - d - l + 1] for l in range(1, lags + 1)])


def load_panel(cfg: RunConfig) -> MixedFreqPanel:
    return ingest_csv(cfg.low_freq_path, cfg.high_freq_path, cfg.ingest_spec())


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg: RunConfig) -> list[Path]:
    dcfg = cfg.dgp_config()
    if dcfg.m not in FREQ_PAIRS:
        raise ConfigError(f"simulate writes dated CSVs only for m in {sorted(FREQ_PAIRS)}")
    low_f, high_f = FREQ_PAIRS[dcfg.m]
    ds = generate_dataset(dcfg, RngHandle(cfg.seed, 0).generator())
    out = _outdir(cfg)
    low, high = out / "low_freq.csv", out / "high_freq.csv"
    start = "2000Q1" if low_f == "Q" else "2000"
    write_panel_csv(ds.panel, low, high, low_f, high_f, start=start)
    truth = out / "truth.json"
    truth.write_text(json.dumps({
        "beta_true": ds.beta_true.tolist(), "weights": ds.weights_used.tolist(),
        "sigma_used": ds.sigma_used, "noise_to_signal": ds.noise_to_signal,
        "T": dcfg.T, "n_holdout": dcfg.n_holdout, "low_freq": low_f, "high_freq": high_f,
    }, indent=2) + "\n", encoding="utf-8")
    return [low, high, truth]


def selection_rows(fit, names) -> list[dict]:
    sel = fit.selection
    beta = fit.beta_draws
    lo, hi = np.quantile(beta, [(1 - fit.spec.level) / 2, (1 + fit.spec.level) / 2], axis=0)
    rows = []
    for k, name in enumerate(names):
        rows.append({
            "predictor": name, "included": int(sel.included[k]), "criterion": sel.criterion,
            "beta_mean": repr(float(beta[:, k].mean())),
            "beta_median": repr(float(np.median(beta[:, k]))),
            "lower": repr(float(lo[k])), "upper": repr(float(hi[k])),
            "inclusion_prob": "" if sel.inclusion_prob is None
            else repr(float(sel.inclusion_prob[k])),
        })
    return rows


def cmd_fit(cfg: RunConfig) -> list[Path]:
    panel, unpen = with_ar_lags(load_panel(cfg), cfg.ar_lags)
    rng = RngHandle(cfg.seed, 0).generator()
    fit = fit_panel(panel, cfg.model_spec(), cfg.hyperparams(), cfg.schedule(), rng,
                    cfg.sa_config(), unpenalized=unpen, trace_every=cfg.trace_every)
    out = _outdir(cfg)
    paths = [write_draws(fit.draws, out, cfg.draws_format),
             write_rows(out / "selection.csv", selection_rows(fit, panel.names))]
    if cfg.trace_every > 0:
        G = fit.design.G
        rows = [{"iteration": int(s), **{f"lambda_{j + 1}": repr(float(v[j])) for j in range(G)}}
                for s, v in zip(fit.draws.trace_iters, fit.draws.lambda_trace)]
        paths.append(write_rows(out / "lambda_trace.csv", rows))
    log.info("selected %s; %d SA restarts", [n for n, i in zip(panel.names, fit.selection.included)
                                            if i], fit.draws.n_restarts)
    return paths


def forecast_targets(panel: MixedFreqPanel, n_test: int) -> list[int]:
    """The last ``n_test`` observed periods plus the next one if its regressors exist."""
    targets = list(range(max(0, panel.T - n_test), panel.T))
    if panel.lag0_index(panel.T) < panel.x.shape[1]:
        targets.append(panel.T)
    return targets


def cmd_forecast(cfg: RunConfig) -> list[Path]:
    full = load_panel(cfg)
    spec, hp, sched, sa = cfg.model_spec(), cfg.hyperparams(), cfg.schedule(), cfg.sa_config()
    d = max(1, math.ceil(full.h - 1e-12))
    rows, pred = [], {}
    for i, t in enumerate(forecast_targets(full, cfg.n_test)):
        last = t - d                                    # last response known at the origin
        train = MixedFreqPanel(y=full.y[:last + 1], x=full.x, m=full.m, C=full.C, h=full.h,
                               head=full.head, names=full.names,
                               periods=None if full.periods is None else full.periods[:last + 1])
        train, unpen = with_ar_lags(train, cfg.ar_lags)
        rng = RngHandle(cfg.seed, i).generator()
        fit = fit_panel(train, spec, hp, sched, rng, sa, unpenalized=unpen)
        realized = float(full.y[t]) if t < full.T else None
        label = full.periods[t] if full.periods is not None and t < full.T else \
            _next_label(full, cfg) if t == full.T else t
        rec = forecast_period(fit.draws, full, fit.basis, t, rng,
                              unpenalized_row=ar_row(full.y, t, cfg.ar_lags, full.h),
                              realized=realized, target_date=label)
        row = {"target": str(rec.target_date), "horizon": full.h, "point": repr(rec.point),
               "realized": "" if realized is None else repr(realized),
               "sq_error": "" if realized is None else repr(rec.error ** 2),
               "crps": "" if realized is None else repr(crps(rec.predictive_draws, realized)),
               "log_score": "" if realized is None
               else repr(log_score(rec.predictive_draws, realized))}
        rows.append(row)
        pred[str(rec.target_date)] = rec.predictive_draws
        log.info("forecast %s: point %.4f realized %s", rec.target_date, rec.point, realized)
    out = _outdir(cfg)
    paths = [write_rows(out / "forecasts.csv", rows)]
    if cfg.save_predictive:
        path = out / "predictive_draws.csv"
        keys = list(pred)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(keys) + "\n")
            for vals in zip(*(pred[k] for k in keys)):
                fh.write(",".join(repr(float(v)) for v in vals) + "\n")
        paths.append(path)
    return paths


def _next_label(panel: MixedFreqPanel, cfg: RunConfig) -> str:
    import pandas as pd
    if panel.periods is None:
        return str(panel.T)
    return str(pd.Period(panel.periods[-1], freq=cfg.low_freq) + 1)


def read_forecasts(path) -> list[dict]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise DataError(f"cannot read forecasts {path}: {exc}") from exc
    need = {"target", "horizon", "sq_error", "crps", "log_score"}
    if rows and not need <= set(rows[0]):
        raise DataError(f"{path}: missing columns {sorted(need - set(rows[0]))}")
    return [r for r in rows if r["sq_error"] != ""]


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    runs = {}
    for entry in cfg.forecasts:
        if "=" not in entry:
            raise ConfigError(f"forecast entry {entry!r} is not name=path")
        name, path = entry.split("=", 1)
        runs[name] = {r["target"]: r for r in read_forecasts(path)}
    if cfg.benchmark is not None and cfg.benchmark not in runs:
        raise ConfigError(f"benchmark {cfg.benchmark!r} is not among {sorted(runs)}")
    common = sorted(set.intersection(*(set(v) for v in runs.values())))
    if not common:
        raise DataError("forecast files share no target dates with realized values")

    def col(name, key):
        return np.array([float(runs[name][t][key]) for t in common])

    table = ScoreTable(
        rmsfe={n: float(np.sqrt(col(n, "sq_error").mean())) for n in runs},
        avg_log_score={n: float(col(n, "log_score").mean()) for n in runs},
        avg_crps={n: float(col(n, "crps").mean()) for n in runs},
        n_forecasts={n: len(common) for n in runs})
    losses = {"squared_error": lambda n: col(n, "sq_error"), "crps": lambda n: col(n, "crps"),
              "neg_log_score": lambda n: -col(n, "log_score")}
    horizon = max(float(r["horizon"]) for v in runs.values() for r in v.values())
    steps = max(1, math.ceil(horizon - 1e-12))
    names = list(runs)
    pairs = [(a, cfg.benchmark) for a in names if a != cfg.benchmark] if cfg.benchmark else \
        [(a, b) for a in names for b in names if a != b]
    dmw_rows = []
    for a, b in pairs:
        for loss in cfg.dmw_losses:
            if loss not in losses:
                raise ConfigError(f"unknown DMW loss {loss!r}")
            if len(common) < 8:
                continue
            res = dmw_test(losses[loss](a), losses[loss](b), steps)
            table.dmw_pvalues[(a, b, loss)] = res.pvalue
            dmw_rows.append({"model_a": a, "model_b": b, "loss": loss,
                             "statistic": repr(res.statistic), "pvalue": repr(res.pvalue),
                             "n": res.n})
    out = _outdir(cfg)
    paths = [write_rows(out / "scores.csv", table.rows()),
             write_rows(out / "dmw.csv", dmw_rows)]
    if cfg.benchmark:
        rel = table.relative_to(cfg.benchmark)
        paths.append(write_rows(out / "relative.csv", [{"model": m, **v} for m, v in rel.items()]))
    return paths


def cmd_montecarlo(cfg: RunConfig) -> list[Path]:
    dcfg = cfg.dgp_config()

    def progress(rep):
        log.info("replication %d %s", rep.index, "ok" if rep.ok else rep.error)

    res = run_monte_carlo(dcfg, cfg.model_spec(), cfg.hyperparams(), cfg.schedule(), cfg.R,
                          workers=cfg.workers, seed=cfg.seed, sa_cfg=cfg.sa_config(),
                          progress=progress)
    truth = np.asarray(dcfg.beta_true) != 0
    rows = []
    for rep in res.replications:
        row = {"replication": rep.index, "ok": int(rep.ok), "error": rep.error or "",
               "sigma_used": repr(rep.sigma_used), "n_restarts": rep.n_restarts}
        if rep.ok:
            tpr, fpr, mcc = selection_rates(rep.included, truth)
            row.update(tpr=tpr, fpr=fpr, mcc=mcc,
                       included="".join(str(int(v)) for v in rep.included))
            if rep.forecast is not None:
                row.update(point=repr(rep.forecast.point), realized=repr(rep.forecast.realized))
        rows.append(row)
    out = _outdir(cfg)
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    rows = [{k: r.get(k, "") for k in keys} for r in rows]
    return [write_rows(out / "metrics.csv", [res.summary()]),
            write_rows(out / "replications.csv", rows)]


HANDLERS = {"simulate": cmd_simulate, "fit": cmd_fit, "forecast": cmd_forecast,
            "evaluate": cmd_evaluate, "montecarlo": cmd_montecarlo}


def run_command(cfg: RunConfig) -> list[Path]:
    paths = HANDLERS[cfg.command](cfg)
    out = Path(cfg.output_dir)
    return paths + [write_manifest(cfg, out, paths)]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if ("-v" in argv or "--verbose" in argv)
                        else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(argv)
        paths = run_command(cfg)
    except SystemExit as exc:            # argparse usage errors
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    except (ConfigError, DesignError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SamplerError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:               # includes DataError
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
