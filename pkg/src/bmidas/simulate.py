"""Monte Carlo data-generating processes and the replication harness."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, signal

from .design import (AlmonBasis, DesignMatrix, MixedFreqPanel, almon_basis, build_design,
                     recover_slopes)
from .forecast import ForecastRecord, ScoreTable, forecast_period, score_forecasts
from .gibbs import Hyperparams, PosteriorDraws, Schedule, SamplerError, run_chain
from .inference import (MetricsReport, SelectionReport, compute_metrics,
                        select_credible_interval, select_posterior_median)
from .rng import RngHandle
from .tuning import SaConfig

log = logging.getLogger(__name__)

# exponential Almon (a1, a2) per scheme, w_c proportional to exp(a1 c + a2 c^2)
WEIGHT_PRESETS = {
    "fast_decay": (-0.6, 0.0),
    "slow_decay": (-0.12, 0.0),
    "near_flat": (-0.008, 0.0),
}
DGP_SCHEMES = {1: "fast_decay", 2: "slow_decay", 3: "near_flat"}
DEFAULT_BETA = (0.0, 0.3, 0.5, 0.0, 0.3, 0.5, 0.0, 0.0, 0.8)


def weight_scheme(kind: str, C: int) -> np.ndarray:
    """Normalized exponential-Almon lag weights, summing to one."""
    if C < 2:
        raise ValueError("C must be >= 2")
    try:
        a1, a2 = WEIGHT_PRESETS[kind]
    except KeyError:
        raise ValueError(f"unknown weight scheme {kind!r}") from None
    c = np.arange(C, dtype=float)
    w = np.exp(a1 * c + a2 * c**2)
    return w / w.sum()


def default_beta(K: int) -> tuple[float, ...]:
    if K < len(DEFAULT_BETA):
        raise ValueError(f"K must be at least {len(DEFAULT_BETA)}")
    return DEFAULT_BETA + (0.0,) * (K - len(DEFAULT_BETA))


@dataclass(frozen=True)
class DgpConfig:
    K: int = 30
    m: int = 3
    C: int = 24
    T: int = 200
    weight_scheme: str = "fast_decay"
    rho: float = 0.9
    mu: float = 0.1
    sigma_eps: float = 0.5
    beta_true: tuple | None = None
    alpha: float = 0.5
    noise_to_signal: float = 0.20
    error_sd: float | None = None      # fixed error sd; overrides noise_to_signal
    predictor_process: str = "ar1"     # "ar1" or "iid"
    n_holdout: int = 1
    hf_burn_in: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.beta_true is None:
            object.__setattr__(self, "beta_true", default_beta(self.K))
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if len(self.beta_true) != self.K:
            raise ValueError(f"beta_true has {len(self.beta_true)} entries, K={self.K}")
        if abs(self.rho) >= 1:
            raise ValueError("|rho| must be < 1")
        if not 0 <= self.sigma_eps < 1:
            raise ValueError("sigma_eps must lie in [0, 1)")
        if self.predictor_process not in ("ar1", "iid"):
            raise ValueError(f"unknown predictor_process {self.predictor_process!r}")
        if self.weight_scheme not in WEIGHT_PRESETS:
            raise ValueError(f"unknown weight scheme {self.weight_scheme!r}")

    @classmethod
    def dgp(cls, number: int, **kw) -> "DgpConfig":
        """Monte Carlo design: DGP 1 (fast), 2 (slow) or 3 (near-flat) weights."""
        return cls(weight_scheme=DGP_SCHEMES[int(number)], **kw)

    @classmethod
    def illustration(cls, **kw) -> "DgpConfig":
        """Four iid standard-normal predictors, only the second one active."""
        base = dict(K=4, m=3, C=12, T=500, weight_scheme="fast_decay",
                    beta_true=(0.0, 1.0, 0.0, 0.0), alpha=0.0, sigma_eps=0.0,
                    error_sd=1.0, predictor_process="iid")
        base.update(kw)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SimulatedDataset:
    panel: MixedFreqPanel
    beta_true: np.ndarray
    sigma_used: float
    weights_used: np.ndarray
    signal: np.ndarray = field(repr=False)

    @property
    def noise_to_signal(self) -> float:
        return self.sigma_used**2 / self.signal.var()


def innovation_cov(K: int, sigma_eps: float) -> np.ndarray:
    return linalg.toeplitz(sigma_eps ** np.arange(K, dtype=float))


def generate_dataset(cfg: DgpConfig, rng: np.random.Generator) -> SimulatedDataset:
    """Simulate T + n_holdout low-frequency periods of a MIDAS regression."""
    beta = np.asarray(cfg.beta_true, dtype=float)
    if not np.any(beta):
        raise ValueError("degenerate signal: beta_true is identically zero")
    n_low = cfg.T + cfg.n_holdout
    head = max(0, cfg.C - cfg.m)
    n_hf = head + cfg.m * n_low
    total = cfg.hf_burn_in + n_hf
    cov = innovation_cov(cfg.K, cfg.sigma_eps)
    chol = np.linalg.cholesky(cov)
    assert np.all(np.diag(chol) > 0), "innovation covariance not positive definite"
    eps = chol @ rng.standard_normal((cfg.K, total))
    if cfg.predictor_process == "ar1":
        start = cfg.mu / (1 - cfg.rho)
        zi = np.full((cfg.K, 1), cfg.rho * start)
        x, _ = signal.lfilter([1.0], [1.0, -cfg.rho], cfg.mu + eps, axis=1, zi=zi)
    else:
        x = eps
    x = x[:, cfg.hf_burn_in:]
    w = weight_scheme(cfg.weight_scheme, cfg.C)
    panel0 = MixedFreqPanel(y=np.zeros(n_low), x=x, m=cfg.m, C=cfg.C, h=0.0, head=head)
    windows = panel0.lag_windows(np.arange(n_low))          # (n, K, C)
    sig = cfg.alpha + np.einsum("nkc,c,k->n", windows, w, beta)
    if cfg.error_sd is not None:
        sigma = float(cfg.error_sd)
    else:
        var = sig.var()
        if var <= 0:
            raise ValueError("degenerate signal: zero variance")
        sigma = float(np.sqrt(cfg.noise_to_signal * var))
    y = sig + sigma * rng.standard_normal(n_low)
    panel = MixedFreqPanel(y=y, x=x, m=cfg.m, C=cfg.C, h=0.0, head=head)
    return SimulatedDataset(panel=panel, beta_true=beta, sigma_used=sigma,
                            weights_used=w, signal=sig)


# ---------------------------------------------------------------------------
# fitting pipeline

MODEL_KINDS = ("agl", "agl_ss", "al")


@dataclass(frozen=True)
class ModelSpec:
    """Model family, Almon basis and selection rule for one fit.

    ``al`` is the adaptive lasso: the AGL sampler with one coefficient per
    penalty group.  Selection defaults to the credible-interval rule for
    AGL/AL and the posterior-median rule for AGL-SS.
    """
    model: str = "agl_ss"
    p: int = 3
    r: int = 2
    level: float = 0.95
    selection: str | None = None        # "credible_interval" | "posterior_median"

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODEL_KINDS}")
        if self.selection not in (None, "credible_interval", "posterior_median"):
            raise ValueError(f"unknown selection rule {self.selection!r}")
        if self.selection == "posterior_median" and self.model != "agl_ss":
            raise ValueError("posterior-median selection needs the spike-and-slab model")

    @property
    def sampler(self) -> str:
        return "agl_ss" if self.model == "agl_ss" else "agl"

    @property
    def grouping(self) -> str:
        return "single" if self.model == "al" else "predictor"

    @property
    def rule(self) -> str:
        if self.selection is not None:
            return self.selection
        return "posterior_median" if self.model == "agl_ss" else "credible_interval"


@dataclass
class FitResult:
    spec: ModelSpec
    basis: AlmonBasis
    design: DesignMatrix
    draws: PosteriorDraws = field(repr=False)
    beta_draws: np.ndarray = field(repr=False)
    selection: SelectionReport


def select(spec: ModelSpec, draws: PosteriorDraws, beta: np.ndarray) -> SelectionReport:
    if spec.rule == "posterior_median":
        return select_posterior_median(draws.theta, draws.predictor_offsets, beta_draws=beta)
    return select_credible_interval(beta, spec.level)


def fit_panel(panel: MixedFreqPanel, spec: ModelSpec, hp: Hyperparams, schedule: Schedule,
              rng: np.random.Generator, sa_cfg: SaConfig | None = None, unpenalized=None,
              trace_every: int = 0) -> FitResult:
    """Build the standardized design, run the chain and apply the selection rule."""
    basis = almon_basis(spec.p, panel.C, spec.r)
    design = build_design(panel, basis, unpenalized=unpenalized, grouping=spec.grouping)
    draws = run_chain(spec.sampler, design, hp, schedule, rng, sa_cfg=sa_cfg,
                      trace_every=trace_every)
    beta = recover_slopes(draws.theta, design, basis)
    return FitResult(spec=spec, basis=basis, design=design, draws=draws, beta_draws=beta,
                     selection=select(spec, draws, beta))


# ---------------------------------------------------------------------------
# Monte Carlo harness

@dataclass
class ReplicationResult:
    index: int
    beta_draws: np.ndarray | None = field(default=None, repr=False)
    included: np.ndarray | None = None
    forecast: ForecastRecord | None = field(default=None, repr=False)
    sigma_used: float = float("nan")
    n_restarts: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class MonteCarloResult:
    cfg: DgpConfig
    spec: ModelSpec
    replications: list[ReplicationResult]
    metrics: MetricsReport | None
    scores: ScoreTable | None

    @property
    def n_failures(self) -> int:
        return sum(not r.ok for r in self.replications)

    @property
    def sigma_bar(self) -> float:
        return float(np.nanmean([r.sigma_used for r in self.replications]))

    def summary(self) -> dict:
        out = {"model": self.spec.model, "R": len(self.replications),
               "failures": self.n_failures, "sigma_bar": self.sigma_bar}
        if self.metrics is not None:
            out.update(self.metrics.to_dict())
        if self.scores is not None:
            name = self.spec.model
            out.update(rmsfe=self.scores.rmsfe[name], avg_log_score=self.scores.avg_log_score[name],
                       avg_crps=self.scores.avg_crps[name])
        return out


def run_replication(index: int, cfg: DgpConfig, spec: ModelSpec, hp: Hyperparams,
                    schedule: Schedule, seed: int, sa_cfg: SaConfig | None = None
                    ) -> ReplicationResult:
    """Generate, fit on the first T periods, select and forecast period T.

    Replication ``index`` owns the stream RngHandle(seed, index), so results do
    not depend on R or on the worker layout.
    """
    rng = RngHandle(seed, index).generator()
    out = ReplicationResult(index=index)
    try:
        ds = generate_dataset(cfg, rng)
        out.sigma_used = ds.sigma_used
        full = ds.panel
        train = MixedFreqPanel(y=full.y[:cfg.T], x=full.x, m=full.m, C=full.C, h=0.0,
                               head=full.head)
        fit = fit_panel(train, spec, hp, schedule, rng, sa_cfg)
        out.beta_draws = fit.beta_draws
        out.included = fit.selection.included
        out.n_restarts = fit.draws.n_restarts
        if cfg.n_holdout > 0:
            out.forecast = forecast_period(fit.draws, full, fit.basis, cfg.T, rng,
                                           realized=float(full.y[cfg.T]))
    except (SamplerError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.warning("replication %d failed: %s", index, exc)
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def _replication_task(args):
    return run_replication(*args)


def aggregate(cfg: DgpConfig, spec: ModelSpec, reps: list[ReplicationResult]) -> MonteCarloResult:
    good = [r for r in reps if r.ok]
    metrics = None
    scores = None
    if good:
        metrics = compute_metrics([r.beta_draws for r in good], cfg.beta_true,
                                  [r.included for r in good])
        fc = [r.forecast for r in good if r.forecast is not None]
        if fc:
            scores = score_forecasts({spec.model: fc}, dmw_losses=())
    return MonteCarloResult(cfg=cfg, spec=spec, replications=reps, metrics=metrics, scores=scores)


def run_monte_carlo(cfg: DgpConfig, spec: ModelSpec | str, hp: Hyperparams, schedule: Schedule,
                    R: int, workers: int = 1, seed: int | None = None,
                    sa_cfg: SaConfig | None = None, progress=None) -> MonteCarloResult:
    """R independent replications, optionally spread over a process pool.

    Per-replication failures are recorded on the result rather than raised.
    ``seed`` defaults to ``cfg.seed``.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if isinstance(spec, str):
        spec = ModelSpec(model=spec)
    seed = cfg.seed if seed is None else seed
    tasks = [(r, cfg, spec, hp, schedule, seed, sa_cfg) for r in range(R)]
    reps: list[ReplicationResult] = []
    if workers <= 1:
        for t in tasks:
            reps.append(_replication_task(t))
            if progress is not None:
                progress(reps[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rep in pool.map(_replication_task, tasks):
                reps.append(rep)
                if progress is not None:
                    progress(rep)
    return aggregate(cfg, spec, reps)
