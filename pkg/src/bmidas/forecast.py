"""Posterior predictive forecasts and probabilistic forecast scoring.

Predictive draws integrate over every retained Gibbs state, penalties
included: y^(s) = z' theta^(s) + sigma^(s) eps^(s) + y_mean.  Scores:

* CRPS, energy-form sample estimator, O(S log S) via sorting;
* log score, Gaussian kernel density with Silverman's bandwidth;
* RMSFE of the predictive mean;
* a one-sided Diebold-Mariano-West test with Newey-West variance and the
  Harvey-Leybourne-Newbold small-sample factor.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .design import AlmonBasis, MixedFreqPanel, raw_regressors
from .gibbs import PosteriorDraws

# returned by log_score when the draws are constant (zero bandwidth)
LS_CAP = 1e6


@dataclass(frozen=True)
class ForecastRecord:
    target_date: object
    horizon: float
    predictive_draws: np.ndarray = field(repr=False)
    realized: float | None = None

    @property
    def point(self) -> float:
        return float(np.mean(self.predictive_draws))

    @property
    def error(self) -> float:
        if self.realized is None:
            raise ValueError("no realized value")
        return float(self.realized) - self.point


def standardized_row(draws: PosteriorDraws, raw) -> np.ndarray:
    """Standardize a raw design row with the fit-time statistics stored on ``draws``."""
    if draws.col_means is None or draws.col_sds is None:
        raise ValueError("posterior draws carry no standardization statistics")
    raw = np.asarray(raw, dtype=float).ravel()
    if raw.shape[0] != draws.col_means.shape[0]:
        raise ValueError(f"row has {raw.shape[0]} entries, design has {draws.col_means.shape[0]}")
    return (raw - draws.col_means) / draws.col_sds


def predictive_draws(draws: PosteriorDraws, z_new, rng: np.random.Generator) -> np.ndarray:
    """One predictive draw per retained state, on the original y scale.

    ``z_new`` must already be standardized with the fit-time statistics.
    """
    if draws.col_means is None or draws.col_sds is None:
        raise ValueError("posterior draws carry no standardization statistics")
    z = np.asarray(z_new, dtype=float).ravel()
    if z.shape[0] != draws.theta.shape[1]:
        raise ValueError(f"z_new has {z.shape[0]} entries, theta has {draws.theta.shape[1]}")
    mean = draws.theta @ z
    eps = rng.standard_normal(mean.shape[0])
    return mean + np.sqrt(draws.sigma2) * eps + draws.y_mean


def forecast_period(draws: PosteriorDraws, panel: MixedFreqPanel, basis: AlmonBasis,
                    period: int, rng: np.random.Generator, unpenalized_row=None,
                    realized: float | None = None, target_date=None) -> ForecastRecord:
    """Direct forecast for low-frequency ``period`` from the panel's lag window.

    The period may lie beyond ``panel.y`` as long as its high-frequency
    regressors are observed.
    """
    extra = None if unpenalized_row is None else np.atleast_2d(unpenalized_row)
    raw = raw_regressors(panel, basis, [period], extra)[0]
    z = standardized_row(draws, raw)
    if realized is None and period < panel.T:
        realized = float(panel.y[period])
    if target_date is None:
        target_date = panel.periods[period] if panel.periods is not None else period
    return ForecastRecord(target_date=target_date, horizon=panel.h,
                          predictive_draws=predictive_draws(draws, z, rng), realized=realized)


def crps(draws, realized: float) -> float:
    """(1/S) sum |X_s - y| - (1/2S^2) sum_s sum_t |X_s - X_t|.

    The double sum equals 2 sum_k x_(k) (2k - S - 1) over the sorted sample.
    """
    x = np.asarray(draws, dtype=float).ravel()
    S = x.shape[0]
    if S < 2:
        raise ValueError("CRPS needs at least 2 draws")
    xs = np.sort(x)
    k = np.arange(1, S + 1)
    spread = np.dot(xs, 2 * k - S - 1) / S**2
    return max(float(np.mean(np.abs(x - realized)) - spread), 0.0)


def crps_pairwise(draws, realized: float) -> float:
    """O(S^2) reference form of :func:`crps`."""
    x = np.asarray(draws, dtype=float).ravel()
    S = x.shape[0]
    return float(np.mean(np.abs(x - realized))
                 - np.abs(x[:, None] - x[None, :]).sum() / (2 * S**2))


def crps_normal(mu: float, sd: float, y: float) -> float:
    """Closed-form CRPS of N(mu, sd^2) at y."""
    z = (y - mu) / sd
    return sd * (z * (2 * stats.norm.cdf(z) - 1) + 2 * stats.norm.pdf(z) - 1 / math.sqrt(math.pi))


def silverman_bandwidth(draws) -> float:
    x = np.asarray(draws, dtype=float).ravel()
    return 1.06 * float(np.std(x, ddof=1)) * x.shape[0] ** (-0.2)


def log_score(draws, realized: float) -> float:
    """Log of a Gaussian kernel density estimate of the draws at ``realized``."""
    x = np.asarray(draws, dtype=float).ravel()
    S = x.shape[0]
    if S < 30:
        raise ValueError("log score needs at least 30 draws")
    bw = silverman_bandwidth(x)
    if not bw > 0:
        warnings.warn("constant predictive draws: zero KDE bandwidth, returning capped "
                      "log score", RuntimeWarning, stacklevel=2)
        return LS_CAP if np.all(x == realized) else -LS_CAP
    u = (realized - x) / bw
    return float(special.logsumexp(-0.5 * u * u) - math.log(S * bw) - 0.5 * math.log(2 * math.pi))


def rmsfe(point, realized) -> float:
    e = np.asarray(realized, dtype=float) - np.asarray(point, dtype=float)
    return float(np.sqrt(np.mean(e * e)))


def newey_west_variance(d, lags: int) -> float:
    """Bartlett-weighted long-run variance of ``d`` (1/n normalization)."""
    d = np.asarray(d, dtype=float)
    n = d.shape[0]
    u = d - d.mean()
    v = u @ u / n
    for j in range(1, lags + 1):
        v += 2 * (1 - j / (lags + 1)) * (u[j:] @ u[:-j]) / n
    return float(v)


@dataclass(frozen=True)
class DmwResult:
    statistic: float
    pvalue: float
    mean_diff: float
    n: int
    horizon_steps: int
    alternative: str


def dmw_test(loss_a, loss_b, horizon_steps: int = 1, alternative: str = "less") -> DmwResult:
    """Test of equal predictive accuracy on d_t = loss_a,t - loss_b,t.

    ``alternative="less"`` is the hypothesis that model a has lower expected
    loss (p-value from the lower tail), ``"greater"`` the reverse.  The
    statistic uses the Newey-West variance with ``horizon_steps - 1`` lags,
    is scaled by the Harvey-Leybourne-Newbold factor and is referred to a
    Student t with n - 1 degrees of freedom.
    """
    a = np.asarray(loss_a, dtype=float).ravel()
    b = np.asarray(loss_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("loss sequences differ in length")
    n = a.shape[0]
    if n < 8:
        raise ValueError(f"DMW test needs n >= 8, got {n}")
    if horizon_steps < 1:
        raise ValueError("horizon_steps must be >= 1")
    if alternative not in ("less", "greater"):
        raise ValueError(f"unknown alternative {alternative!r}")
    d = a - b
    dbar = float(d.mean())
    h = horizon_steps
    if np.all(d == 0):
        return DmwResult(0.0, 0.5, 0.0, n, h, alternative)
    v = newey_west_variance(d, h - 1)
    if not v > 1e-300 or np.ptp(d) <= 1e-12 * np.abs(d).max():
        warnings.warn("degenerate loss differential (zero variance); p-value set to 1",
                      RuntimeWarning, stacklevel=2)
        return DmwResult(math.copysign(math.inf, dbar), 1.0, dbar, n, h, alternative)
    hln = math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
    stat = dbar / math.sqrt(v / n) * hln
    dist = stats.t(df=n - 1)
    p = dist.cdf(stat) if alternative == "less" else dist.sf(stat)
    return DmwResult(float(stat), float(p), dbar, n, h, alternative)


@dataclass
class ScoreTable:
    rmsfe: dict[str, float]
    avg_log_score: dict[str, float]
    avg_crps: dict[str, float]
    n_forecasts: dict[str, int]
    # (model_a, model_b, loss) -> p-value of "model_a more accurate than model_b"
    dmw_pvalues: dict[tuple[str, str, str], float] = field(default_factory=dict)

    @property
    def models(self) -> list[str]:
        return list(self.rmsfe)

    def relative_to(self, benchmark: str) -> dict[str, dict[str, float]]:
        """RMSFE and CRPS ratios and log-score differentials vs ``benchmark``."""
        if benchmark not in self.rmsfe:
            raise KeyError(f"unknown benchmark {benchmark!r}")
        out = {}
        for m in self.models:
            out[m] = {
                "rmsfe_ratio": self.rmsfe[m] / self.rmsfe[benchmark]
                if self.rmsfe[benchmark] > 0 else math.nan,
                "crps_ratio": self.avg_crps[m] / self.avg_crps[benchmark]
                if self.avg_crps[benchmark] > 0 else math.nan,
                "ls_diff": self.avg_log_score[m] - self.avg_log_score[benchmark],
            }
        return out

    def rows(self) -> list[dict]:
        return [{"model": m, "rmsfe": self.rmsfe[m], "avg_log_score": self.avg_log_score[m],
                 "avg_crps": self.avg_crps[m], "n_forecasts": self.n_forecasts[m]}
                for m in self.models]


LOSSES = ("squared_error", "crps", "neg_log_score")


def record_losses(records: list[ForecastRecord], loss: str) -> np.ndarray:
    if loss == "squared_error":
        return np.array([r.error**2 for r in records])
    if loss == "crps":
        return np.array([crps(r.predictive_draws, r.realized) for r in records])
    if loss == "neg_log_score":
        return np.array([-log_score(r.predictive_draws, r.realized) for r in records])
    raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def score_forecasts(records: dict[str, list[ForecastRecord]], horizon_steps: int = 1,
                    dmw_losses=("squared_error",), benchmark: str | None = None) -> ScoreTable:
    """Score each model's forecasts; DMW p-values against ``benchmark`` (all
    ordered pairs when None) for every loss in ``dmw_losses``."""
    rm, ls, cr, nf = {}, {}, {}, {}
    for name, recs in records.items():
        recs = [r for r in recs if r.realized is not None]
        if not recs:
            raise ValueError(f"model {name!r} has no forecasts with realized values")
        rm[name] = rmsfe([r.point for r in recs], [r.realized for r in recs])
        ls[name] = float(np.mean([log_score(r.predictive_draws, r.realized) for r in recs]))
        cr[name] = float(np.mean([crps(r.predictive_draws, r.realized) for r in recs]))
        nf[name] = len(recs)
    pv = {}
    names = list(records)
    pairs = [(a, benchmark) for a in names if a != benchmark] if benchmark else \
        [(a, b) for a in names for b in names if a != b]
    for a, b in pairs:
        ra = [r for r in records[a] if r.realized is not None]
        rb = [r for r in records[b] if r.realized is not None]
        if len(ra) != len(rb) or len(ra) < 8:
            continue
        for loss in dmw_losses:
            pv[(a, b, loss)] = dmw_test(record_losses(ra, loss), record_losses(rb, loss),
                                        horizon_steps).pvalue
    return ScoreTable(rmsfe=rm, avg_log_score=ls, avg_crps=cr, n_forecasts=nf, dmw_pvalues=pv)


__all__ = ["ForecastRecord", "ScoreTable", "DmwResult", "predictive_draws", "forecast_period",
           "standardized_row", "crps", "crps_pairwise", "crps_normal", "log_score",
           "silverman_bandwidth", "rmsfe", "newey_west_variance", "dmw_test",
           "score_forecasts", "record_losses", "LS_CAP"]
