"""Post-chain summaries: predictor selection and Monte Carlo accuracy metrics.

Two selection rules are provided.  The credible-interval rule drops predictor
k when the equal-tailed interval of its slope draws covers zero; the
posterior-median rule (spike-and-slab draws only) drops a group when it is
exactly zero in more than half of the draws, which is the same event as a
zero coordinatewise posterior median.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SelectionReport:
    included: np.ndarray                 # int vector, one entry per predictor
    criterion: str                       # "credible_interval" or "posterior_median"
    level: float | None = None
    inclusion_prob: np.ndarray | None = None
    point: np.ndarray | None = None      # slope point estimate per predictor
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        inc = np.asarray(self.included)
        if not np.all((inc == 0) | (inc == 1)):
            raise ValueError("included must be a 0/1 vector")
        if self.level is not None and not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")

    @property
    def active_set(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.included))

    def to_dict(self) -> dict:
        out = {}
        for key, val in asdict(self).items():
            out[key] = val.tolist() if isinstance(val, np.ndarray) else val
        return out


def select_credible_interval(beta_draws, level: float = 0.95) -> SelectionReport:
    """Include predictor k iff 0 lies outside its equal-tailed ``level`` interval."""
    beta = np.atleast_2d(np.asarray(beta_draws, dtype=float))
    if beta.shape[0] < 2:
        raise ValueError("need at least 2 draws")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    lo, hi = np.quantile(beta, [(1 - level) / 2, (1 + level) / 2], axis=0)
    included = ((lo > 0) | (hi < 0)).astype(int)
    return SelectionReport(included=included, criterion="credible_interval", level=level,
                           point=beta.mean(axis=0), lower=lo, upper=hi)


def _group_zero(theta: np.ndarray, offsets) -> np.ndarray:
    return np.stack([np.all(theta[:, s:s + g] == 0.0, axis=1) for s, g in offsets], axis=1)


def select_posterior_median(theta_draws, group_offsets, beta_draws=None,
                            gamma_draws=None) -> SelectionReport:
    """Majority rule on exact zeros of spike-and-slab draws.

    Group j is excluded iff it is exactly zero in more than half of the draws.
    ``group_offsets`` are the per-predictor column blocks.  When slope draws
    are given, the point estimate is their coordinatewise median.
    """
    theta = np.atleast_2d(np.asarray(theta_draws, dtype=float))
    if theta.shape[0] < 1:
        raise ValueError("need at least 1 draw")
    if gamma_draws is not None:
        zero = np.asarray(gamma_draws) == 0
    else:
        zero = _group_zero(theta, group_offsets)
    p_zero = zero.mean(axis=0)
    included = (p_zero <= 0.5).astype(int)
    point = None
    if beta_draws is not None:
        point = np.median(np.atleast_2d(np.asarray(beta_draws, dtype=float)), axis=0)
    return SelectionReport(included=included, criterion="posterior_median",
                           inclusion_prob=1.0 - p_zero, point=point)


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    var: float
    bias2: float
    mse_active: float
    mse_inactive: float
    tpr: float
    fpr: float
    mcc: float
    n_replications: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(selected, truth) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) of a 0/1 selection against the true active set."""
    s = np.asarray(selected).astype(bool)
    t = np.asarray(truth).astype(bool)
    return (int(np.sum(s & t)), int(np.sum(s & ~t)), int(np.sum(~s & ~t)),
            int(np.sum(~s & t)))


def matthews(tp: int, fp: int, tn: int, fn: int) -> float:
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(den)


def selection_rates(selected, truth) -> tuple[float, float, float]:
    """TPR, FPR and MCC of one selection; a rate with empty denominator is 0."""
    tp, fp, tn, fn = confusion(selected, truth)
    tpr = tp / (tp + fn) if tp + fn else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    return tpr, fpr, matthews(tp, fp, tn, fn)


def mse_decomposition(beta_draws: Sequence[np.ndarray], beta_true, centre: str = "mean"):
    """Per-predictor VAR and BIAS^2 arrays (length K) over R replications.

    ``beta_draws[r]`` is an (S, K) array.  VAR_k = (1/RS) sum_r sum_s
    (b_rsk - E_r b_k)^2 and BIAS2_k = (1/R) sum_r (E_r b_k - beta_k)^2, where
    E_r is the within-replication mean.  With ``centre="median"`` the
    replication's point estimate is its posterior median and VAR is taken
    around it (used for spike-and-slab fits, whose point estimate is the
    median); MSE = VAR + BIAS^2 holds exactly for the mean centre only.
    """
    truth = np.asarray(beta_true, dtype=float)
    var = np.zeros_like(truth)
    bias2 = np.zeros_like(truth)
    R = len(beta_draws)
    if R == 0:
        raise ValueError("no replications")
    for b in beta_draws:
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if b.shape[1] != truth.shape[0]:
            raise ValueError(f"draws have {b.shape[1]} predictors, truth has {truth.shape[0]}")
        est = b.mean(axis=0) if centre == "mean" else np.median(b, axis=0)
        var += np.mean((b - est) ** 2, axis=0)
        bias2 += (est - truth) ** 2
    return var / R, bias2 / R


def compute_metrics(beta_draws: Sequence[np.ndarray], beta_true, selections,
                    centre: str = "mean") -> MetricsReport:
    """Average accuracy and selection metrics over replications.

    TPR/FPR/MCC are computed per replication and averaged.  The MSE split
    weights the active and inactive sets by their share of the K predictors.
    """
    truth = np.asarray(beta_true, dtype=float)
    active = truth != 0
    var_k, bias2_k = mse_decomposition(beta_draws, truth, centre)
    mse_k = var_k + bias2_k
    var = float(var_k.mean())
    bias2 = float(bias2_k.mean())
    mse_a = float(mse_k[active].mean()) if active.any() else 0.0
    mse_i = float(mse_k[~active].mean()) if (~active).any() else 0.0
    sels = [np.asarray(s.included if isinstance(s, SelectionReport) else s) for s in selections]
    if len(sels) != len(beta_draws):
        raise ValueError("need one selection per replication")
    rates = np.array([selection_rates(s, active) for s in sels])
    return MetricsReport(mse=var + bias2, var=var, bias2=bias2, mse_active=mse_a,
                         mse_inactive=mse_i, tpr=float(rates[:, 0].mean()),
                         fpr=float(rates[:, 1].mean()), mcc=float(rates[:, 2].mean()),
                         n_replications=len(sels))


__all__ = ["SelectionReport", "MetricsReport", "select_credible_interval",
           "select_posterior_median", "compute_metrics", "mse_decomposition",
           "confusion", "matthews", "selection_rates"]
