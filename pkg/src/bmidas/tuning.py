"""Empirical-Bayes penalty tuning by stochastic approximation.

The log squared penalty omega_j = log(lambda_j) moves along the gradient of the
tau_j^2 prior, H_j = (g_j + 1) - exp(2 omega_j) tau_j^2, with Robbins-Monro
steps 1/s**q.  Stabilization is truncation on random boundaries: a step that
leaves the active compact set [max(-kappa-1, -c), kappa+1], or moves further
than e(s), is rejected and the iterate restarts inside the old set.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SaConfig:
    q: float = 0.8
    e_bar: float = 3.0
    alpha_e: float = 0.1
    c_bound: float = 5.0
    omega_init: float = 0.0
    # sigma^2 on restart: "conditional" (given theta = 0) or "prior"
    restart_sigma2: str = "conditional"

    def __post_init__(self):
        if not 0.5 < self.q < 1:
            raise ValueError(f"step exponent q must lie in (0.5, 1), got {self.q}")
        if self.c_bound <= 0:
            raise ValueError("c_bound must be positive")
        if self.e_bar < 1:
            raise ValueError("e_bar must be >= 1")
        if self.restart_sigma2 not in ("conditional", "prior"):
            raise ValueError(f"unknown restart_sigma2 {self.restart_sigma2!r}")


@dataclass(frozen=True)
class SaState:
    omega: np.ndarray
    kappa: int = 0
    nu: int = 0
    sigma_count: int = 0
    restarted: bool = False

    @classmethod
    def initial(cls, G: int, cfg: SaConfig) -> "SaState":
        return cls(omega=np.full(G, float(cfg.omega_init)))


def lambda_of_omega(omega) -> np.ndarray:
    """Squared group penalties lambda_j^2 = exp(2 omega_j)."""
    return np.exp(2.0 * np.asarray(omega, dtype=float))


def step_size(s: int, q: float) -> float:
    return 1.0 / s**q


def step_bound(sigma_count: int, e_bar: float, alpha_e: float) -> float:
    """Maximal accepted increment e(s); non-increasing from e_bar toward 1."""
    if sigma_count < 1:
        return e_bar
    return e_bar + (1.0 - e_bar) * (1.0 - sigma_count ** (-alpha_e))


def compact_set(kappa: int, c_bound: float) -> tuple[float, float]:
    return max(-kappa - 1.0, -c_bound), kappa + 1.0


def sa_gradient(omega, tau2, group_sizes) -> np.ndarray:
    return (np.asarray(group_sizes) + 1.0) - lambda_of_omega(omega) * np.asarray(tau2)


def sa_update(sa: SaState, tau2_new, group_sizes, cfg: SaConfig,
              rng: np.random.Generator) -> SaState:
    """One stabilized SA step.  ``restarted`` on the result signals that the
    caller must re-draw the chain parameters from their priors."""
    a = step_size(sa.sigma_count + 1, cfg.q)
    cand = sa.omega + a * sa_gradient(sa.omega, tau2_new, group_sizes)
    lo, hi = compact_set(sa.kappa, cfg.c_bound)
    e = step_bound(sa.sigma_count, cfg.e_bar, cfg.alpha_e)
    over = cand >= hi
    under = cand < lo
    jump = np.abs(cand - sa.omega) > e
    if not (over.any() or under.any() or jump.any()):
        return SaState(omega=cand, kappa=sa.kappa, nu=sa.nu + 1,
                       sigma_count=sa.sigma_count + 1, restarted=False)
    # restart: redraw offending components between the old iterate and the
    # boundary they crossed (or were heading to); others keep the old value
    toward_hi = over | (jump & ~under & (cand > sa.omega))
    bad = over | under | jump
    target = np.where(toward_hi, hi, lo)
    left = np.minimum(sa.omega, target)
    right = np.maximum(sa.omega, target)
    fresh = left + (right - left) * rng.random(sa.omega.shape[0])
    omega = np.where(bad, fresh, sa.omega)
    return SaState(omega=omega, kappa=sa.kappa + 1, nu=0,
                   sigma_count=sa.sigma_count + 1, restarted=True)


def in_active_set(sa: SaState, cfg: SaConfig) -> bool:
    lo, hi = compact_set(sa.kappa, cfg.c_bound)
    return bool(np.all(sa.omega >= lo) and np.all(sa.omega <= hi))


__all__ = ["SaConfig", "SaState", "sa_update", "lambda_of_omega", "step_size",
           "step_bound", "compact_set", "sa_gradient", "in_active_set"]
