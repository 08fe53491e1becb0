"""Almon lag bases, frequency alignment and standardized MIDAS design matrices.

Alignment convention: ``panel.x`` holds ``head`` high-frequency observations
before the first low-frequency period, followed by ``m`` observations per
period.  The last sub-period of low-frequency period ``t`` is lag 0 of that
period when ``h = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

RESTRICTION_KINDS = ("none", "tail_zero", "tail_and_slope_zero")


class DesignError(ValueError):
    """Invalid basis or design specification."""


class AlignmentError(DesignError):
    """Not enough high-frequency history to build the requested rows."""


@dataclass(frozen=True)
class MixedFreqPanel:
    y: np.ndarray
    x: np.ndarray
    m: int
    C: int
    h: float = 0.0
    head: int = 0
    names: tuple[str, ...] | None = None
    periods: tuple | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)
        if self.m < 1 or self.C < 1:
            raise DesignError(f"need m >= 1 and C >= 1, got m={self.m}, C={self.C}")
        steps = self.h * self.m
        if self.h < 0 or abs(steps - round(steps)) > 1e-9:
            raise DesignError(f"horizon h={self.h} is not on the 1/m grid (m={self.m})")
        if self.head < 0:
            raise DesignError("head must be non-negative")
        if self.names is None:
            object.__setattr__(self, "names", tuple(f"x{k + 1}" for k in range(x.shape[0])))
        elif len(self.names) != x.shape[0]:
            raise DesignError("names must have one entry per predictor")

    @property
    def K(self) -> int:
        return self.x.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[0]

    @property
    def shift(self) -> int:
        """Forecast horizon in high-frequency steps."""
        return int(round(self.h * self.m))

    def lag0_index(self, t) -> np.ndarray:
        """Column of ``x`` holding lag 0 for low-frequency period(s) ``t``."""
        return self.head + self.m * np.asarray(t) + self.m - 1 - self.shift

    def first_usable(self) -> int:
        """Smallest period index with a full window of C lags."""
        need = self.C - 1 - (self.head + self.m - 1 - self.shift)
        return max(0, math.ceil(need / self.m))

    def lag_windows(self, periods: Sequence[int]) -> np.ndarray:
        """Raw lag windows, shape (len(periods), K, C); column c is lag c."""
        periods = np.asarray(periods, dtype=int)
        last = self.lag0_index(periods)
        if periods.size and last.min() - (self.C - 1) < 0:
            raise AlignmentError(
                f"insufficient high-frequency history; first usable t = {self.first_usable()}")
        if periods.size and last.max() >= self.x.shape[1]:
            raise AlignmentError(
                f"high-frequency data end at column {self.x.shape[1] - 1}, "
                f"period {periods.max()} needs column {last.max()}")
        idx = last[:, None] - np.arange(self.C)[None, :]
        return np.transpose(self.x[:, idx], (1, 0, 2))


@dataclass(frozen=True)
class AlmonBasis:
    p: int
    r: int
    C: int
    Q: np.ndarray
    coefs: np.ndarray  # (p-r+1, p+1): monomial coefficients of each basis row

    @property
    def restriction_kind(self) -> str:
        return RESTRICTION_KINDS[self.r]

    @property
    def size(self) -> int:
        return self.p - self.r + 1

    def weight_curve(self, theta, c=None) -> np.ndarray:
        """B(c; theta) for free coefficients ``theta`` (defaults to c = 0..C-1)."""
        c = np.arange(self.C, dtype=float) if c is None else np.asarray(c, dtype=float)
        mono = np.asarray(theta, dtype=float) @ self.coefs
        return np.polynomial.polynomial.polyval(c, mono)

    def weight_slope(self, theta, c) -> np.ndarray:
        mono = np.asarray(theta, dtype=float) @ self.coefs
        return np.polynomial.polynomial.polyval(
            np.asarray(c, dtype=float), np.polynomial.polynomial.polyder(mono))


def _restriction_rows(p: int, r: int, a: int) -> list[list[Fraction]]:
    rows = []
    if r >= 1:
        rows.append([Fraction(a) ** i for i in range(p + 1)])
    if r >= 2:
        rows.append([Fraction(0)] + [i * Fraction(a) ** (i - 1) for i in range(1, p + 1)])
    return rows


def _eliminate(R: list[list[Fraction]], p: int) -> list[list[Fraction]]:
    """Monomial coefficients of a basis of {theta : R theta = 0}.

    The first r coefficients are solved in terms of the free ones theta_r..theta_p.
    """
    r = len(R)
    M = [row[:] for row in R]
    for col in range(r):
        piv = next(i for i in range(col, r) if M[i][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for i in range(r):
            if i != col and M[i][col] != 0:
                f = M[i][col]
                M[i] = [vi - f * vc for vi, vc in zip(M[i], M[col])]
    basis = []
    for free in range(r, p + 1):
        coef = [Fraction(0)] * (p + 1)
        coef[free] = Fraction(1)
        for d in range(r):
            coef[d] = -M[d][free]
        basis.append(coef)
    return basis


def almon_basis(p: int, C: int, r: int = 0) -> AlmonBasis:
    """Almon weighting matrix Q of shape (p-r+1, C).

    ``r = 1`` forces B(C-1) = 0, ``r = 2`` also forces B'(C-1) = 0.  The
    restriction system is solved in exact rational arithmetic; for p = 3,
    r = 2 the rows are (c-a)^2 and (c-a)^2 (c+2a) with a = C-1.
    """
    if p < 1:
        raise DesignError(f"polynomial degree must be >= 1, got {p}")
    if r < 0 or r > 2:
        raise DesignError(f"restriction count must be 0, 1 or 2, got {r}")
    if r > p:
        raise DesignError(f"invalid restriction: r={r} exceeds degree p={p}")
    if C < 2:
        raise DesignError(f"underdetermined basis: need C >= 2, got C={C}")
    a = C - 1
    if r == 0:
        coefs = [[Fraction(int(i == j)) for j in range(p + 1)] for i in range(p + 1)]
    else:
        coefs = _eliminate(_restriction_rows(p, r, a), p)
    Q = np.array([[float(sum(cf * Fraction(c) ** i for i, cf in enumerate(row)))
                   for c in range(C)] for row in coefs])
    return AlmonBasis(p=p, r=r, C=C, Q=Q, coefs=np.array(coefs, dtype=float))


@dataclass(frozen=True)
class DesignMatrix:
    Z: np.ndarray
    y: np.ndarray
    group_offsets: tuple[tuple[int, int], ...]
    col_means: np.ndarray
    col_sds: np.ndarray
    y_mean: float
    unpenalized_cols: tuple[int, ...] = ()
    periods: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    # column blocks per predictor; equal to group_offsets unless grouping="single"
    predictor_offsets: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if self.predictor_offsets is None:
            object.__setattr__(self, "predictor_offsets", self.group_offsets)

    @property
    def T(self) -> int:
        return self.Z.shape[0]

    @property
    def G(self) -> int:
        return len(self.group_offsets)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.array([g for _, g in self.group_offsets], dtype=int)

    @property
    def n_penalized(self) -> int:
        return int(self.group_sizes.sum())

    def standardize(self, raw: np.ndarray) -> np.ndarray:
        """Apply the frozen fit-time column statistics to new raw rows."""
        return (np.atleast_2d(raw) - self.col_means) / self.col_sds


def raw_regressors(panel: MixedFreqPanel, basis: AlmonBasis, periods,
                   unpenalized=None) -> np.ndarray:
    """Untransformed design rows: z_{k,t} = Q x_{k,t-h} stacked over k."""
    if basis.C != panel.C:
        raise DesignError(f"basis lag window {basis.C} != panel C {panel.C}")
    win = panel.lag_windows(periods)                     # (n, K, C)
    z = np.einsum("nkc,ic->nki", win, basis.Q).reshape(len(periods), -1)
    if unpenalized is not None:
        z = np.hstack([z, np.atleast_2d(np.asarray(unpenalized, dtype=float))])
    return z


def build_design(panel: MixedFreqPanel, basis: AlmonBasis, unpenalized=None,
                 standardize: bool = True, grouping: str = "predictor") -> DesignMatrix:
    """Aligned, centered and scaled design.  Rows lacking C lags are dropped.

    ``unpenalized`` is an optional (T, q) matrix aligned with ``panel.y``; its
    columns are appended after the MIDAS groups, standardized the same way,
    and excluded from selection.  ``grouping="single"`` puts every coefficient
    in its own penalty group (adaptive lasso layout).
    """
    start = panel.first_usable()
    if start >= panel.T:
        raise AlignmentError(
            f"insufficient high-frequency history; first usable t = {start} "
            f"but only {panel.T} periods")
    periods = np.arange(start, panel.T)
    extra = None
    if unpenalized is not None:
        extra = np.asarray(unpenalized, dtype=float).reshape(panel.T, -1)[start:]
    raw = raw_regressors(panel, basis, periods, extra)
    y = panel.y[start:]
    g = basis.size
    blocks = tuple((k * g, g) for k in range(panel.K))
    if grouping == "predictor":
        offsets = blocks
    elif grouping == "single":
        offsets = tuple((j, 1) for j in range(panel.K * g))
    else:
        raise DesignError(f"unknown grouping {grouping!r}")
    n_unpen = 0 if extra is None else extra.shape[1]
    unpen_cols = tuple(range(panel.K * g, panel.K * g + n_unpen))
    if standardize:
        means = raw.mean(axis=0)
        sds = raw.std(axis=0)
        if np.any(sds <= 0):
            bad = np.flatnonzero(sds <= 0).tolist()
            raise DesignError(f"constant design columns {bad} cannot be standardized")
        y_mean = float(y.mean())
    else:
        means = np.zeros(raw.shape[1])
        sds = np.ones(raw.shape[1])
        y_mean = 0.0
    return DesignMatrix(Z=(raw - means) / sds, y=y - y_mean, group_offsets=offsets,
                        col_means=means, col_sds=sds, y_mean=y_mean,
                        unpenalized_cols=unpen_cols, periods=periods,
                        predictor_offsets=blocks)


def recover_slopes(theta_draws: np.ndarray, design: DesignMatrix,
                   basis: AlmonBasis) -> np.ndarray:
    """Per-draw overall slopes beta_k = theta_k' Q iota_C on the original scale."""
    theta = np.atleast_2d(theta_draws)
    if theta.shape[1] < design.n_penalized:
        raise DesignError("theta draws shorter than the penalized design")
    qi = basis.Q.sum(axis=1)
    blocks = design.predictor_offsets
    out = np.empty((theta.shape[0], len(blocks)))
    for k, (start, size) in enumerate(blocks):
        if size != basis.size:
            raise DesignError(f"predictor {k} has {size} columns, basis has {basis.size}")
        th = theta[:, start:start + size] / design.col_sds[start:start + size]
        out[:, k] = th @ qi
    return out
