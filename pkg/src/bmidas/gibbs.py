"""Block Gibbs samplers for the Bayesian MIDAS adaptive group lasso (AGL) and
its spike-and-slab variant (AGL-SS).

One sweep updates, in order: each theta_j, each tau_j^2, sigma^2, the group
penalties (stochastic approximation or Gamma full conditional) and, for the
spike-and-slab model, pi0.  The theta/tau/sigma^2 block is a numba kernel that
draws from the same :class:`numpy.random.Generator` as the Python side.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .design import DesignMatrix
from .tuning import SaConfig, SaState, sa_update

MODELS = ("agl", "agl_ss")
TUNING_MODES = ("stochastic_approximation", "full_bayes")


class SamplerError(RuntimeError):
    def __init__(self, msg: str, iteration: int | None = None):
        self.iteration = iteration
        if iteration is not None:
            msg = f"iteration {iteration}: {msg}"
        super().__init__(msg)


def default_beta_prior(G: int) -> tuple[float, float]:
    """Beta(c, d) prior on pi0: c = k G**v with k = v = 1 + 1/G, d = 1."""
    k = 1.0 + 1.0 / G
    return k * G**k, 1.0


@dataclass(frozen=True)
class Hyperparams:
    a1: float = 1.001
    b1: float = 0.001
    a2: float = 1.0
    b2: float = 1.0
    c: float | None = None
    d: float = 1.0
    tuning_mode: str = "stochastic_approximation"
    pi0_fixed: float | None = None

    def __post_init__(self):
        if self.a1 <= 1:
            raise ValueError(f"a1 must exceed 1, got {self.a1}")
        if min(self.b1, self.a2, self.b2, self.d) <= 0:
            raise ValueError("b1, a2, b2 and d must be positive")
        if self.tuning_mode not in TUNING_MODES:
            raise ValueError(f"unknown tuning_mode {self.tuning_mode!r}")
        if self.pi0_fixed is not None and not 0.0 <= self.pi0_fixed <= 1.0:
            raise ValueError("pi0_fixed must lie in [0, 1]")

    def beta_prior(self, G: int) -> tuple[float, float]:
        if self.c is None:
            return default_beta_prior(G)[0], self.d
        return self.c, self.d


@dataclass(frozen=True)
class Schedule:
    S: int
    burn_in: int = 0
    thin: int = 1

    def __post_init__(self):
        if self.S <= self.burn_in:
            raise ValueError(f"S={self.S} must exceed burn_in={self.burn_in}")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")

    @property
    def n_draws(self) -> int:
        return (self.S - self.burn_in) // self.thin


@dataclass
class ChainState:
    theta: np.ndarray
    tau2: np.ndarray
    sigma2: float
    lam: np.ndarray                # per-group penalty lambda_j (omega_j = log lambda_j)
    pi0: float = 0.5
    gamma: np.ndarray | None = None
    sa: SaState | None = None

    def copy(self) -> "ChainState":
        return ChainState(self.theta.copy(), self.tau2.copy(), float(self.sigma2),
                          self.lam.copy(), float(self.pi0),
                          None if self.gamma is None else self.gamma.copy(), self.sa)


def initial_state(design: DesignMatrix, model: str = "agl",
                  sa_cfg: SaConfig | None = None) -> ChainState:
    G = design.G
    sa = SaState.initial(G, sa_cfg) if sa_cfg is not None else None
    lam = np.exp(sa.omega) if sa is not None else np.ones(G)
    return ChainState(theta=np.zeros(design.Z.shape[1]), tau2=np.ones(G),
                      sigma2=float(np.var(design.y)), lam=lam, pi0=0.5,
                      gamma=np.zeros(G, dtype=np.int64) if model == "agl_ss" else None,
                      sa=sa)


@numba.njit(cache=True)
def _block_draw(ZtZ, Zty, theta, s0, g, inv_tau2, sigma, z, out):
    """Fill ``out`` with a draw of N(A^-1 C, sigma^2 A^-1); return
    (log|A|, C'A^-1 C), or (nan, nan) if A is not positive definite."""
    n = theta.shape[0]
    C = np.empty(g)
    for i in range(g):
        acc = Zty[s0 + i]
        for k in range(n):
            if k < s0 or k >= s0 + g:
                acc -= ZtZ[s0 + i, k] * theta[k]
        C[i] = acc
    L = np.zeros((g, g))
    logdet = 0.0
    for i in range(g):
        for k in range(i + 1):
            acc = ZtZ[s0 + i, s0 + k]
            if i == k:
                acc += inv_tau2
            for l in range(k):
                acc -= L[i, l] * L[k, l]
            if i == k:
                if not acc > 1e-300:
                    return np.nan, np.nan
                L[i, i] = math.sqrt(acc)
                logdet += 2.0 * math.log(L[i, i])
            else:
                L[i, k] = acc / L[k, k]
    # u = L^-1 C ; mean = L^-T u ; noise = L^-T z
    u = np.empty(g)
    quad = 0.0
    for i in range(g):
        acc = C[i]
        for l in range(i):
            acc -= L[i, l] * u[l]
        u[i] = acc / L[i, i]
        quad += u[i] * u[i]
    v = u + sigma * z
    for i in range(g - 1, -1, -1):
        acc = v[i]
        for l in range(i + 1, g):
            acc -= L[l, i] * out[l]
        out[i] = acc / L[i, i]
    return logdet, quad


@numba.njit(cache=True)
def _core_sweep(theta, tau2, gamma, lam, sigma2, pi0, Z, y, ZtZ, Zty,
                starts, sizes, unpen_start, unpen_size, spike, a1, b1, rng):
    """theta blocks, then tau^2, then sigma^2.  Returns (sigma2, status, group)."""
    G = starts.shape[0]
    sigma = math.sqrt(sigma2)
    for j in range(G):
        s0 = starts[j]
        g = sizes[j]
        z = np.empty(g)
        for i in range(g):
            z[i] = rng.standard_normal()
        draw = np.empty(g)
        logdet, quad = _block_draw(ZtZ, Zty, theta, s0, g, 1.0 / tau2[j], sigma, z, draw)
        if math.isnan(logdet):
            return sigma2, 1, j
        zero = False
        if spike:
            if pi0 >= 1.0:
                pi1 = 1.0
            elif pi0 <= 0.0:
                pi1 = 0.0
            else:
                log_slab = (math.log1p(-pi0) - 0.5 * g * math.log(tau2[j])
                            - 0.5 * logdet + quad / (2.0 * sigma2))
                log_spike = math.log(pi0)
                hi = max(log_slab, log_spike)
                pi1 = math.exp(log_spike - hi - math.log(
                    math.exp(log_slab - hi) + math.exp(log_spike - hi)))
            if pi1 >= 1.0:
                zero = True
            elif pi1 > 0.0:
                zero = rng.random() < pi1
        if zero:
            for i in range(g):
                theta[s0 + i] = 0.0
            gamma[j] = 0
        else:
            for i in range(g):
                theta[s0 + i] = draw[i]
            gamma[j] = 1
    if unpen_size > 0:
        z = np.empty(unpen_size)
        for i in range(unpen_size):
            z[i] = rng.standard_normal()
        draw = np.empty(unpen_size)
        logdet, quad = _block_draw(ZtZ, Zty, theta, unpen_start, unpen_size, 0.0,
                                   sigma, z, draw)
        if math.isnan(logdet):
            return sigma2, 1, G
        for i in range(unpen_size):
            theta[unpen_start + i] = draw[i]

    for j in range(G):
        s0 = starts[j]
        g = sizes[j]
        nrm2 = 0.0
        for i in range(g):
            nrm2 += theta[s0 + i] * theta[s0 + i]
        t2 = -1.0
        if nrm2 > 0.0:
            inv = rng.wald(lam[j] * sigma / math.sqrt(nrm2), lam[j] * lam[j])
            if inv > 0.0 and math.isfinite(inv):
                t2 = 1.0 / inv
        if t2 <= 0.0 or not math.isfinite(t2):
            # zero group (or degenerate IG limit): prior draw
            t2 = rng.gamma(0.5 * (g + 1), 2.0 / (lam[j] * lam[j]))
        tau2[j] = max(t2, 1e-300)

    T = y.shape[0]
    n = theta.shape[0]
    ss = 0.0
    for t in range(T):
        acc = y[t]
        for k in range(n):
            acc -= Z[t, k] * theta[k]
        ss += acc * acc
    pen = 0.0
    dim = 0
    for j in range(G):
        s0 = starts[j]
        g = sizes[j]
        if spike and gamma[j] == 0:
            continue
        dim += g
        nrm2 = 0.0
        for i in range(g):
            nrm2 += theta[s0 + i] * theta[s0 + i]
        pen += nrm2 / tau2[j]
    shape = 0.5 * (T + dim - 1) + a1
    rate = 0.5 * ss + 0.5 * pen + b1
    new = 1.0 / rng.gamma(shape, 1.0 / rate)
    if not (new > 0.0 and math.isfinite(new)):
        return sigma2, 2, -1
    return new, 0, -1


class _Kernel:
    """Precomputed cross products and group layout for one design."""

    def __init__(self, design: DesignMatrix, model: str, hp: Hyperparams,
                 sa_cfg: SaConfig | None):
        if model not in MODELS:
            raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")
        self.design = design
        self.model = model
        self.hp = hp
        self.sa_cfg = sa_cfg
        self.spike = model == "agl_ss"
        Z = np.ascontiguousarray(design.Z, dtype=float)
        self.Z = Z
        self.y = np.ascontiguousarray(design.y, dtype=float)
        self.ZtZ = np.ascontiguousarray(Z.T @ Z)
        self.Zty = Z.T @ self.y
        self.starts = np.array([s for s, _ in design.group_offsets], dtype=np.int64)
        self.sizes = np.array([g for _, g in design.group_offsets], dtype=np.int64)
        unpen = design.unpenalized_cols
        self.unpen_start = int(unpen[0]) if unpen else 0
        self.unpen_size = len(unpen)
        self.c, self.d = hp.beta_prior(design.G)

    def prior_reset(self, st: ChainState, rng: np.random.Generator) -> None:
        """Restart the chain: zero theta, redraw tau^2 and pi0 from their priors.

        sigma^2 comes from its full conditional given theta = 0 unless the SA
        config asks for a prior draw; a vague Inv-Gamma prior puts sigma^2 far
        off the data scale and triggers cascades of further restarts.
        """
        hp = self.hp
        st.theta[:] = 0.0
        if st.gamma is not None:
            st.gamma[:] = 0
        st.tau2[:] = rng.gamma(0.5 * (self.sizes + 1), 2.0 / st.lam**2)
        if self.sa_cfg is not None and self.sa_cfg.restart_sigma2 == "prior":
            st.sigma2 = 1.0 / rng.gamma(hp.a1, 1.0 / hp.b1)
        else:
            # spike-and-slab groups restart in the spike unless the spike has no mass
            spike_on = self.spike and hp.pi0_fixed != 0.0
            dim = 0 if spike_on else int(self.sizes.sum())
            shape = 0.5 * (self.y.shape[0] + dim - 1) + hp.a1
            st.sigma2 = 1.0 / rng.gamma(shape, 1.0 / (0.5 * self.y @ self.y + hp.b1))
        if self.spike:
            st.pi0 = hp.pi0_fixed if hp.pi0_fixed is not None else rng.beta(self.c, self.d)

    def sweep(self, st: ChainState, rng: np.random.Generator, it: int | None = None) -> bool:
        """In-place sweep; returns True when the SA step restarted."""
        hp = self.hp
        gamma = st.gamma if st.gamma is not None else np.ones(len(self.sizes), dtype=np.int64)
        pi0 = st.pi0 if self.spike else 0.0
        if self.spike and hp.pi0_fixed is not None:
            pi0 = hp.pi0_fixed
        sigma2, status, where = _core_sweep(
            st.theta, st.tau2, gamma, st.lam, st.sigma2, pi0, self.Z, self.y, self.ZtZ,
            self.Zty, self.starts, self.sizes, self.unpen_start, self.unpen_size,
            self.spike, hp.a1, hp.b1, rng)
        if status == 1:
            raise SamplerError(f"A_j not positive definite in group {where}", it)
        if status == 2:
            raise SamplerError("non-finite sigma^2 draw", it)
        st.sigma2 = sigma2
        restarted = False
        if hp.tuning_mode == "stochastic_approximation":
            st.sa = sa_update(st.sa, st.tau2, self.sizes, self.sa_cfg, rng)
            st.lam = np.exp(st.sa.omega)
            if st.sa.restarted:
                restarted = True
                self.prior_reset(st, rng)
        else:
            lam2 = rng.gamma(0.5 * (self.sizes + 1) + hp.a2, 1.0 / (0.5 * st.tau2 + hp.b2))
            st.lam = np.sqrt(lam2)
        if self.spike:
            if hp.pi0_fixed is not None:
                st.pi0 = hp.pi0_fixed
            elif not restarted:
                k = int(gamma.sum())
                st.pi0 = rng.beta(len(self.sizes) - k + self.c, k + self.d)
        return restarted


def _prepare_state(state: ChainState, design: DesignMatrix, model: str,
                   hp: Hyperparams, sa_cfg: SaConfig | None) -> ChainState:
    st = state.copy()
    if model == "agl_ss" and st.gamma is None:
        st.gamma = np.array([int(np.any(st.theta[s:s + g] != 0)) for s, g in design.group_offsets],
                            dtype=np.int64)
    if hp.tuning_mode == "stochastic_approximation" and st.sa is None:
        st.sa = SaState(omega=np.log(st.lam))
    return st


def gibbs_sweep_agl(state: ChainState, design: DesignMatrix, hp: Hyperparams,
                    rng: np.random.Generator, sa_cfg: SaConfig | None = None) -> ChainState:
    """One AGL sweep; returns a new state and leaves ``state`` untouched."""
    sa_cfg = sa_cfg or SaConfig()
    kern = _Kernel(design, "agl", hp, sa_cfg)
    st = _prepare_state(state, design, "agl", hp, sa_cfg)
    kern.sweep(st, rng)
    return st


def gibbs_sweep_agl_ss(state: ChainState, design: DesignMatrix, hp: Hyperparams,
                       rng: np.random.Generator, sa_cfg: SaConfig | None = None) -> ChainState:
    """One spike-and-slab sweep; returns a new state."""
    sa_cfg = sa_cfg or SaConfig()
    kern = _Kernel(design, "agl_ss", hp, sa_cfg)
    st = _prepare_state(state, design, "agl_ss", hp, sa_cfg)
    kern.sweep(st, rng)
    return st


def spike_probability(pi0: float, tau2: float, logdet_A: float, quad: float,
                      sigma2: float, g: int) -> float:
    """Conditional probability that group j is exactly zero, in log space."""
    if pi0 >= 1.0:
        return 1.0
    if pi0 <= 0.0:
        return 0.0
    log_slab = (math.log1p(-pi0) - 0.5 * g * math.log(tau2) - 0.5 * logdet_A
                + quad / (2.0 * sigma2))
    return float(math.exp(math.log(pi0) - np.logaddexp(math.log(pi0), log_slab)))


@dataclass
class PosteriorDraws:
    model: str
    theta: np.ndarray
    tau2: np.ndarray
    sigma2: np.ndarray
    lam: np.ndarray
    pi0: np.ndarray | None
    gamma: np.ndarray | None
    group_offsets: tuple
    predictor_offsets: tuple
    col_means: np.ndarray
    col_sds: np.ndarray
    y_mean: float
    unpenalized_cols: tuple = ()
    n_restarts: int = 0
    trace_iters: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    lambda_trace: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def n_draws(self) -> int:
        return self.theta.shape[0]

    @property
    def omega(self) -> np.ndarray:
        return np.log(self.lam)

    @property
    def omega_trace(self) -> np.ndarray:
        return np.log(self.lambda_trace)


def run_chain(model: str, design: DesignMatrix, hp: Hyperparams, schedule: Schedule,
              rng: np.random.Generator, sa_cfg: SaConfig | None = None,
              init: ChainState | None = None, trace_every: int = 0,
              callback=None) -> PosteriorDraws:
    """Run S sweeps and keep every ``thin``-th post-burn-in state.

    ``trace_every > 0`` records the penalty path over the whole run (burn-in
    included).  ``callback(s, state)`` is called after every sweep.
    """
    sa_cfg = sa_cfg or SaConfig()
    kern = _Kernel(design, model, hp, sa_cfg)
    st = initial_state(design, model, sa_cfg) if init is None else \
        _prepare_state(init, design, model, hp, sa_cfg)
    if hp.tuning_mode != "stochastic_approximation":
        st.sa = None
    n = schedule.n_draws
    G = design.G
    theta = np.empty((n, st.theta.shape[0]))
    tau2 = np.empty((n, G))
    sigma2 = np.empty(n)
    lam = np.empty((n, G))
    pi0 = np.empty(n) if kern.spike else None
    gamma = np.empty((n, G), dtype=np.int8) if kern.spike else None
    n_trace = schedule.S // trace_every if trace_every > 0 else 0
    trace_iters = np.empty(n_trace, dtype=int)
    lambda_trace = np.empty((n_trace, G))
    restarts = 0
    k = 0
    tr = 0
    for s in range(1, schedule.S + 1):
        try:
            restarts += kern.sweep(st, rng, s)
        except SamplerError:
            raise
        except Exception as exc:  # numba/numpy failures surface with the iteration
            raise SamplerError(str(exc), s) from exc
        if callback is not None:
            callback(s, st)
        if n_trace and s % trace_every == 0 and tr < n_trace:
            trace_iters[tr] = s
            lambda_trace[tr] = st.lam
            tr += 1
        if s > schedule.burn_in and (s - schedule.burn_in) % schedule.thin == 0 and k < n:
            theta[k] = st.theta
            tau2[k] = st.tau2
            sigma2[k] = st.sigma2
            lam[k] = st.lam
            if kern.spike:
                pi0[k] = st.pi0
                gamma[k] = st.gamma
            k += 1
    return PosteriorDraws(model=model, theta=theta, tau2=tau2, sigma2=sigma2, lam=lam,
                          pi0=pi0, gamma=gamma, group_offsets=design.group_offsets,
                          predictor_offsets=design.predictor_offsets,
                          col_means=design.col_means, col_sds=design.col_sds,
                          y_mean=design.y_mean, unpenalized_cols=design.unpenalized_cols,
                          n_restarts=restarts, trace_iters=trace_iters,
                          lambda_trace=lambda_trace)
