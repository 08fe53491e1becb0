"""Bayesian MIDAS penalized regressions: adaptive group lasso and its
spike-and-slab variant with stochastic-approximation penalty tuning."""

__version__ = "0.1.0"
