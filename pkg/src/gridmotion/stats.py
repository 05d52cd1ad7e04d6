"""Motion-coherence support model.

A region's support count is modelled as a pair of binomials: ``B(n, p_true)``
when the region genuinely shares one motion and ``B(n, p_false)`` when it does
not. The cell classifier thresholds support at ``k_sigma`` standard deviations
above the mean of the false binomial.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StatModel:
    """t: neighbor-consistency probability; beta: assumption-violation factor;
    m_over_M: fraction of location possibilities covered by the region."""

    t: float = 0.6
    beta: float = 1.0
    m_over_M: float = 1.0 / 300.0

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        if self.beta <= 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not 0.0 < self.m_over_M < 1.0:
            raise ValueError(f"m_over_M must lie in (0, 1), got {self.m_over_M}")
        if self.beta * self.m_over_M > 1.0:
            raise ValueError("beta * m_over_M must not exceed 1")

    @classmethod
    def for_grid(cls, gx: int, gy: int, t: float = 0.6, beta: float = 1.0) -> "StatModel":
        """Uniform region prior: one cell out of gx*gy."""
        return cls(t=t, beta=beta, m_over_M=1.0 / (gx * gy))


def p_true(model: StatModel) -> float:
    return model.t + (1.0 - model.t) * model.beta * model.m_over_M


def p_false(model: StatModel) -> float:
    return model.beta * (1.0 - model.t) * model.m_over_M


def support_threshold(model: StatModel, n: int, k_sigma: float = 3.0) -> float:
    """Mean plus ``k_sigma`` standard deviations of ``B(n, p_false)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pf = p_false(model)
    return n * pf + k_sigma * math.sqrt(n * pf * (1.0 - pf))


@dataclass(frozen=True)
class SeparabilityReport:
    n: int
    k_sigma: float
    p_true: float
    p_false: float
    mean_true: float
    std_true: float
    mean_false: float
    std_false: float
    threshold: float
    separable: bool


def separability(model: StatModel, n: int, k_sigma: float = 3.0) -> SeparabilityReport:
    if n < 1:
        raise ValueError("n must be >= 1")
    pt, pf = p_true(model), p_false(model)
    std_t = math.sqrt(n * pt * (1.0 - pt))
    std_f = math.sqrt(n * pf * (1.0 - pf))
    tau = support_threshold(model, n, k_sigma)
    return SeparabilityReport(
        n=n, k_sigma=k_sigma, p_true=pt, p_false=pf,
        mean_true=n * pt, std_true=std_t, mean_false=n * pf, std_false=std_f,
        threshold=tau, separable=bool(n * pt - k_sigma * std_t > tau),
    )


def monte_carlo_check(model: StatModel, n: int, trials: int, seed=None):
    """Simulate the two-stage neighbor process and return empirical (p_true, p_false).

    Each of ``trials`` neighborhoods holds ``n`` neighbors. A neighbor is
    motion-consistent with probability ``t``; under the true hypothesis it
    then lands in the matched region, under the false one it does not. An
    inconsistent neighbor lands there by chance with probability
    ``beta * m_over_M`` under either hypothesis.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    chance = model.beta * model.m_over_M
    size = (trials, n)

    consistent = rng.random(size) < model.t
    lucky = rng.random(size) < chance
    hits_true = consistent | lucky

    consistent_f = rng.random(size) < model.t
    lucky_f = rng.random(size) < chance
    hits_false = ~consistent_f & lucky_f

    total = trials * n
    return float(hits_true.sum()) / total, float(hits_false.sum()) / total
