"""Bias, variance and MSE of top-1 measures under Gaussian IoU noise.

The observed top-1 IoU is modelled as ``r_hat = r + eps`` with
``eps ~ N(0, gamma**2)`` and no clipping to [0, 1].  R@1,theta here uses the
non-strict ``r_hat >= theta`` indicator; for continuous noise the choice
has probability zero of mattering.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameter

CSV_COLUMNS = ("measure", "r", "theta", "gamma", "bias", "variance", "mse")


def norm_cdf(x: float) -> float:
    """Standard normal CDF through erfc, accurate in both tails."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class NoiseTheoryPoint:
    measure: str
    r: float
    theta: float | None
    gamma: float
    bias: float
    variance: float
    mse: float

    def __post_init__(self) -> None:
        if self.variance < 0 or self.mse < 0:
            raise InvalidParameter("variance and mse must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


def _check_gamma(gamma: float) -> None:
    if not gamma > 0:
        raise InvalidParameter(f"gamma must be > 0, got {gamma}")


def recall1_theory(r: float, theta: float, gamma: float) -> NoiseTheoryPoint:
    _check_gamma(gamma)
    # P(r_hat >= theta), computed without the 1 - Phi cancellation
    p = norm_cdf((r - theta) / gamma)
    bias = p - (1.0 if r >= theta else 0.0)
    variance = p * (1.0 - p)
    return NoiseTheoryPoint("recall@1", r, theta, gamma, bias, variance, bias * bias + variance)


def axiou1_theory(r: float, gamma: float) -> NoiseTheoryPoint:
    _check_gamma(gamma)
    variance = gamma * gamma
    return NoiseTheoryPoint("axiou@1", r, None, gamma, 0.0, variance, variance)


def theory_sweep(
    r: float, thetas: Sequence[float], gammas: Sequence[float]
) -> list[NoiseTheoryPoint]:
    """One AxIoU@1 row per gamma followed by its R@1,theta rows."""
    if not thetas or not gammas:
        raise InvalidParameter("theta and gamma grids must be nonempty")
    rows = []
    for gamma in gammas:
        rows.append(axiou1_theory(r, gamma))
        rows.extend(recall1_theory(r, theta, gamma) for theta in thetas)
    return rows


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Simulated bias/variance with the standard errors implied by the model."""

    measure: str
    samples: int
    bias: float
    variance: float
    bias_se: float
    variance_se: float


def _estimate(measure, values, truth, var, mu4) -> MonteCarloEstimate:
    n = len(values)
    bias_se = math.sqrt(var / n)
    var_se = math.sqrt(max(mu4 - var * var * (n - 3) / (n - 1), 0.0) / n)
    return MonteCarloEstimate(
        measure, n, float(values.mean() - truth), float(values.var(ddof=1)), bias_se, var_se
    )


def estimate_from_draws(
    r_hat: np.ndarray, r: float, gamma: float, theta: float | None = None
) -> MonteCarloEstimate:
    """Bias/variance of AxIoU@1 (``theta=None``) or R@1,theta from given draws.

    The variance estimate is the unbiased sample variance.  Standard errors
    are those of the two estimators under the Gaussian model, using
    ``Var(s^2) = (mu4 - var^2 (n-3)/(n-1)) / n``, so the comparison stays
    meaningful even when every draw lands on one side of ``theta``.
    """
    _check_gamma(gamma)
    if theta is None:
        var = gamma * gamma
        return _estimate("axiou@1", r_hat, r, var, 3.0 * var * var)
    values = (r_hat >= theta).astype(float)
    p = norm_cdf((r - theta) / gamma)
    var = p * (1.0 - p)
    mu4 = var * ((1.0 - p) ** 3 + p**3)
    return _estimate("recall@1", values, 1.0 if r >= theta else 0.0, var, mu4)


def draw_observed(r: float, gamma: float, samples: int, seed=0) -> np.ndarray:
    """``samples`` draws of ``r + N(0, gamma^2)``, unclipped."""
    _check_gamma(gamma)
    return r + gamma * np.random.default_rng(seed).standard_normal(samples)


def simulate(
    measure: str,
    r: float,
    gamma: float,
    theta: float | None = None,
    samples: int = 1_000_000,
    seed=0,
) -> MonteCarloEstimate:
    """Monte-Carlo bias/variance of ``"axiou@1"`` or ``"recall@1"``."""
    if measure not in ("axiou@1", "recall@1"):
        raise InvalidParameter(f"unknown measure {measure!r}")
    if measure == "recall@1" and theta is None:
        raise InvalidParameter("recall@1 needs theta")
    r_hat = draw_observed(r, gamma, samples, seed)
    return estimate_from_draws(r_hat, r, gamma, theta if measure == "recall@1" else None)


@dataclass(frozen=True)
class CrossCheck:
    theory: NoiseTheoryPoint
    simulated: MonteCarloEstimate

    @property
    def bias_z(self) -> float:
        return _z(self.simulated.bias - self.theory.bias, self.simulated.bias_se)

    @property
    def variance_z(self) -> float:
        return _z(self.simulated.variance - self.theory.variance, self.simulated.variance_se)

    def agrees(self, n_se: float = 3.0) -> bool:
        return self.bias_z <= n_se and self.variance_z <= n_se


def _z(diff: float, se: float) -> float:
    if se > 0:
        return abs(diff) / se
    return 0.0 if diff == 0 else math.inf


def monte_carlo_sweep(
    rs: Sequence[float],
    thetas: Sequence[float],
    gammas: Sequence[float],
    samples: int = 1_000_000,
    seed: int = 0,
) -> list[CrossCheck]:
    """Closed form vs simulation on a grid.

    One set of draws per ``(r, gamma)`` cell feeds AxIoU@1 and R@1 at every
    theta, mirroring how one noisy observation is scored by every measure.
    """
    checks = []
    for i, r in enumerate(rs):
        for j, gamma in enumerate(gammas):
            r_hat = draw_observed(r, gamma, samples, np.random.SeedSequence([seed, i, j]))
            checks.append(CrossCheck(axiou1_theory(r, gamma), estimate_from_draws(r_hat, r, gamma)))
            for theta in thetas:
                checks.append(CrossCheck(
                    recall1_theory(r, theta, gamma),
                    estimate_from_draws(r_hat, r, gamma, theta),
                ))
    return checks
