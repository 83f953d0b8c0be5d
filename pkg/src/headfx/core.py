"""Closed-form market primitives.

Viewer utilities, multinomial-logit choice probabilities, expected
audiences, streamer profits, quadratic quality costs, and the analytic
audience/quality sensitivity. Everything here is a pure function of its
inputs; all other modules build on these.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, DomainError, NonFiniteError

__all__ = [
    "PlatformParams",
    "StreamerParams",
    "MarketState",
    "TrafficAllocation",
    "deterministic_utility",
    "choice_probabilities",
    "expected_viewers",
    "cost",
    "marginal_cost",
    "streamer_profit",
    "audience_quality_sensitivity",
    "streamer_arrays",
]


def _as_float_vector(x, name: str, n: int | None = None) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be a 1-d vector, got shape {v.shape}")
    if n is not None and v.shape[0] != n:
        raise DimensionMismatchError(f"{name} has length {v.shape[0]}, expected {n}")
    return v


@dataclass(frozen=True)
class PlatformParams:
    """Global market constants shared by every streamer and viewer.

    prices has one entry per streamer; beta is the network-effect weight
    (utility per current viewer), tau the platform commission, gamma the
    viewer adjustment rate, and phi the traffic-sensitivity factor that
    couples promotion shares into utility.
    """

    n_streamers: int
    n_viewers: int
    beta: float = 0.0
    tau: float = 0.2
    revenue_per_viewer: float = 1.0
    gamma: float = 1.0
    phi: float = 1.0
    prices: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.n_streamers < 1:
            raise DomainError(f"n_streamers must be >= 1, got {self.n_streamers}")
        if self.n_viewers < 0:
            raise DomainError(f"n_viewers must be >= 0, got {self.n_viewers}")
        if not 0.0 <= self.tau < 1.0:
            raise DomainError(f"tau must lie in [0, 1), got {self.tau}")
        if self.beta < 0:
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if self.revenue_per_viewer < 0:
            raise DomainError(f"revenue_per_viewer must be >= 0, got {self.revenue_per_viewer}")
        if self.gamma <= 0:
            raise DomainError(f"gamma must be > 0, got {self.gamma}")
        if self.phi <= 0:
            raise DomainError(f"phi must be > 0, got {self.phi}")
        prices = self.prices
        if prices is None:
            prices = np.zeros(self.n_streamers)
        prices = _as_float_vector(prices, "prices", self.n_streamers)
        if np.any(prices < 0):
            raise DomainError("prices must be >= 0")
        object.__setattr__(self, "prices", prices)


@dataclass(frozen=True)
class StreamerParams:
    """Per-streamer constants: attractiveness, adjustment speed, cost curvature."""

    alpha: float
    eta: float = 1.0
    cost_coefficient: float = 0.2

    def __post_init__(self):
        if self.alpha < 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if self.eta <= 0:
            raise DomainError(f"eta must be > 0, got {self.eta}")
        if self.cost_coefficient <= 0:
            raise DomainError(f"cost_coefficient must be > 0, got {self.cost_coefficient}")


def streamer_arrays(streamers) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Column vectors (alpha, eta, cost_coefficient) for a streamer list."""
    alpha = np.array([s.alpha for s in streamers], dtype=float)
    eta = np.array([s.eta for s in streamers], dtype=float)
    c = np.array([s.cost_coefficient for s in streamers], dtype=float)
    return alpha, eta, c


@dataclass(frozen=True)
class MarketState:
    """Viewer counts and content qualities at one instant of model time."""

    n: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        n = _as_float_vector(self.n, "state.n")
        q = _as_float_vector(self.q, "state.q", n.shape[0])
        if np.any(n < 0):
            raise DomainError("state.n must be >= 0")
        if np.any(q < 0):
            raise DomainError("state.q must be >= 0")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "q", q)


@dataclass(frozen=True)
class TrafficAllocation:
    """Promotion shares on the probability simplex."""

    theta: np.ndarray

    def __post_init__(self):
        theta = _as_float_vector(self.theta, "theta")
        if np.any(theta < 0):
            raise DomainError("theta entries must be >= 0")
        total = float(theta.sum())
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"theta must sum to 1 within 1e-12, got {total!r}")
        object.__setattr__(self, "theta", theta)

    def __len__(self) -> int:
        return self.theta.shape[0]


def deterministic_utility(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
) -> np.ndarray:
    """Systematic utility V_i = alpha_i q_i - p_i + beta n_i (+ phi theta_i).

    The idiosyncratic taste term lives in the logit (or, for agents, in
    explicit noise draws) and is deliberately excluded here.
    """
    N = platform.n_streamers
    if len(streamers) != N:
        raise DimensionMismatchError(f"streamers has length {len(streamers)}, expected {N}")
    _as_float_vector(state.n, "state.n", N)
    _as_float_vector(state.q, "state.q", N)
    alpha, _, _ = streamer_arrays(streamers)
    v = alpha * state.q - platform.prices + platform.beta * state.n
    if theta is not None:
        th = _as_float_vector(theta.theta, "theta", N)
        v = v + platform.phi * th
    return v


def choice_probabilities(v) -> np.ndarray:
    """Multinomial-logit probabilities via the max-shifted softmax.

    Shift-invariant and overflow-safe: network-effect terms can reach
    hundreds of utility units at large audiences.
    """
    v = _as_float_vector(v, "V")
    if v.shape[0] < 1:
        raise DimensionMismatchError("V must have at least one entry")
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.isfinite(v))[0])
        raise NonFiniteError(f"V contains a non-finite entry at index {bad}")
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def expected_viewers(p, m: float) -> np.ndarray:
    """Expected audience n_i = M * P_i for a probability vector P."""
    p = _as_float_vector(p, "P")
    if m < 0:
        raise DomainError(f"M must be >= 0, got {m}")
    if np.any(p < 0) or abs(float(p.sum()) - 1.0) > 1e-9:
        raise DomainError("P must lie on the probability simplex")
    return m * p


def cost(q, c):
    """Quadratic content-production cost c * q**2 (strictly convex)."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("quality must be >= 0")
    if np.any(np.asarray(c, dtype=float) <= 0):
        raise DomainError("cost coefficient must be > 0")
    out = c * q * q
    return float(out) if out.ndim == 0 else out


def marginal_cost(q, c):
    """Marginal cost 2 * c * q of the quadratic cost."""
    q = np.asarray(q, dtype=float)
    if np.any(q < 0):
        raise DomainError("quality must be >= 0")
    if np.any(np.asarray(c, dtype=float) <= 0):
        raise DomainError("cost coefficient must be > 0")
    out = 2.0 * c * q
    return float(out) if out.ndim == 0 else out


def streamer_profit(
    n_i: float,
    q_i: float,
    platform: PlatformParams,
    streamer: StreamerParams,
) -> float:
    """Per-period profit (1 - tau) R n_i minus the quality cost."""
    if n_i < 0:
        raise DomainError(f"n_i must be >= 0, got {n_i}")
    revenue = (1.0 - platform.tau) * platform.revenue_per_viewer * n_i
    return revenue - cost(q_i, streamer.cost_coefficient)


def audience_quality_sensitivity(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
) -> np.ndarray:
    """Own-quality audience response M alpha_i P_i (1 - P_i), holding n fixed."""
    v = deterministic_utility(platform, streamers, state, theta)
    p = choice_probabilities(v)
    alpha, _, _ = streamer_arrays(streamers)
    return platform.n_viewers * alpha * p * (1.0 - p)
