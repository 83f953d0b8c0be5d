"""Welfare accounting and promotion-share optimization.

Consumer surplus via the logit expected-maximum-utility identity,
producer surplus and platform profit, the welfare gradient with respect
to promotion shares, projected gradient ascent over the probability
simplex with a KKT stopping rule, a brute-force simplex grid oracle for
verification, a myopic re-optimizing dynamic allocator, and the
concentrated-vs-dispersed welfare comparison.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import (
    MarketState,
    PlatformParams,
    TrafficAllocation,
    choice_probabilities,
    deterministic_utility,
    streamer_arrays,
)
from .dynamics import IntegratorConfig, Trajectory, integrate
from .equilibrium import (
    FixedPointConfig,
    _softmax,
    _utilities,
    _viewer_fixed_point_raw,
    find_critical_beta,
    max_share_from_perturbed_start,
)
from .errors import BracketError, DomainError, NonFiniteError

__all__ = [
    "WelfareBreakdown",
    "AllocationSolution",
    "MyopicStep",
    "HeadEffectComparison",
    "consumer_surplus",
    "producer_surplus",
    "platform_profit",
    "total_welfare",
    "welfare_at_theta",
    "welfare_gradient_theta",
    "numeric_welfare_gradient_theta",
    "simplex_project",
    "optimize_allocation",
    "grid_search_allocation",
    "myopic_dynamic_allocation",
    "time_averaged_welfare",
    "head_effect_welfare_comparison",
]


@dataclass(frozen=True)
class WelfareBreakdown:
    """CS, PS, platform profit, and their sum."""

    consumer_surplus: float
    producer_surplus: float
    platform_profit: float
    total: float

    def __post_init__(self):
        parts = self.consumer_surplus + self.producer_surplus + self.platform_profit
        if abs(self.total - parts) > 1e-9 * (1.0 + abs(parts)):
            raise DomainError("welfare total does not match its components")

    @classmethod
    def from_components(cls, cs: float, ps: float, pi: float) -> "WelfareBreakdown":
        return cls(cs, ps, pi, cs + ps + pi)


def _logsumexp(v: np.ndarray) -> float:
    m = v.max()
    return float(m + np.log(np.exp(v - m).sum()))


def consumer_surplus(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
) -> float:
    """Aggregate viewer surplus M * (E[max gross utility] - expected payment).

    Gross benefit is the logsumexp aggregate over price-free utilities;
    payments are netted out once, at the choice-probability-weighted
    price, so a uniform price increase of c lowers surplus by exactly M*c.
    Choices themselves follow the price-inclusive utilities.
    """
    v_net = deterministic_utility(platform, streamers, state, theta)
    p = choice_probabilities(v_net)
    v_gross = v_net + platform.prices
    expected_price = float(p @ platform.prices)
    return platform.n_viewers * (_logsumexp(v_gross) - expected_price)


def producer_surplus(platform: PlatformParams, streamers, state: MarketState) -> float:
    """Total streamer profit: commission-net revenue minus quality costs."""
    _, _, c = streamer_arrays(streamers)
    revenue = (1.0 - platform.tau) * platform.revenue_per_viewer * state.n.sum()
    return float(revenue - np.sum(c * state.q * state.q))


def platform_profit(platform: PlatformParams) -> float:
    """Commission take tau * R * M; independent of the market state."""
    return platform.tau * platform.revenue_per_viewer * platform.n_viewers


def total_welfare(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
) -> WelfareBreakdown:
    """CS + PS + platform profit at the given state."""
    return WelfareBreakdown.from_components(
        consumer_surplus(platform, streamers, state, theta),
        producer_surplus(platform, streamers, state),
        platform_profit(platform),
    )


def _welfare_raw(platform, alpha, c, q, theta_vec, cfg, n0):
    """Welfare at the viewer equilibrium for a raw (possibly off-simplex)
    promotion vector; used by the optimizer and finite-difference probes."""
    n, converged, _, _ = _viewer_fixed_point_raw(platform, alpha, q, n0, cfg, theta_vec)
    v = _utilities(platform, alpha, q, n, theta_vec)
    p = _softmax(v)
    cs = platform.n_viewers * (
        _logsumexp(v + platform.prices) - float(p @ platform.prices)
    )
    ps = (1.0 - platform.tau) * platform.revenue_per_viewer * float(n.sum()) - float(
        np.sum(c * q * q)
    )
    pi = platform_profit(platform)
    return cs + ps + pi, n, p, converged


def welfare_at_theta(
    platform: PlatformParams,
    streamers,
    q,
    theta: TrafficAllocation,
    cfg: FixedPointConfig | None = None,
    n0=None,
) -> tuple[WelfareBreakdown, MarketState]:
    """Re-solve the viewer equilibrium under theta and evaluate welfare.

    Quality is held fixed: the promotion instrument steers audiences, and
    the welfare derivatives being reproduced treat q as given.
    """
    if cfg is None:
        cfg = FixedPointConfig(tol=1e-12)
    q = np.asarray(q, dtype=float)
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    if n0 is None:
        n0 = np.full(big_n, m / big_n)
    alpha, _, c = streamer_arrays(streamers)
    _, n, _, _ = _welfare_raw(platform, alpha, c, q, theta.theta, cfg, n0)
    state = MarketState(n=np.maximum(n, 0.0), q=q, t=0.0)
    return total_welfare(platform, streamers, state, theta), state


def welfare_gradient_theta(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation,
) -> np.ndarray:
    """Analytic welfare gradient g_i = M P_i / phi + R M P_i (1 - P_i) phi.

    This is the first-order condition's left side: the consumer-surplus
    term plus the combined producer/platform audience response. It treats
    the choice probabilities as locally fixed (no equilibrium feedback);
    see numeric_welfare_gradient_theta for the full-feedback probe.
    """
    v = deterministic_utility(platform, streamers, state, theta)
    p = choice_probabilities(v)
    m = platform.n_viewers
    r = platform.revenue_per_viewer
    phi = platform.phi
    return m * p / phi + r * m * p * (1.0 - p) * phi


def numeric_welfare_gradient_theta(
    platform: PlatformParams,
    streamers,
    q,
    theta: TrafficAllocation,
    cfg: FixedPointConfig | None = None,
    h: float = 1e-6,
) -> np.ndarray:
    """Central finite differences of welfare through the equilibrium re-solve.

    Diagnostic companion to the analytic gradient; the two are not
    asserted to agree because the analytic form ignores the audience
    feedback through the fixed point.
    """
    if cfg is None:
        cfg = FixedPointConfig(tol=1e-13)
    q = np.asarray(q, dtype=float)
    alpha, _, c = streamer_arrays(streamers)
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    n0 = np.full(big_n, m / big_n)
    grad = np.empty(big_n)
    base = np.asarray(theta.theta, dtype=float)
    for i in range(big_n):
        up = base.copy()
        dn = base.copy()
        up[i] += h
        dn[i] -= h
        w_up, _, _, _ = _welfare_raw(platform, alpha, c, q, up, cfg, n0)
        w_dn, _, _, _ = _welfare_raw(platform, alpha, c, q, dn, cfg, n0)
        grad[i] = (w_up - w_dn) / (2.0 * h)
    return grad


def simplex_project(v) -> TrafficAllocation:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DomainError("simplex_project expects a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("simplex_project requires finite entries")
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - 1.0
    ranks = np.arange(1, v.size + 1)
    support = np.flatnonzero(u - cumulative / ranks > 0)[-1] + 1
    lam = cumulative[support - 1] / support
    w = np.maximum(v - lam, 0.0)
    return TrafficAllocation(theta=w)


@dataclass(frozen=True)
class AllocationSolution:
    """Result of projected gradient ascent over promotion shares."""

    theta: TrafficAllocation
    welfare: float
    kkt_residual: float
    active_set: tuple[int, ...]
    iterations: int
    converged: bool


def _kkt_residual(g: np.ndarray, theta: np.ndarray) -> float:
    support = theta > 0.0
    lam = float(g[support].mean())
    res = float(np.max(np.abs(g[support] - lam))) if support.any() else 0.0
    zeros = ~support
    if zeros.any():
        res = max(res, float(np.max(np.maximum(0.0, g[zeros] - lam))))
    return res


def optimize_allocation(
    platform: PlatformParams,
    streamers,
    q,
    init_theta: TrafficAllocation | None = None,
    step: float = 0.1,
    tol: float = 1e-8,
    max_iter: int = 500,
    fp_cfg: FixedPointConfig | None = None,
) -> AllocationSolution:
    """Projected gradient ascent on the promotion simplex.

    Each iteration re-solves the viewer equilibrium at the current theta,
    evaluates the analytic first-order-condition gradient, and moves
    theta <- project(theta + s g) with a backtracking line search that
    never accepts a welfare decrease (beyond float noise). Terminates on
    the complementary-slackness KKT residual.
    """
    if fp_cfg is None:
        fp_cfg = FixedPointConfig(tol=1e-13, max_iter=20000)
    q = np.asarray(q, dtype=float)
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    alpha, _, c = streamer_arrays(streamers)
    r = platform.revenue_per_viewer
    phi = platform.phi

    theta = (
        np.full(big_n, 1.0 / big_n)
        if init_theta is None
        else np.asarray(init_theta.theta, dtype=float).copy()
    )
    n_warm = np.full(big_n, m / big_n)
    w_cur, n_warm, p, _ = _welfare_raw(platform, alpha, c, q, theta, fp_cfg, n_warm)

    s_prev = step
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = m * p / phi + r * m * p * (1.0 - p) * phi
        residual = _kkt_residual(g, theta)
        if residual <= tol:
            break
        s = min(step, 2.0 * s_prev)
        accepted = False
        for _ in range(60):
            trial = simplex_project(theta + s * g).theta
            w_trial, n_trial, p_trial, _ = _welfare_raw(
                platform, alpha, c, q, trial, fp_cfg, n_warm
            )
            if w_trial >= w_cur - 1e-12 * (1.0 + abs(w_cur)):
                theta, w_cur, n_warm, p = trial, w_trial, n_trial, p_trial
                s_prev = s
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break

    g = m * p / phi + r * m * p * (1.0 - p) * phi
    residual = _kkt_residual(g, theta)
    allocation = simplex_project(theta)
    breakdown, _ = welfare_at_theta(platform, streamers, q, allocation, fp_cfg, n_warm)
    return AllocationSolution(
        theta=allocation,
        welfare=breakdown.total,
        kkt_residual=residual,
        active_set=tuple(int(i) for i in np.flatnonzero(allocation.theta == 0.0)),
        iterations=iterations,
        converged=residual <= tol,
    )


def grid_search_allocation(
    platform: PlatformParams,
    streamers,
    q,
    resolution: float = 0.001,
    fp_cfg: FixedPointConfig | None = None,
) -> tuple[TrafficAllocation, float]:
    """Brute-force welfare maximization over a simplex grid (N = 2 or 3).

    Solves the viewer fixed point for every grid allocation in one
    vectorized damped iteration; independent oracle for the optimizer.
    """
    if fp_cfg is None:
        fp_cfg = FixedPointConfig(tol=1e-10, max_iter=5000)
    big_n = platform.n_streamers
    if big_n not in (2, 3):
        raise DomainError("grid oracle supports 2 or 3 streamers")
    q = np.asarray(q, dtype=float)
    alpha, _, c = streamer_arrays(streamers)
    m = float(platform.n_viewers)

    k = int(round(1.0 / resolution))
    if big_n == 2:
        i = np.arange(k + 1)
        thetas = np.stack([i, k - i], axis=1) / k
    else:
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        mask = i + j <= k
        thetas = np.stack([i[mask], j[mask], k - i[mask] - j[mask]], axis=1) / k

    base = alpha * q - platform.prices
    v_theta = base[None, :] + platform.phi * thetas
    n = np.full_like(thetas, m / big_n)
    for _ in range(fp_cfg.max_iter):
        v = v_theta + platform.beta * n
        v = v - v.max(axis=1, keepdims=True)
        e = np.exp(v)
        target = m * e / e.sum(axis=1, keepdims=True)
        residual = np.max(np.abs(n - target))
        if residual <= fp_cfg.tol:
            break
        n = (1.0 - fp_cfg.damping) * n + fp_cfg.damping * target

    v = v_theta + platform.beta * n
    shift = v.max(axis=1, keepdims=True)
    e = np.exp(v - shift)
    sums = e.sum(axis=1)
    p = e / sums[:, None]
    v_gross = v + platform.prices[None, :]
    shift_g = v_gross.max(axis=1, keepdims=True)
    lse = shift_g[:, 0] + np.log(np.exp(v_gross - shift_g).sum(axis=1))
    cs = m * (lse - p @ platform.prices)
    ps = (1.0 - platform.tau) * platform.revenue_per_viewer * n.sum(axis=1) - np.sum(
        c * q * q
    )
    w = cs + ps + platform_profit(platform)
    best = int(np.argmax(w))
    return simplex_project(thetas[best]), float(w[best])


@dataclass(frozen=True)
class MyopicStep:
    """One re-optimization instant of the greedy dynamic allocator."""

    t: float
    theta: TrafficAllocation
    welfare: WelfareBreakdown
    segment: Trajectory


def myopic_dynamic_allocation(
    platform: PlatformParams,
    streamers,
    state0: MarketState,
    horizon: float,
    reopt_every: float,
    integrator_cfg: IntegratorConfig | None = None,
    fp_cfg: FixedPointConfig | None = None,
    opt_tol: float = 1e-8,
) -> list[MyopicStep]:
    """Greedy promotion control: re-optimize theta, hold it, integrate.

    This is an explicit approximation: each segment maximizes the static
    welfare at the segment's starting quality rather than the discounted
    welfare stream, so it is not the continuous-time optimum.
    """
    if horizon <= 0 or reopt_every <= 0:
        raise DomainError("horizon and reopt_every must be > 0")
    if integrator_cfg is None:
        integrator_cfg = IntegratorConfig(dt=0.01, t_end=1.0)
    steps: list[MyopicStep] = []
    state = state0
    t = 0.0
    theta_prev: TrafficAllocation | None = None
    while t < horizon - 1e-12:
        sol = optimize_allocation(
            platform, streamers, state.q, init_theta=theta_prev, tol=opt_tol,
            fp_cfg=fp_cfg,
        )
        theta_prev = sol.theta
        span = min(reopt_every, horizon - t)
        seg_cfg = dataclasses.replace(integrator_cfg, t_end=span)
        segment = integrate(platform, streamers, state, seg_cfg, theta=sol.theta)
        steps.append(
            MyopicStep(
                t=t,
                theta=sol.theta,
                welfare=total_welfare(platform, streamers, state, sol.theta),
                segment=segment,
            )
        )
        state = MarketState(
            n=segment.terminal.n, q=segment.terminal.q, t=0.0
        )
        t += span
    return steps


def time_averaged_welfare(platform, streamers, steps: list[MyopicStep]) -> float:
    """Mean instantaneous welfare over every recorded sample of a run."""
    totals = []
    for step in steps:
        for s in step.segment.states:
            totals.append(total_welfare(platform, streamers, s, step.theta).total)
    return float(np.mean(totals))


@dataclass(frozen=True)
class HeadEffectComparison:
    """Welfare at the concentrated vs the dispersed equilibrium."""

    beta_star: float
    beta_dispersed: float
    beta_concentrated: float
    dispersed: WelfareBreakdown
    concentrated: WelfareBreakdown
    dispersed_state: MarketState
    concentrated_state: MarketState
    dispersed_max_share: float
    concentrated_max_share: float

    def component_deltas(self) -> dict[str, float]:
        """concentrated minus dispersed, per component."""
        return {
            "consumer_surplus": self.concentrated.consumer_surplus
            - self.dispersed.consumer_surplus,
            "producer_surplus": self.concentrated.producer_surplus
            - self.dispersed.producer_surplus,
            "platform_profit": self.concentrated.platform_profit
            - self.dispersed.platform_profit,
            "total": self.concentrated.total - self.dispersed.total,
        }


def head_effect_welfare_comparison(
    platform: PlatformParams,
    streamers,
    cfg: FixedPointConfig | None = None,
    share_threshold: float = 0.95,
) -> HeadEffectComparison:
    """Compare welfare across the concentration threshold.

    Locates the critical network-effect strength for this instance, then
    evaluates the welfare breakdown at the equilibria reached from the
    perturbed-symmetric start at half and at twice that strength.
    """
    if cfg is None:
        cfg = FixedPointConfig()
    big_n = platform.n_streamers
    m = platform.n_viewers
    beta_lo = 1e-6
    beta_hi = 4.0 * big_n / m
    plat_probe = dataclasses.replace(platform, beta=beta_hi)
    share, _ = max_share_from_perturbed_start(plat_probe, streamers, cfg)
    doublings = 0
    while share < share_threshold:
        beta_hi *= 2.0
        doublings += 1
        if doublings > 20:
            raise BracketError("could not bracket the critical network effect")
        plat_probe = dataclasses.replace(platform, beta=beta_hi)
        share, _ = max_share_from_perturbed_start(plat_probe, streamers, cfg)
    beta_star = find_critical_beta(
        platform, streamers, beta_lo, beta_hi, share_threshold, cfg
    )

    results = {}
    for label, beta in (("dispersed", 0.5 * beta_star), ("concentrated", 2.0 * beta_star)):
        plat = dataclasses.replace(platform, beta=beta)
        max_share, res = max_share_from_perturbed_start(plat, streamers, cfg)
        results[label] = (
            total_welfare(plat, streamers, res.state),
            res.state,
            max_share,
        )
    return HeadEffectComparison(
        beta_star=beta_star,
        beta_dispersed=0.5 * beta_star,
        beta_concentrated=2.0 * beta_star,
        dispersed=results["dispersed"][0],
        concentrated=results["concentrated"][0],
        dispersed_state=results["dispersed"][1],
        concentrated_state=results["concentrated"][1],
        dispersed_max_share=results["dispersed"][2],
        concentrated_max_share=results["concentrated"][2],
    )
