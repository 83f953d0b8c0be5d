"""Agent-based platform simulation.

Heterogeneous streamer and viewer agents interacting over discrete
rounds: per-round discrete choice with Gumbel noise and loyalty,
revenue split between streamers and the platform, myopic quality
investment against decay, and rank-dependent policy interventions
(high commission on top streamers, exposure boosts and subsidies for
small ones).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "StreamerAgent",
    "ViewerAgent",
    "PolicyIntervention",
    "SimConfig",
    "RoundRecord",
    "SimState",
    "SimRun",
    "init_platform",
    "viewer_round_utility",
    "apply_policy",
    "run_round",
    "run_simulation",
    "simulate",
]

POLICY_KINDS = ("high_tax", "boost_small", "subsidy")


@dataclass
class StreamerAgent:
    """One content producer; quality and policy fields evolve per round."""

    initial_quality: float
    current_quality: float
    cost_coefficient: float
    revenue_share: float
    exposure_boost: float = 1.0
    followers: int = 0
    content_type: int = 0
    active: bool = True


@dataclass
class ViewerAgent:
    """One viewer with sampled sensitivities and a loyalty attachment."""

    interaction_willingness: float
    price_sensitivity: float
    quality_sensitivity: float
    network_effect_sensitivity: float
    preferred_content_type: int
    loyalty: float
    last_choice: int | None = None
    satisfaction: float = 0.0


@dataclass(frozen=True)
class PolicyIntervention:
    """Rank-dependent intervention applied every round from start_round on.

    high_tax: the top_k streamers by last-round audience pay raised_share.
    boost_small: the bottom bottom_fraction get exposure boost_multiplier.
    subsidy: the bottom bottom_fraction receive per_round_amount after
    commission, funded out of platform revenue.
    """

    kind: str
    start_round: int = 10
    top_k: int = 3
    raised_share: float = 0.4
    bottom_fraction: float = 0.5
    boost_multiplier: float = 1.5
    per_round_amount: float = 0.0

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise DomainError(f"unknown policy kind {self.kind!r}, expected one of {POLICY_KINDS}")
        if self.start_round < 1:
            raise DomainError(f"start_round must be >= 1, got {self.start_round}")
        if self.kind == "high_tax":
            if self.top_k < 1:
                raise DomainError(f"top_k must be >= 1, got {self.top_k}")
            if not 0.0 <= self.raised_share < 1.0:
                raise DomainError(f"raised_share must lie in [0, 1), got {self.raised_share}")
        if self.kind in ("boost_small", "subsidy"):
            if not 0.0 < self.bottom_fraction <= 1.0:
                raise DomainError(
                    f"bottom_fraction must lie in (0, 1], got {self.bottom_fraction}"
                )
        if self.kind == "boost_small" and self.boost_multiplier <= 0:
            raise DomainError(f"boost_multiplier must be > 0, got {self.boost_multiplier}")
        if self.kind == "subsidy" and self.per_round_amount < 0:
            raise DomainError(f"per_round_amount must be >= 0, got {self.per_round_amount}")


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters; the first block mirrors the platform defaults,
    the second holds the behavioral coefficients (all overridable)."""

    n_streamers: int = 15
    n_viewers: int = 1000
    n_rounds: int = 50
    base_revenue_share: float = 0.2
    network_effect_beta: float = 0.15
    quality_decay_rate: float = 0.01
    random_effect_scale: float = 0.2
    policy_schedule: tuple[PolicyIntervention, ...] = ()
    seed: int = 0

    revenue_per_viewer: float = 1.0
    match_bonus: float = 0.3
    prices: tuple[float, ...] | None = None
    quality_responsiveness: float = 1.6e-4
    investment_audience_scale: float = 1000.0
    investment_min_revenue: float = 40.0
    investment_step_cap: float = 0.0075
    boost_investment: bool = True
    subsidy_quality_efficiency: float = 5e-4
    exit_revenue_floor: float = 4.0
    exit_patience: int = 5
    interaction_weight: float = 0.0
    n_content_types: int = 3

    def __post_init__(self):
        if self.n_streamers < 1 or self.n_viewers < 1:
            raise DomainError("population counts must be >= 1")
        if self.n_rounds < 0:
            raise DomainError(f"n_rounds must be >= 0, got {self.n_rounds}")
        if not 0.0 <= self.base_revenue_share < 1.0:
            raise DomainError(f"base_revenue_share must lie in [0, 1), got {self.base_revenue_share}")
        if not 0.0 <= self.quality_decay_rate < 1.0:
            raise DomainError(f"quality_decay_rate must lie in [0, 1), got {self.quality_decay_rate}")
        if self.random_effect_scale < 0:
            raise DomainError(f"random_effect_scale must be >= 0, got {self.random_effect_scale}")
        if self.revenue_per_viewer < 0:
            raise DomainError(f"revenue_per_viewer must be >= 0, got {self.revenue_per_viewer}")
        if self.quality_responsiveness < 0:
            raise DomainError("quality_responsiveness must be >= 0")
        if self.investment_audience_scale <= 0:
            raise DomainError("investment_audience_scale must be > 0")
        if self.investment_step_cap <= 0:
            raise DomainError("investment_step_cap must be > 0")
        if self.exit_revenue_floor < 0:
            raise DomainError("exit_revenue_floor must be >= 0")
        if self.exit_patience < 1:
            raise DomainError("exit_patience must be >= 1")
        if self.n_content_types < 1:
            raise DomainError("n_content_types must be >= 1")
        if self.prices is not None and len(self.prices) != self.n_streamers:
            raise DomainError(
                f"prices has length {len(self.prices)}, expected {self.n_streamers}"
            )
        object.__setattr__(self, "policy_schedule", tuple(self.policy_schedule))
        for pol in self.policy_schedule:
            if pol.start_round > max(self.n_rounds, 1):
                raise DomainError(
                    f"policy start_round {pol.start_round} exceeds n_rounds {self.n_rounds}"
                )


@dataclass(frozen=True)
class RoundRecord:
    """Per-round tracking: audiences, money flows, qualities, satisfaction."""

    round_index: int
    viewer_counts: np.ndarray
    streamer_revenues: np.ndarray
    platform_revenue: float
    qualities: np.ndarray
    mean_satisfaction: float


def init_platform(cfg: SimConfig):
    """Sample fresh agent populations from a seeded generator.

    Streamer initial quality is normal(0.5, 0.2) clipped to [0.1, 0.9];
    cost coefficients are uniform on [0.1, 0.3]; viewer sensitivities use
    their stated uniform ranges. Identical seeds give identical
    populations.
    """
    rng = np.random.default_rng(cfg.seed)
    n, m = cfg.n_streamers, cfg.n_viewers

    q0 = np.clip(rng.normal(0.5, 0.2, size=n), 0.1, 0.9)
    cost_coef = rng.uniform(0.1, 0.3, size=n)
    content_type = rng.integers(0, cfg.n_content_types, size=n)
    streamers = [
        StreamerAgent(
            initial_quality=float(q0[i]),
            current_quality=float(q0[i]),
            cost_coefficient=float(cost_coef[i]),
            revenue_share=cfg.base_revenue_share,
            exposure_boost=1.0,
            followers=0,
            content_type=int(content_type[i]),
        )
        for i in range(n)
    ]

    interaction = rng.uniform(0.2, 0.8, size=m)
    price_sens = rng.uniform(0.3, 0.7, size=m)
    quality_sens = rng.uniform(0.4, 0.8, size=m)
    network_sens = rng.uniform(0.1, 0.4, size=m)
    preferred = rng.integers(0, cfg.n_content_types, size=m)
    loyalty = rng.uniform(0.3, 0.7, size=m)
    viewers = [
        ViewerAgent(
            interaction_willingness=float(interaction[j]),
            price_sensitivity=float(price_sens[j]),
            quality_sensitivity=float(quality_sens[j]),
            network_effect_sensitivity=float(network_sens[j]),
            preferred_content_type=int(preferred[j]),
            loyalty=float(loyalty[j]),
        )
        for j in range(m)
    ]
    return streamers, viewers, rng


def viewer_round_utility(
    viewer: ViewerAgent,
    streamer: StreamerAgent,
    streamer_index: int,
    prev_counts,
    cfg: SimConfig,
) -> float:
    """Systematic (noise-free) utility of one viewer for one streamer.

    The network term uses log(1 + previous audience) to damp the raw
    count at large viewer pools; the exposure boost enters as log(boost)
    so it acts as a multiplicative logit weight. Streamers that exited
    the platform are not choosable.
    """
    if not streamer.active:
        return float("-inf")
    price = cfg.prices[streamer_index] if cfg.prices is not None else 0.0
    count = float(prev_counts[streamer_index])
    u = viewer.quality_sensitivity * streamer.current_quality
    u += (
        viewer.network_effect_sensitivity
        * cfg.network_effect_beta
        * np.log1p(count)
    )
    u -= viewer.price_sensitivity * price
    if viewer.preferred_content_type == streamer.content_type:
        u += cfg.match_bonus
    if viewer.last_choice == streamer_index:
        u += viewer.loyalty
    u += np.log(streamer.exposure_boost)
    u += cfg.interaction_weight * viewer.interaction_willingness * np.log1p(count)
    return float(u)


@dataclass
class SimState:
    """Vectorized runtime state; the agent lists remain the init surface."""

    cfg: SimConfig
    rng: np.random.Generator
    # streamer columns
    quality: np.ndarray
    q_initial: np.ndarray
    cost_coef: np.ndarray
    revenue_share: np.ndarray
    exposure_boost: np.ndarray
    subsidy: np.ndarray
    followers: np.ndarray
    content_type: np.ndarray
    active: np.ndarray
    lean_rounds: np.ndarray
    # viewer columns
    interaction: np.ndarray
    price_sens: np.ndarray
    quality_sens: np.ndarray
    network_sens: np.ndarray
    preferred: np.ndarray
    loyalty: np.ndarray
    last_choice: np.ndarray
    satisfaction_mean: np.ndarray
    # round bookkeeping
    prev_counts: np.ndarray
    mean_quality_sens: float
    prices: np.ndarray

    @classmethod
    def from_populations(cls, cfg: SimConfig, streamers, viewers, rng) -> "SimState":
        n, m = cfg.n_streamers, cfg.n_viewers
        prices = (
            np.asarray(cfg.prices, dtype=float)
            if cfg.prices is not None
            else np.zeros(n)
        )
        quality_sens = np.array([v.quality_sensitivity for v in viewers])
        return cls(
            cfg=cfg,
            rng=rng,
            quality=np.array([s.current_quality for s in streamers]),
            q_initial=np.array([s.initial_quality for s in streamers]),
            cost_coef=np.array([s.cost_coefficient for s in streamers]),
            revenue_share=np.array([s.revenue_share for s in streamers]),
            exposure_boost=np.array([s.exposure_boost for s in streamers]),
            subsidy=np.zeros(n),
            followers=np.zeros(n, dtype=np.int64),
            content_type=np.array([s.content_type for s in streamers], dtype=np.int64),
            active=np.array([s.active for s in streamers], dtype=bool),
            lean_rounds=np.zeros(n, dtype=np.int64),
            interaction=np.array([v.interaction_willingness for v in viewers]),
            price_sens=np.array([v.price_sensitivity for v in viewers]),
            quality_sens=quality_sens,
            network_sens=np.array([v.network_effect_sensitivity for v in viewers]),
            preferred=np.array([v.preferred_content_type for v in viewers], dtype=np.int64),
            loyalty=np.array([v.loyalty for v in viewers]),
            last_choice=np.full(m, -1, dtype=np.int64),
            satisfaction_mean=np.zeros(m),
            prev_counts=np.zeros(n, dtype=np.int64),
            mean_quality_sens=float(quality_sens.mean()),
            prices=prices,
        )


def apply_policy(policy: PolicyIntervention, state: SimState, round_idx: int) -> None:
    """Apply one intervention for this round, ranking by last-round counts.

    Rankings are re-evaluated every round among streamers still on the
    platform; ties break by streamer index (stable sort) so runs are
    reproducible.
    """
    if round_idx < policy.start_round:
        raise DomainError(
            f"policy starting at round {policy.start_round} applied at round {round_idx}"
        )
    n = state.cfg.n_streamers
    alive = np.flatnonzero(state.active)
    if policy.kind == "high_tax":
        if policy.top_k > n:
            raise DomainError(f"top_k {policy.top_k} exceeds streamer count {n}")
        order_desc = alive[np.argsort(-state.prev_counts[alive], kind="stable")]
        state.revenue_share[order_desc[: policy.top_k]] = policy.raised_share
        return
    k = int(np.floor(n * policy.bottom_fraction))
    if k < 1:
        raise DomainError(
            f"bottom_fraction {policy.bottom_fraction} selects no streamer of {n}"
        )
    order_asc = alive[np.argsort(state.prev_counts[alive], kind="stable")]
    targets = order_asc[:k]
    if policy.kind == "boost_small":
        state.exposure_boost[targets] = policy.boost_multiplier
    else:
        state.subsidy[targets] += policy.per_round_amount


def _round_utilities(state: SimState) -> np.ndarray:
    cfg = state.cfg
    lognet = np.log1p(state.prev_counts.astype(float))
    u = state.quality_sens[:, None] * state.quality[None, :]
    u = u + cfg.network_effect_beta * state.network_sens[:, None] * lognet[None, :]
    u = u - state.price_sens[:, None] * state.prices[None, :]
    u = u + cfg.match_bonus * (state.preferred[:, None] == state.content_type[None, :])
    u = u + np.log(state.exposure_boost)[None, :]
    if cfg.interaction_weight != 0.0:
        u = u + cfg.interaction_weight * state.interaction[:, None] * lognet[None, :]
    rows = np.flatnonzero(state.last_choice >= 0)
    u[rows, state.last_choice[rows]] += state.loyalty[rows]
    u[:, ~state.active] = -np.inf
    return u


def run_round(state: SimState, cfg: SimConfig, round_idx: int) -> RoundRecord:
    """Advance the platform by one round.

    Order of events: policies are re-applied from a clean slate, every
    viewer picks the argmax of utility plus Gumbel noise, money is split
    (platform keeps the exact remainder, so revenue conservation is an
    identity), satisfaction accumulates, qualities take one myopic
    profit-gradient step against decay, clamped to [0, 1], and streamers
    whose revenue stayed below the viability floor for exit_patience
    consecutive rounds leave the platform for good.
    """
    n, m = cfg.n_streamers, cfg.n_viewers

    state.revenue_share[:] = cfg.base_revenue_share
    state.exposure_boost[:] = 1.0
    state.subsidy[:] = 0.0
    for policy in cfg.policy_schedule:
        if round_idx >= policy.start_round:
            apply_policy(policy, state, round_idx)

    utilities = _round_utilities(state)
    if cfg.random_effect_scale > 0:
        noise = state.rng.gumbel(0.0, cfg.random_effect_scale, size=(m, n))
    else:
        noise = np.zeros((m, n))
    total = utilities + noise
    choices = np.argmax(total, axis=1)
    realized = total[np.arange(m), choices]
    counts = np.bincount(choices, minlength=n)

    r = cfg.revenue_per_viewer
    streamer_rev = (1.0 - state.revenue_share) * r * counts + state.subsidy
    platform_rev = r * m - float(streamer_rev.sum())

    state.satisfaction_mean += (realized - state.satisfaction_mean) / round_idx
    mean_satisfaction = float(realized.mean())

    # Myopic investment responds to expected share gains at a fixed
    # reference audience, so incentives do not escalate with raw M.
    p_hat = counts / m
    marginal_audience = (
        cfg.investment_audience_scale * state.mean_quality_sens * p_hat * (1.0 - p_hat)
    )
    if cfg.boost_investment:
        marginal_audience = marginal_audience * state.exposure_boost
    step = cfg.quality_responsiveness * (
        (1.0 - state.revenue_share) * r * marginal_audience
        - 2.0 * state.cost_coef * state.quality
    )
    # Per-round production capacity bound on organic investment.
    step = np.minimum(step, cfg.investment_step_cap)
    if cfg.investment_min_revenue > 0.0:
        cannot_afford = streamer_rev < cfg.investment_min_revenue
        step = np.where(cannot_afford & (step > 0), 0.0, step)
    # Earmarked support converts directly into production capacity.
    step = step + cfg.subsidy_quality_efficiency * state.subsidy
    state.quality = np.clip(
        state.quality * (1.0 - cfg.quality_decay_rate) + step, 0.0, 1.0
    )

    if cfg.exit_revenue_floor > 0.0:
        lean = streamer_rev < cfg.exit_revenue_floor
        state.lean_rounds = np.where(
            state.active & lean, state.lean_rounds + 1, 0
        )
        newly_exited = state.active & (state.lean_rounds >= cfg.exit_patience)
        if newly_exited.any() and bool((state.active & ~newly_exited).any()):
            state.active &= ~newly_exited

    state.followers += counts
    state.last_choice = choices
    state.prev_counts = counts

    return RoundRecord(
        round_index=round_idx,
        viewer_counts=counts.copy(),
        streamer_revenues=streamer_rev,
        platform_revenue=platform_rev,
        qualities=state.quality.copy(),
        mean_satisfaction=mean_satisfaction,
    )


@dataclass(frozen=True)
class SimRun:
    """A completed simulation plus the context metrics need."""

    records: tuple[RoundRecord, ...]
    q_initial: np.ndarray
    final_satisfaction_means: np.ndarray
    state: SimState


def simulate(cfg: SimConfig) -> SimRun:
    """Initialize populations and run all rounds; deterministic per seed."""
    streamers, viewers, rng = init_platform(cfg)
    state = SimState.from_populations(cfg, streamers, viewers, rng)
    records = [run_round(state, cfg, idx) for idx in range(1, cfg.n_rounds + 1)]
    return SimRun(
        records=tuple(records),
        q_initial=state.q_initial.copy(),
        final_satisfaction_means=state.satisfaction_mean.copy(),
        state=state,
    )


def run_simulation(cfg: SimConfig) -> list[RoundRecord]:
    """Round history only; see simulate() for the richer result."""
    return list(simulate(cfg).records)
