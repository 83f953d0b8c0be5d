"""Static equilibrium solvers.

Damped fixed-point iteration for the implicit audience system
n = M * P(n, q), joint (n, q) equilibria via alternation with the
closed-form quality best response, multi-start enumeration of distinct
equilibria, and bisection for the critical network-effect strength at
which near-symmetric markets collapse into a concentrated outcome.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .core import (
    MarketState,
    PlatformParams,
    TrafficAllocation,
    streamer_arrays,
)
from .errors import BracketError, DomainError, NumericalError

__all__ = [
    "Q_MAX",
    "FixedPointConfig",
    "EquilibriumResult",
    "solve_viewer_fixed_point",
    "solve_joint_equilibrium",
    "enumerate_equilibria",
    "find_critical_beta",
    "max_share_from_perturbed_start",
]

# Quality best responses are clamped to [0, Q_MAX] to guard divergence in
# early iterations; keep interior optima below this in test instances.
Q_MAX = 10.0


@dataclass(frozen=True)
class FixedPointConfig:
    """Iteration controls for the fixed-point and joint solvers."""

    damping: float = 0.5
    tol: float = 1e-10
    max_iter: int = 5000
    n_starts: int = 32

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise DomainError(f"damping must lie in (0, 1], got {self.damping}")
        if self.tol <= 0:
            raise DomainError(f"tol must be > 0, got {self.tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.n_starts < 1:
            raise DomainError(f"n_starts must be >= 1, got {self.n_starts}")


@dataclass(frozen=True)
class EquilibriumResult:
    """Outcome of a solve: final state, convergence flag, effort, residual.

    residual is the max-norm of n - M * P(n, q) at the returned state.
    """

    state: MarketState
    converged: bool
    iterations: int
    residual: float

    def shares(self) -> np.ndarray:
        total = self.state.n.sum()
        return self.state.n / total if total > 0 else self.state.n

    def max_share(self) -> float:
        return float(self.shares().max()) if self.state.n.sum() > 0 else 0.0


def _utilities(platform, alpha, q, n, theta_vec):
    v = alpha * q - platform.prices + platform.beta * n
    if theta_vec is not None:
        v = v + platform.phi * theta_vec
    return v


def _softmax(v: np.ndarray) -> np.ndarray:
    e = np.exp(v - v.max())
    return e / e.sum()


def _viewer_fixed_point_raw(platform, alpha, q, n0, cfg, theta_vec):
    """Damped iteration on raw arrays; returns (n, converged, iters, residual)."""
    m = float(platform.n_viewers)
    n = np.asarray(n0, dtype=float).copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        p = _softmax(_utilities(platform, alpha, q, n, theta_vec))
        target = m * p
        residual = float(np.max(np.abs(n - target)))
        if not np.isfinite(residual):
            raise NumericalError("non-finite residual in viewer fixed-point iteration")
        if residual <= cfg.tol:
            break
        n = (1.0 - cfg.damping) * n + cfg.damping * target
    return n, residual <= cfg.tol, iterations, residual


def solve_viewer_fixed_point(
    platform: PlatformParams,
    streamers,
    q,
    n0,
    cfg: FixedPointConfig,
    theta: TrafficAllocation | None = None,
) -> EquilibriumResult:
    """Solve n = M * P(n, q) at fixed quality by damped iteration.

    Iterates n <- (1 - damping) n + damping * M * P(n, q) until the
    max-norm residual drops below cfg.tol. Non-convergence is reported in
    the result, not raised; iterates stay inside [0, M] by construction.
    """
    m = float(platform.n_viewers)
    n0 = np.asarray(n0, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(n0 < 0) or np.any(n0 > m):
        raise DomainError("n0 entries must lie in [0, M]")
    alpha, _, _ = streamer_arrays(streamers)
    theta_vec = theta.theta if theta is not None else None
    n, converged, iterations, residual = _viewer_fixed_point_raw(
        platform, alpha, q, n0, cfg, theta_vec
    )
    state = MarketState(n=n, q=q, t=0.0)
    return EquilibriumResult(
        state=state, converged=converged, iterations=iterations, residual=residual
    )


def _quality_best_response(platform, alpha, c, p) -> np.ndarray:
    # FOC c'(q) = (1 - tau) R M alpha P (1 - P); quadratic cost gives the
    # closed form below, clamped to guard early-iteration divergence.
    raw = (
        (1.0 - platform.tau)
        * platform.revenue_per_viewer
        * platform.n_viewers
        * alpha
        * p
        * (1.0 - p)
        / (2.0 * c)
    )
    return np.clip(raw, 0.0, Q_MAX)


def solve_joint_equilibrium(
    platform: PlatformParams,
    streamers,
    cfg: FixedPointConfig,
    n0=None,
    q0=None,
    theta: TrafficAllocation | None = None,
) -> EquilibriumResult:
    """Alternate viewer fixed points with quality best responses.

    Stops when the joint max-norm change of (n, q) over one outer round
    is at most cfg.tol; the returned residual is re-evaluated from a
    final viewer polish at the converged quality.
    """
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    alpha, _, c = streamer_arrays(streamers)
    theta_vec = theta.theta if theta is not None else None

    n = np.full(big_n, m / big_n) if n0 is None else np.asarray(n0, dtype=float).copy()
    if q0 is None:
        p = _softmax(_utilities(platform, alpha, np.zeros(big_n), n, theta_vec))
        q = _quality_best_response(platform, alpha, c, p)
    else:
        q = np.asarray(q0, dtype=float).copy()

    converged_inner = False
    outer = 0
    for outer in range(1, cfg.max_iter + 1):
        inner = solve_viewer_fixed_point(platform, streamers, q, n, cfg, theta)
        converged_inner = inner.converged
        n_new = inner.state.n
        p = n_new / m if m > 0 else _softmax(_utilities(platform, alpha, q, n_new, theta_vec))
        q_target = _quality_best_response(platform, alpha, c, p)
        q_new = (1.0 - cfg.damping) * q + cfg.damping * q_target
        change = max(
            float(np.max(np.abs(n_new - n))),
            float(np.max(np.abs(q_new - q))),
        )
        n, q = n_new, q_new
        if converged_inner and change <= cfg.tol:
            break

    polish = solve_viewer_fixed_point(platform, streamers, q, n, cfg, theta)
    state = MarketState(n=polish.state.n, q=q, t=0.0)
    converged = converged_inner and polish.converged and outer < cfg.max_iter
    return EquilibriumResult(
        state=state,
        converged=converged,
        iterations=outer,
        residual=polish.residual,
    )


def _cluster_distance(a: EquilibriumResult, b: EquilibriumResult) -> float:
    da = np.max(np.abs(a.state.n - b.state.n))
    dq = np.max(np.abs(a.state.q - b.state.q))
    return float(max(da, dq))


def enumerate_equilibria(
    platform: PlatformParams,
    streamers,
    cfg: FixedPointConfig,
    seed: int,
) -> list[EquilibriumResult]:
    """Multi-start probe for distinct joint equilibria.

    Runs the joint solver from cfg.n_starts Dirichlet-uniform audience
    vectors on the scaled simplex, drops non-converged runs, and merges
    results within max-norm distance 10 * cfg.tol of an earlier find.
    Returned equilibria are sorted by descending max audience share.
    """
    rng = np.random.default_rng(seed)
    m = float(platform.n_viewers)
    starts = rng.dirichlet(np.ones(platform.n_streamers), size=cfg.n_starts) * m

    distinct: list[EquilibriumResult] = []
    for n0 in starts:
        res = solve_joint_equilibrium(platform, streamers, cfg, n0=n0)
        if not res.converged:
            continue
        if all(_cluster_distance(res, other) >= 10.0 * cfg.tol for other in distinct):
            distinct.append(res)
    distinct.sort(key=lambda r: r.max_share(), reverse=True)
    return distinct


def max_share_from_perturbed_start(
    platform: PlatformParams,
    streamers,
    cfg: FixedPointConfig,
    perturbation: float = 1e-3,
) -> tuple[float, EquilibriumResult]:
    """Deterministic concentration probe used by the critical-beta search.

    Starts the joint solver from the symmetric audience split with
    coordinate 0 nudged up by perturbation * M, which fixes which
    streamer dominates whenever concentration occurs.
    """
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    n0 = np.full(big_n, m / big_n)
    n0[0] = min(n0[0] + perturbation * m, m)
    res = solve_joint_equilibrium(platform, streamers, cfg, n0=n0)
    return res.max_share(), res


def find_critical_beta(
    platform: PlatformParams,
    streamers,
    beta_lo: float,
    beta_hi: float,
    share_threshold: float = 0.95,
    cfg: FixedPointConfig | None = None,
) -> float:
    """Bisect for the smallest beta at which the market concentrates.

    A beta value is classified concentrated when the perturbed-symmetric
    probe reaches a max share of at least share_threshold. The bracket
    ends must classify differently; bisection stops once the bracket
    shrinks below 1e-3 of its initial width and returns the midpoint.
    """
    if cfg is None:
        cfg = FixedPointConfig()
    if not beta_lo < beta_hi:
        raise DomainError(f"need beta_lo < beta_hi, got [{beta_lo}, {beta_hi}]")
    big_n = platform.n_streamers
    if not 1.0 / big_n < share_threshold < 1.0:
        raise DomainError(
            f"share_threshold must lie in (1/N, 1) = ({1.0 / big_n}, 1), got {share_threshold}"
        )

    def concentrated(beta: float) -> bool:
        plat = dataclasses.replace(platform, beta=beta)
        share, _ = max_share_from_perturbed_start(plat, streamers, cfg)
        return share >= share_threshold

    lo, hi = float(beta_lo), float(beta_hi)
    c_lo, c_hi = concentrated(lo), concentrated(hi)
    if c_lo == c_hi:
        raise BracketError(
            "bracket does not straddle threshold: "
            f"beta={lo} and beta={hi} both classify concentrated={c_lo}"
        )
    width0 = hi - lo
    while hi - lo > 1e-3 * width0:
        mid = 0.5 * (lo + hi)
        if concentrated(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
