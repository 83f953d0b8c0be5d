"""Continuous-time audience/quality dynamics.

Fixed-step RK4 integration of the coupled system

    dn_i/dt = gamma (M P_i - n_i)
    dq_i/dt = eta_i ((1 - tau) R M alpha_i P_i (1 - P_i) - 2 c_i q_i)

plus local stability via the Jacobian, twin-run path-dependence
experiments, concentration (HHI), and phase-portrait sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    MarketState,
    PlatformParams,
    TrafficAllocation,
    streamer_arrays,
)
from .equilibrium import _quality_best_response, _softmax, _utilities
from .errors import (
    DimensionMismatchError,
    DivergenceError,
    DomainError,
    NonFiniteError,
)

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "StabilityReport",
    "PathDependenceRecord",
    "PortraitResult",
    "rhs",
    "integrate",
    "jacobian",
    "analytic_viewer_blocks",
    "assess_stability",
    "stability_at",
    "path_dependence_experiment",
    "hhi",
    "phase_portrait",
]

# Integration aborts when any state magnitude passes this bound.
_EXPLOSION_BOUND = 1e12
# Slack on the runtime check that audiences stay inside [0, M].
_N_BOUND_SLACK = 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integrator controls; only classic RK4 is supported."""

    dt: float = 0.01
    t_end: float = 200.0
    method: str = "rk4"
    record_every: int = 1

    def __post_init__(self):
        if self.dt <= 0:
            raise DomainError(f"dt must be > 0, got {self.dt}")
        if self.t_end <= 0:
            raise DomainError(f"t_end must be > 0, got {self.t_end}")
        if self.method != "rk4":
            raise DomainError(f"unsupported method {self.method!r}, only 'rk4'")
        if self.record_every < 1:
            raise DomainError(f"record_every must be >= 1, got {self.record_every}")


@dataclass(frozen=True)
class Trajectory:
    """Sampled path of the market state at strictly increasing times."""

    times: np.ndarray
    states: tuple[MarketState, ...]

    def n_matrix(self) -> np.ndarray:
        return np.array([s.n for s in self.states])

    def q_matrix(self) -> np.ndarray:
        return np.array([s.q for s in self.states])

    @property
    def terminal(self) -> MarketState:
        return self.states[-1]


@dataclass(frozen=True)
class StabilityReport:
    """Real parts of the Jacobian spectrum and the stability verdict."""

    eigen_real_parts: np.ndarray
    stable: bool
    jacobian_step: float


def _rhs_arrays(platform, alpha, eta, c, n, q, theta_vec) -> tuple[np.ndarray, np.ndarray]:
    p = _softmax(_utilities(platform, alpha, q, n, theta_vec))
    m = platform.n_viewers
    dn = platform.gamma * (m * p - n)
    marginal_revenue = (
        (1.0 - platform.tau) * platform.revenue_per_viewer * m * alpha * p * (1.0 - p)
    )
    dq = eta * (marginal_revenue - 2.0 * c * q)
    return dn, dq


def rhs(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
) -> np.ndarray:
    """Time derivative (dn/dt, dq/dt) of length 2N at the given state."""
    if not (np.all(np.isfinite(state.n)) and np.all(np.isfinite(state.q))):
        raise NonFiniteError("state contains non-finite entries")
    if state.n.shape[0] != platform.n_streamers:
        raise DimensionMismatchError(
            f"state has {state.n.shape[0]} streamers, expected {platform.n_streamers}"
        )
    alpha, eta, c = streamer_arrays(streamers)
    theta_vec = theta.theta if theta is not None else None
    dn, dq = _rhs_arrays(platform, alpha, eta, c, state.n, state.q, theta_vec)
    return np.concatenate([dn, dq])


def integrate(
    platform: PlatformParams,
    streamers,
    state0: MarketState,
    cfg: IntegratorConfig,
    theta: TrafficAllocation | None = None,
) -> Trajectory:
    """Classic RK4 with post-step projection of q onto [0, inf).

    The quality drift can transiently push q below zero near q = 0, so
    each accepted step clamps q (and shaves float-noise negatives off n).
    Blow-ups and audiences escaping [0, M] raise DivergenceError naming t.
    """
    alpha, eta, c = streamer_arrays(streamers)
    theta_vec = theta.theta if theta is not None else None
    m = float(platform.n_viewers)
    dt = cfg.dt
    n_steps = int(round(cfg.t_end / dt))

    def f(n, q):
        return _rhs_arrays(platform, alpha, eta, c, n, q, theta_vec)

    n = state0.n.copy()
    q = state0.q.copy()
    times = [0.0]
    states = [MarketState(n=n.copy(), q=q.copy(), t=0.0)]

    for step in range(1, n_steps + 1):
        k1n, k1q = f(n, q)
        k2n, k2q = f(n + 0.5 * dt * k1n, q + 0.5 * dt * k1q)
        k3n, k3q = f(n + 0.5 * dt * k2n, q + 0.5 * dt * k2q)
        k4n, k4q = f(n + dt * k3n, q + dt * k3q)
        n = n + (dt / 6.0) * (k1n + 2.0 * k2n + 2.0 * k3n + k4n)
        q = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        q = np.maximum(q, 0.0)
        n = np.maximum(n, 0.0)
        t = step * dt

        if not (np.all(np.isfinite(n)) and np.all(np.isfinite(q))):
            raise DivergenceError(f"non-finite state at t={t:.6g}", t=t)
        if max(np.max(np.abs(n)), np.max(np.abs(q))) > _EXPLOSION_BOUND:
            raise DivergenceError(f"state exceeded {_EXPLOSION_BOUND:g} at t={t:.6g}", t=t)
        if np.any(n > m * (1.0 + _N_BOUND_SLACK)):
            raise DivergenceError(
                f"audience left [0, M] at t={t:.6g}; decrease dt", t=t
            )

        if step % cfg.record_every == 0 or step == n_steps:
            times.append(t)
            states.append(MarketState(n=n.copy(), q=q.copy(), t=t))

    return Trajectory(times=np.array(times), states=tuple(states))


def jacobian(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
    base_step: float = 1e-6,
) -> np.ndarray:
    """Central finite-difference Jacobian of the flow, 2N x 2N.

    Per-coordinate step h_i = base_step * (1 + |x_i|) on the stacked
    state x = (n, q).
    """
    alpha, eta, c = streamer_arrays(streamers)
    theta_vec = theta.theta if theta is not None else None
    big_n = platform.n_streamers
    x0 = np.concatenate([state.n, state.q])

    def f(x):
        dn, dq = _rhs_arrays(platform, alpha, eta, c, x[:big_n], x[big_n:], theta_vec)
        return np.concatenate([dn, dq])

    dim = 2 * big_n
    jac = np.empty((dim, dim))
    for i in range(dim):
        h = base_step * (1.0 + abs(x0[i]))
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += h
        xm[i] -= h
        jac[:, i] = (f(xp) - f(xm)) / (2.0 * h)
    return jac


def analytic_viewer_blocks(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form audience-row Jacobian blocks (d ndot/dn, d ndot/dq).

    Uses dP_i/dV_j = P_i (delta_ij - P_j) with dV_j/dn_j = beta and
    dV_j/dq_j = alpha_j; exposed to cross-validate the numeric Jacobian.
    """
    alpha, _, _ = streamer_arrays(streamers)
    theta_vec = theta.theta if theta is not None else None
    p = _softmax(_utilities(platform, alpha, state.q, state.n, theta_vec))
    m = platform.n_viewers
    big_n = platform.n_streamers
    dp_dv = np.diag(p) - np.outer(p, p)
    dndot_dn = platform.gamma * (m * platform.beta * dp_dv - np.eye(big_n))
    dndot_dq = platform.gamma * m * dp_dv * alpha[np.newaxis, :]
    return dndot_dn, dndot_dq


def assess_stability(jac: np.ndarray, jacobian_step: float = 1e-6) -> StabilityReport:
    """Eigenvalue test: stable iff every real part is below -1e-9."""
    jac = np.asarray(jac, dtype=float)
    if jac.ndim != 2 or jac.shape[0] != jac.shape[1]:
        raise DimensionMismatchError(f"Jacobian must be square, got shape {jac.shape}")
    if not np.all(np.isfinite(jac)):
        raise NonFiniteError("Jacobian contains non-finite entries")
    real_parts = np.sort(np.linalg.eigvals(jac).real)[::-1]
    return StabilityReport(
        eigen_real_parts=real_parts,
        stable=bool(real_parts[0] < -1e-9),
        jacobian_step=jacobian_step,
    )


def stability_at(
    platform: PlatformParams,
    streamers,
    state: MarketState,
    theta: TrafficAllocation | None = None,
    base_step: float = 1e-6,
) -> StabilityReport:
    """Jacobian + eigenvalue assessment in one call."""
    jac = jacobian(platform, streamers, state, theta, base_step)
    return assess_stability(jac, jacobian_step=base_step)


def hhi(n) -> float:
    """Herfindahl-Hirschman index of an audience vector, in [1/N, 1]."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 0):
        raise DomainError("audience entries must be >= 0")
    total = n.sum()
    if total <= 0:
        raise DomainError("cannot compute HHI of an all-zero vector")
    shares = n / total
    return float(np.sum(shares * shares))


@dataclass(frozen=True)
class PathDependenceRecord:
    """Twin-run divergence record.

    gap_plus/gap_minus track n_0(t) - n_1(t) inside each twin; the plus
    twin starts with streamer 0 ahead by delta0/2, the minus twin behind
    by the same amount.
    """

    times: np.ndarray
    gap_plus: np.ndarray
    gap_minus: np.ndarray
    winner_plus: int
    winner_minus: int
    dominant_share_plus: float
    dominant_share_minus: float
    terminal_hhi_plus: float
    terminal_hhi_minus: float
    trajectory_plus: Trajectory
    trajectory_minus: Trajectory

    @property
    def terminal_share_gap(self) -> float:
        """Largest terminal |share_0 - share_1| across the two twins."""
        m_plus = self.trajectory_plus.terminal.n.sum()
        m_minus = self.trajectory_minus.terminal.n.sum()
        return float(
            max(abs(self.gap_plus[-1]) / m_plus, abs(self.gap_minus[-1]) / m_minus)
        )


def path_dependence_experiment(
    platform: PlatformParams,
    streamers,
    delta0: float,
    cfg: IntegratorConfig,
    state0: MarketState | None = None,
) -> PathDependenceRecord:
    """Integrate twin systems whose starts differ only in n_0 by +-delta0/2.

    The default start is the symmetric audience split with the myopic
    best-response quality, which for identical streamers sits exactly on
    the symmetric branch so the twins isolate the perturbation.
    """
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    if big_n < 2:
        raise DomainError("path dependence needs at least 2 streamers")
    if not 0.0 < delta0 < m:
        raise DomainError(f"delta0 must lie in (0, M), got {delta0}")

    if state0 is None:
        alpha, _, c = streamer_arrays(streamers)
        n_base = np.full(big_n, m / big_n)
        p = np.full(big_n, 1.0 / big_n)
        q_base = _quality_best_response(platform, alpha, c, p)
        state0 = MarketState(n=n_base, q=q_base, t=0.0)

    n_plus = state0.n.copy()
    n_plus[0] = min(n_plus[0] + delta0 / 2.0, m)
    n_minus = state0.n.copy()
    n_minus[0] = max(n_minus[0] - delta0 / 2.0, 0.0)

    traj_plus = integrate(platform, streamers, MarketState(n_plus, state0.q.copy()), cfg)
    traj_minus = integrate(platform, streamers, MarketState(n_minus, state0.q.copy()), cfg)

    np_mat = traj_plus.n_matrix()
    nm_mat = traj_minus.n_matrix()
    term_plus = traj_plus.terminal.n
    term_minus = traj_minus.terminal.n
    return PathDependenceRecord(
        times=traj_plus.times,
        gap_plus=np_mat[:, 0] - np_mat[:, 1],
        gap_minus=nm_mat[:, 0] - nm_mat[:, 1],
        winner_plus=int(np.argmax(term_plus)),
        winner_minus=int(np.argmax(term_minus)),
        dominant_share_plus=float(term_plus.max() / term_plus.sum()),
        dominant_share_minus=float(term_minus.max() / term_minus.sum()),
        terminal_hhi_plus=hhi(term_plus),
        terminal_hhi_minus=hhi(term_minus),
        trajectory_plus=traj_plus,
        trajectory_minus=traj_minus,
    )


@dataclass(frozen=True)
class PortraitResult:
    """Trajectories for a grid of starts; diverged runs are recorded, not raised."""

    trajectories: tuple[Trajectory | None, ...]
    failures: tuple[tuple[int, str], ...]

    def completed(self) -> list[Trajectory]:
        return [t for t in self.trajectories if t is not None]


def phase_portrait(
    platform: PlatformParams,
    streamers,
    initial_states,
    cfg: IntegratorConfig,
) -> PortraitResult:
    """Integrate every grid start, collecting per-run divergence failures."""
    initial_states = list(initial_states)
    if not initial_states:
        raise DomainError("phase_portrait needs a non-empty grid of initial states")
    trajectories: list[Trajectory | None] = []
    failures: list[tuple[int, str]] = []
    for idx, s0 in enumerate(initial_states):
        try:
            trajectories.append(integrate(platform, streamers, s0, cfg))
        except DivergenceError as exc:
            trajectories.append(None)
            failures.append((idx, str(exc)))
    return PortraitResult(trajectories=tuple(trajectories), failures=tuple(failures))
