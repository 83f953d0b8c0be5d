"""Tests for the static equilibrium solvers."""

import dataclasses

import numpy as np
import pytest

from headfx.core import MarketState, PlatformParams, StreamerParams, choice_probabilities
from headfx.equilibrium import (
    FixedPointConfig,
    enumerate_equilibria,
    find_critical_beta,
    max_share_from_perturbed_start,
    solve_joint_equilibrium,
    solve_viewer_fixed_point,
)
from headfx.errors import BracketError, DomainError

CFG = FixedPointConfig(tol=1e-11, max_iter=40000)


def symmetric_instance(n=2, m=100.0, alpha=1.0, c=2.0, beta=0.0, tau=0.2):
    plat = PlatformParams(n_streamers=n, n_viewers=m, beta=beta, tau=tau)
    streamers = [StreamerParams(alpha=alpha, eta=1.0, cost_coefficient=c)] * n
    return plat, streamers


class TestViewerFixedPoint:
    def test_beta_zero_matches_closed_form(self):
        plat = PlatformParams(
            n_streamers=3, n_viewers=100, beta=0.0, prices=np.array([0.1, 0.0, 0.2])
        )
        streamers = [StreamerParams(alpha=a) for a in (1.0, 0.8, 1.2)]
        q = np.array([0.5, 0.7, 0.4])
        closed = 100 * choice_probabilities(
            np.array([1.0 * 0.5 - 0.1, 0.8 * 0.7, 1.2 * 0.4 - 0.2])
        )
        # undamped iteration lands in one effective step
        one_step = solve_viewer_fixed_point(
            plat, streamers, q, np.full(3, 100 / 3), dataclasses.replace(CFG, damping=1.0)
        )
        assert one_step.iterations <= 2
        assert one_step.state.n == pytest.approx(closed, abs=1e-9 * 100)
        # damping does not move the fixed point
        damped = solve_viewer_fixed_point(plat, streamers, q, np.full(3, 100 / 3), CFG)
        assert damped.state.n == pytest.approx(closed, abs=1e-9 * 100)
        assert damped.converged

    def test_symmetric_two_streamers_small_beta(self):
        plat, streamers = symmetric_instance(beta=0.001)
        res = solve_viewer_fixed_point(
            plat, streamers, np.array([0.5, 0.5]), np.array([50.0, 50.0]), CFG
        )
        assert res.converged
        assert res.state.n == pytest.approx([50.0, 50.0], abs=1e-8)

    def test_strong_beta_concentrates_and_satisfies_logit_identity(self):
        plat, streamers = symmetric_instance(beta=0.2)  # beta*M = 20 >> ln 2
        res = solve_viewer_fixed_point(
            plat, streamers, np.array([0.5, 0.5]), np.array([60.0, 40.0]), CFG
        )
        assert res.converged
        n_star = res.state.n
        assert n_star.max() / 100.0 > 0.95
        # direct damped-map oracle, independently iterated
        n = np.array([60.0, 40.0])
        for _ in range(20000):
            v = 1.0 * res.state.q - 0.0 + 0.2 * n
            e = np.exp(v - v.max())
            n = 0.5 * n + 0.5 * 100 * e / e.sum()
        assert n == pytest.approx(n_star, abs=1e-7)
        # logit ratio identity at the fixed point (log form): the tiny
        # loser audience carries the solver residual, so compare logs
        top, other = np.argmax(n_star), np.argmin(n_star)
        dq = res.state.q[top] - res.state.q[other]
        assert np.log(n_star[top] / n_star[other]) == pytest.approx(
            1.0 * dq + 0.2 * (n_star[top] - n_star[other]), abs=1e-4
        )

    def test_residual_reported_on_non_convergence(self):
        plat, streamers = symmetric_instance(beta=0.2)
        res = solve_viewer_fixed_point(
            plat,
            streamers,
            np.array([0.5, 0.5]),
            np.array([60.0, 40.0]),
            FixedPointConfig(tol=1e-14, max_iter=3),
        )
        assert not res.converged
        assert res.residual > 1e-14

    def test_start_outside_box_rejected(self):
        plat, streamers = symmetric_instance()
        with pytest.raises(DomainError):
            solve_viewer_fixed_point(plat, streamers, np.zeros(2), np.array([150.0, 0.0]), CFG)

    def test_iterates_stay_within_bounds(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            n = int(rng.integers(2, 5))
            plat = PlatformParams(
                n_streamers=n, n_viewers=100, beta=float(rng.uniform(0, 0.3))
            )
            streamers = [StreamerParams(alpha=float(a)) for a in rng.uniform(0.5, 1.5, n)]
            res = solve_viewer_fixed_point(
                plat, streamers, rng.uniform(0, 1, n), 100 * rng.dirichlet(np.ones(n)), CFG
            )
            assert np.all(res.state.n >= 0) and np.all(res.state.n <= 100)
            assert res.state.n.sum() == pytest.approx(100, abs=1e-7)


class TestJointEquilibrium:
    def test_zero_alpha_gives_zero_quality_uniform_audience(self):
        plat = PlatformParams(n_streamers=3, n_viewers=90, beta=0.0)
        streamers = [StreamerParams(alpha=0.0, cost_coefficient=1.0)] * 3
        res = solve_joint_equilibrium(plat, streamers, CFG)
        assert res.converged
        assert res.state.q == pytest.approx(np.zeros(3), abs=1e-12)
        assert res.state.n == pytest.approx(np.full(3, 30.0), abs=1e-8)

    def test_symmetric_quality_closed_form(self):
        plat, streamers = symmetric_instance(beta=0.001, c=2.0)
        res = solve_joint_equilibrium(plat, streamers, CFG)
        assert res.converged
        q_expected = (1 - 0.2) * 1.0 * 100 * 1.0 * 0.25 / (2 * 2.0)
        assert res.state.q == pytest.approx([q_expected] * 2, abs=1e-6)

    def test_idempotent_at_convergence(self):
        plat, streamers = symmetric_instance(beta=0.01, c=2.0)
        res = solve_joint_equilibrium(plat, streamers, CFG)
        again = solve_joint_equilibrium(plat, streamers, CFG, n0=res.state.n, q0=res.state.q)
        assert np.max(np.abs(again.state.n - res.state.n)) <= 10 * CFG.tol
        assert np.max(np.abs(again.state.q - res.state.q)) <= 10 * CFG.tol

    def test_defining_equations_hold(self):
        rng = np.random.default_rng(22)
        for _ in range(5):
            n = int(rng.integers(2, 5))
            plat = PlatformParams(
                n_streamers=n, n_viewers=100, beta=float(rng.uniform(0, 0.01)),
                tau=0.2,
            )
            streamers = [
                StreamerParams(alpha=float(a), cost_coefficient=float(c))
                for a, c in zip(rng.uniform(0.8, 1.2, n), rng.uniform(1.5, 3.0, n))
            ]
            res = solve_joint_equilibrium(plat, streamers, CFG)
            assert res.converged
            state = res.state
            p = choice_probabilities(
                np.array([s.alpha for s in streamers]) * state.q + 0.0 + plat.beta * state.n
            )
            assert np.max(np.abs(state.n - 100 * p)) <= CFG.tol * 10
            marginal = 2.0 * np.array([s.cost_coefficient for s in streamers]) * state.q
            revenue = 0.8 * 100 * np.array([s.alpha for s in streamers]) * p * (1 - p)
            assert np.all(np.abs(marginal - revenue) <= 1e-7 * (1 + np.abs(marginal)))


class TestEnumerate:
    def test_unique_below_threshold(self):
        plat, streamers = symmetric_instance(n=2, beta=0.005, c=2.0)
        found = enumerate_equilibria(plat, streamers, dataclasses.replace(CFG, n_starts=32), seed=0)
        assert len(found) == 1

    def test_mirrored_equilibria_above_threshold(self):
        plat, streamers = symmetric_instance(n=2, beta=0.2, c=2.0)
        found = enumerate_equilibria(plat, streamers, dataclasses.replace(CFG, n_starts=16), seed=1)
        assert len(found) >= 2
        dominant = {int(np.argmax(eq.state.n)) for eq in found}
        assert dominant == {0, 1}

    def test_single_streamer(self):
        plat = PlatformParams(n_streamers=1, n_viewers=50, beta=0.0)
        streamers = [StreamerParams(alpha=1.0, cost_coefficient=2.0)]
        found = enumerate_equilibria(plat, streamers, dataclasses.replace(CFG, n_starts=4), seed=2)
        assert len(found) == 1
        assert found[0].state.n == pytest.approx([50.0], abs=1e-8)

    def test_equilibrium_set_permutation_equivariant(self):
        plat = PlatformParams(n_streamers=3, n_viewers=90, beta=0.003)
        alphas = [1.0, 0.9, 1.1]
        streamers = [StreamerParams(alpha=a, cost_coefficient=2.0) for a in alphas]
        found = enumerate_equilibria(plat, streamers, dataclasses.replace(CFG, n_starts=8), seed=3)
        perm = [2, 0, 1]
        streamers_p = [streamers[i] for i in perm]
        found_p = enumerate_equilibria(
            plat, streamers_p, dataclasses.replace(CFG, n_starts=8), seed=3
        )
        assert len(found) == len(found_p) == 1
        assert found_p[0].state.n == pytest.approx(found[0].state.n[perm], abs=1e-6)


class TestCriticalBeta:
    def test_classification_monotone_on_grid(self):
        plat, streamers = symmetric_instance(n=2, c=2.0)
        flags = []
        for beta in np.linspace(1e-4, 0.3, 20):
            share, _ = max_share_from_perturbed_start(
                dataclasses.replace(plat, beta=float(beta)), streamers, CFG
            )
            flags.append(share >= 0.95)
        assert flags == sorted(flags)

    def test_zero_beta_never_concentrated(self):
        for n in (2, 5):
            plat, streamers = symmetric_instance(n=n, c=2.0)
            share, _ = max_share_from_perturbed_start(plat, streamers, CFG)
            assert share < 0.95

    def test_bisection_brackets_the_threshold(self):
        plat, streamers = symmetric_instance(n=2, c=2.0)
        beta_star = find_critical_beta(plat, streamers, 1e-4, 0.3, 0.95, CFG)
        delta = 2 * 1e-3 * (0.3 - 1e-4)
        below, _ = max_share_from_perturbed_start(
            dataclasses.replace(plat, beta=beta_star - delta), streamers, CFG
        )
        above, _ = max_share_from_perturbed_start(
            dataclasses.replace(plat, beta=beta_star + delta), streamers, CFG
        )
        assert below < 0.95 <= above

    def test_bad_bracket_raises(self):
        plat, streamers = symmetric_instance(n=2, c=2.0)
        with pytest.raises(BracketError, match="straddle"):
            find_critical_beta(plat, streamers, 1e-5, 1e-4, 0.95, CFG)

    def test_threshold_domain_validated(self):
        plat, streamers = symmetric_instance(n=2, c=2.0)
        with pytest.raises(DomainError):
            find_critical_beta(plat, streamers, 1e-4, 0.3, 0.4, CFG)


class TestFixedPointConfig:
    def test_invariants(self):
        with pytest.raises(DomainError):
            FixedPointConfig(damping=0.0)
        with pytest.raises(DomainError):
            FixedPointConfig(damping=1.5)
        with pytest.raises(DomainError):
            FixedPointConfig(tol=0.0)
        with pytest.raises(DomainError):
            FixedPointConfig(max_iter=0)
        with pytest.raises(DomainError):
            FixedPointConfig(n_starts=0)
