"""Command-line interface.

    headfx <subcommand> [flags]

Subcommands: equilibrium, dynamics, simulate, ab-test, sweep,
optimize-theta. Exit codes: 0 success, 2 config error, 3 numerical
failure. All outputs are UTF-8 CSV with header rows.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .abm import SimConfig
from .core import MarketState, PlatformParams, StreamerParams, streamer_arrays
from .dynamics import (
    IntegratorConfig,
    hhi,
    integrate,
    path_dependence_experiment,
    phase_portrait,
    stability_at,
)
from .equilibrium import (
    FixedPointConfig,
    _quality_best_response,
    max_share_from_perturbed_start,
)
from .errors import ConfigError, DomainError, NumericalError
from .harness import (
    SCENARIO_NAMES,
    ScenarioSpec,
    SweepSpec,
    ab_compare,
    export_plot_data,
    export_phase_csv,
    make_scenario,
    parse_config,
    run_scenario,
    sensitivity_sweep,
)
from .metrics import METRIC_COLUMNS
from .welfare import grid_search_allocation, optimize_allocation, welfare_at_theta

__all__ = ["main"]


def analytic_instance(sim: SimConfig) -> tuple[PlatformParams, list[StreamerParams]]:
    """Map a scenario config onto the closed-form model.

    Streamer attractiveness is the mean viewer quality sensitivity (0.6),
    cost coefficients are drawn from the same uniform range as the agent
    population (seeded), and prices default to zero.
    """
    rng = np.random.default_rng(sim.seed)
    cost = rng.uniform(0.1, 0.3, size=sim.n_streamers)
    platform = PlatformParams(
        n_streamers=sim.n_streamers,
        n_viewers=sim.n_viewers,
        beta=sim.network_effect_beta,
        tau=sim.base_revenue_share,
        revenue_per_viewer=sim.revenue_per_viewer,
        gamma=1.0,
        phi=1.0,
        prices=np.asarray(sim.prices, dtype=float) if sim.prices is not None else None,
    )
    streamers = [
        StreamerParams(alpha=0.6, eta=1.0, cost_coefficient=float(c)) for c in cost
    ]
    return platform, streamers


def _load_scenario(args) -> ScenarioSpec:
    if args.config:
        spec = parse_config(args.config)
        if isinstance(spec, SweepSpec):
            raise ConfigError("this subcommand takes a scenario config, not a sweep")
    else:
        spec = make_scenario("Baseline")
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed_base=args.seed)
    if args.seeds is not None:
        spec = dataclasses.replace(spec, n_seeds=args.seeds)
    return spec


def _out_dir(args, default: str) -> Path:
    out = Path(args.out) if args.out else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_equilibrium(args) -> int:
    spec = _load_scenario(args)
    platform, streamers = analytic_instance(spec.sim)
    if args.beta is not None:
        platform = dataclasses.replace(platform, beta=args.beta)
    cfg = FixedPointConfig(tol=args.tol)
    share, result = max_share_from_perturbed_start(platform, streamers, cfg)
    if not result.converged:
        raise NumericalError(
            f"equilibrium solve did not converge (residual {result.residual:.3g})"
        )
    out = _out_dir(args, "headfx_out")
    path = out / "equilibrium.csv"
    n = result.state.n
    q = result.state.q
    with path.open("w", newline="") as fh:
        fh.write("streamer_id,n_star,q_star,share,profit\n")
        for i, s in enumerate(streamers):
            profit = (1 - platform.tau) * platform.revenue_per_viewer * n[i] - (
                s.cost_coefficient * q[i] ** 2
            )
            fh.write(
                f"{i + 1},{n[i]:.6g},{q[i]:.6g},{n[i] / platform.n_viewers:.6g},{profit:.6g}\n"
            )
    print(f"wrote {path} (max share {share:.4f}, residual {result.residual:.3g})")
    return 0


def _dynamics_start(platform, streamers) -> MarketState:
    m = float(platform.n_viewers)
    big_n = platform.n_streamers
    alpha, _, c = streamer_arrays(streamers)
    n0 = np.full(big_n, m / big_n)
    n0[0] = min(n0[0] + 1e-3 * m, m)
    q0 = _quality_best_response(platform, alpha, c, np.full(big_n, 1.0 / big_n))
    return MarketState(n=n0, q=q0)


def _cmd_dynamics(args) -> int:
    spec = _load_scenario(args)
    platform, streamers = analytic_instance(spec.sim)
    if args.beta is not None:
        platform = dataclasses.replace(platform, beta=args.beta)
    cfg = IntegratorConfig(dt=args.dt, t_end=args.t_end, record_every=args.record_every)
    out = _out_dir(args, "headfx_out")
    summary: dict = {"kind": args.kind, "beta": platform.beta}

    if args.kind == "trajectory":
        traj = integrate(platform, streamers, _dynamics_start(platform, streamers), cfg)
        path = out / "trajectory.csv"
        _write_trajectory_csv(path, traj)
        report = stability_at(platform, streamers, traj.terminal)
        summary["terminal_hhi"] = hhi(traj.terminal.n)
        summary["stable"] = report.stable
        summary["max_eigen_real_part"] = float(report.eigen_real_parts[0])
        print(f"wrote {path}")
    elif args.kind == "stability":
        fp_cfg = FixedPointConfig(tol=args.tol)
        share, result = max_share_from_perturbed_start(platform, streamers, fp_cfg)
        report = stability_at(platform, streamers, result.state)
        summary["equilibrium_max_share"] = share
        summary["terminal_hhi"] = hhi(result.state.n)
        summary["stable"] = report.stable
        summary["eigen_real_parts"] = [float(x) for x in report.eigen_real_parts]
    elif args.kind == "path-dependence":
        record = path_dependence_experiment(
            platform, streamers, delta0=args.delta0 * platform.n_viewers, cfg=cfg
        )
        path = out / "path_dependence.csv"
        with path.open("w", newline="") as fh:
            fh.write("t,gap_plus,gap_minus\n")
            for t, gp, gm in zip(record.times, record.gap_plus, record.gap_minus):
                fh.write(f"{t:.6g},{gp:.6g},{gm:.6g}\n")
        summary["winner_plus"] = record.winner_plus
        summary["winner_minus"] = record.winner_minus
        summary["terminal_hhi"] = record.terminal_hhi_plus
        summary["terminal_share_gap"] = record.terminal_share_gap
        print(f"wrote {path}")
    elif args.kind == "portrait":
        m = float(platform.n_viewers)
        big_n = platform.n_streamers
        alpha, _, c = streamer_arrays(streamers)
        starts = []
        for share0 in np.linspace(0.05, 0.95, args.grid):
            n0 = np.full(big_n, (1.0 - share0) * m / max(big_n - 1, 1))
            n0[0] = share0 * m
            p0 = n0 / m
            starts.append(
                MarketState(n=n0, q=_quality_best_response(platform, alpha, c, p0))
            )
        portrait = phase_portrait(platform, streamers, starts, cfg)
        path = export_phase_csv(portrait, out / "phase_portrait.csv")
        summary["n_trajectories"] = len(portrait.trajectories)
        summary["n_failures"] = len(portrait.failures)
        terminal_hhis = [hhi(t.terminal.n) for t in portrait.completed()]
        summary["terminal_hhi"] = terminal_hhis
        print(f"wrote {path}")
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown dynamics kind {args.kind!r}")

    sidecar = out / "dynamics_summary.json"
    sidecar.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"wrote {sidecar}")
    return 0


def _write_trajectory_csv(path: Path, traj) -> None:
    n_streamers = traj.states[0].n.shape[0]
    with path.open("w", newline="") as fh:
        header = (
            ["t"]
            + [f"n_{i + 1}" for i in range(n_streamers)]
            + [f"q_{i + 1}" for i in range(n_streamers)]
        )
        fh.write(",".join(header) + "\n")
        for t, state in zip(traj.times, traj.states):
            row = [f"{t:.6g}"]
            row += [f"{x:.6g}" for x in state.n]
            row += [f"{x:.6g}" for x in state.q]
            fh.write(",".join(row) + "\n")


def _cmd_simulate(args) -> int:
    spec = _load_scenario(args)
    out = _out_dir(args, "headfx_out")
    artifact = run_scenario(spec, out_dir=out, threads=args.threads)
    for kind in ("viewers", "revenues", "quality", "satisfaction"):
        export_plot_data(artifact, kind, out / "plots")
    print(f"{spec.name}: {spec.n_seeds} seeds -> {out / spec.name}")
    for col in METRIC_COLUMNS:
        print(f"  {col}: {artifact.mean[col]:.4f} (sd {artifact.sd[col]:.4f})")
    return 0


def _cmd_ab_test(args) -> int:
    base = _load_scenario(args)
    specs = [
        make_scenario(name, sim=base.sim, n_seeds=base.n_seeds, seed_base=base.seed_base)
        for name in args.scenarios
    ]
    out = _out_dir(args, "headfx_out")
    comparison = ab_compare(specs, out_dir=out, threads=args.threads)
    header = "scenario      " + "  ".join(f"{c:>18s}" for c in METRIC_COLUMNS)
    print(header)
    for art in comparison.artifacts:
        cells = "  ".join(
            f"{art.mean[c]:>10.4f}±{art.sd[c]:<6.4f}" for c in METRIC_COLUMNS
        )
        print(f"{art.scenario:<12s}  {cells}")
    print(f"wrote {out / 'comparison.csv'} and {out / 'orderings.csv'}")
    return 0


def _cmd_sweep(args) -> int:
    if args.config:
        spec = parse_config(args.config)
        if isinstance(spec, ScenarioSpec):
            if not args.parameter or not args.values:
                raise ConfigError(
                    "config has no [sweep] section; pass --parameter and --values"
                )
            spec = SweepSpec(
                parameter=args.parameter,
                values=tuple(_parse_values(args.parameter, args.values)),
                base=spec,
            )
    else:
        if not args.parameter or not args.values:
            raise ConfigError("sweep needs --parameter and --values (or a config)")
        base = make_scenario("Baseline")
        if args.seed is not None:
            base = dataclasses.replace(base, seed_base=args.seed)
        if args.seeds is not None:
            base = dataclasses.replace(base, n_seeds=args.seeds)
        spec = SweepSpec(
            parameter=args.parameter,
            values=tuple(_parse_values(args.parameter, args.values)),
            base=base,
        )
    out = _out_dir(args, "headfx_out")
    artifact = sensitivity_sweep(spec, out_dir=out, threads=args.threads)
    print(f"wrote {out / f'sweep_{spec.parameter}.csv'}")
    for value, art in zip(artifact.values, artifact.artifacts):
        print(
            f"  {spec.parameter}={value}: gini {art.mean['gini']:.4f} "
            f"satisfaction {art.mean['avg_satisfaction']:.4f}"
        )
    return 0


def _parse_values(parameter: str, text: str) -> list:
    caster = int if parameter in ("n_streamers", "n_viewers") else float
    try:
        return [caster(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {text!r}: {exc}") from exc


_INSTANCE_KEYS = (
    "n_viewers",
    "beta",
    "tau",
    "revenue_per_viewer",
    "phi",
    "prices",
    "alpha",
    "q",
    "cost",
)


def _load_instance(path) -> tuple[PlatformParams, list[StreamerParams], np.ndarray]:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read instance file {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("instance file must contain a JSON object")
    for key in raw:
        if key not in _INSTANCE_KEYS:
            raise ConfigError(f"unknown key {key!r} in instance file")
    for key in ("alpha", "q"):
        if key not in raw:
            raise ConfigError(f"instance file is missing {key!r}")
    alpha = [float(a) for a in raw["alpha"]]
    q = np.asarray(raw["q"], dtype=float)
    n = len(alpha)
    cost = [float(c) for c in raw.get("cost", [1.0] * n)]
    if len(cost) != n or q.shape[0] != n:
        raise ConfigError("alpha, q, and cost must have equal lengths")
    try:
        platform = PlatformParams(
            n_streamers=n,
            n_viewers=int(raw.get("n_viewers", 1000)),
            beta=float(raw.get("beta", 0.0)),
            tau=float(raw.get("tau", 0.2)),
            revenue_per_viewer=float(raw.get("revenue_per_viewer", 1.0)),
            phi=float(raw.get("phi", 1.0)),
            prices=np.asarray(raw["prices"], dtype=float) if "prices" in raw else None,
        )
    except ValueError as exc:
        raise ConfigError(f"instance file: {exc}") from exc
    streamers = [StreamerParams(alpha=a, eta=1.0, cost_coefficient=c) for a, c in zip(alpha, cost)]
    return platform, streamers, q


def _cmd_optimize_theta(args) -> int:
    platform, streamers, q = _load_instance(args.instance)
    if args.phi is not None:
        platform = dataclasses.replace(platform, phi=args.phi)
    solution = optimize_allocation(platform, streamers, q, tol=args.tol)
    breakdown, _ = welfare_at_theta(platform, streamers, q, solution.theta)
    out = _out_dir(args, "headfx_out")
    theta_path = out / "theta_star.csv"
    with theta_path.open("w", newline="") as fh:
        fh.write("streamer_id,theta_star\n")
        for i, th in enumerate(solution.theta.theta):
            fh.write(f"{i + 1},{th:.6g}\n")
    welfare_path = out / "welfare.csv"
    with welfare_path.open("w", newline="") as fh:
        fh.write("quantity,value\n")
        fh.write(f"consumer_surplus,{breakdown.consumer_surplus:.6g}\n")
        fh.write(f"producer_surplus,{breakdown.producer_surplus:.6g}\n")
        fh.write(f"platform_profit,{breakdown.platform_profit:.6g}\n")
        fh.write(f"total_welfare,{breakdown.total:.6g}\n")
        fh.write(f"kkt_residual,{solution.kkt_residual:.6g}\n")
        fh.write(f"iterations,{solution.iterations}\n")
        fh.write(f"converged,{solution.converged}\n")
        fh.write(f"active_set,{';'.join(str(i + 1) for i in solution.active_set)}\n")

    print(f"theta* = {np.round(solution.theta.theta, 6).tolist()}")
    print(
        f"welfare {breakdown.total:.6g} (CS {breakdown.consumer_surplus:.6g}, "
        f"PS {breakdown.producer_surplus:.6g}, Pi {breakdown.platform_profit:.6g})"
    )
    print(f"KKT residual {solution.kkt_residual:.3g}; active set "
          f"{[i + 1 for i in solution.active_set] or 'none'}")
    if args.grid_oracle:
        theta_grid, w_grid = grid_search_allocation(platform, streamers, q)
        print(
            f"grid oracle: theta {np.round(theta_grid.theta, 6).tolist()} "
            f"welfare {w_grid:.6g} (optimizer - oracle = {solution.welfare - w_grid:+.3g})"
        )
    print(f"wrote {theta_path} and {welfare_path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="scenario config file")
    common.add_argument("--seed", type=int, default=None, help="base seed override")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--seeds", type=int, default=None, help="replication count")
    common.add_argument("--threads", type=int, default=1, help="parallel workers")

    parser = argparse.ArgumentParser(
        prog="headfx",
        description="Two-sided streaming-market simulator and optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eq = sub.add_parser("equilibrium", parents=[common], help="solve the static equilibrium")
    p_eq.add_argument("--beta", type=float, default=None, help="network-effect override")
    p_eq.add_argument("--tol", type=float, default=1e-10)
    p_eq.set_defaults(func=_cmd_equilibrium)

    p_dyn = sub.add_parser("dynamics", parents=[common], help="integrate the dynamic system")
    p_dyn.add_argument("--dt", type=float, default=0.01)
    p_dyn.add_argument("--t-end", type=float, default=200.0)
    p_dyn.add_argument("--beta", type=float, default=None)
    p_dyn.add_argument(
        "--kind",
        choices=["trajectory", "stability", "path-dependence", "portrait"],
        default="trajectory",
    )
    p_dyn.add_argument("--delta0", type=float, default=1e-3,
                       help="initial perturbation as a fraction of M")
    p_dyn.add_argument("--record-every", type=int, default=100)
    p_dyn.add_argument("--grid", type=int, default=5, help="portrait grid size")
    p_dyn.add_argument("--tol", type=float, default=1e-10)
    p_dyn.set_defaults(func=_cmd_dynamics)

    p_sim = sub.add_parser("simulate", parents=[common], help="run one scenario batch")
    p_sim.set_defaults(func=_cmd_simulate)

    p_ab = sub.add_parser("ab-test", parents=[common], help="paired-seed scenario comparison")
    p_ab.add_argument("--scenarios", nargs="+", default=list(SCENARIO_NAMES))
    p_ab.set_defaults(func=_cmd_ab_test)

    p_sweep = sub.add_parser("sweep", parents=[common], help="one-parameter sensitivity sweep")
    p_sweep.add_argument("--parameter", type=str, default=None)
    p_sweep.add_argument("--values", type=str, default=None, help="comma-separated grid values")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_opt = sub.add_parser("optimize-theta", parents=[common],
                           help="optimize promotion shares for an instance file")
    p_opt.add_argument("--instance", type=str, required=True)
    p_opt.add_argument("--phi", type=float, default=None)
    p_opt.add_argument("--tol", type=float, default=1e-8)
    p_opt.add_argument("--grid-oracle", action="store_true")
    p_opt.set_defaults(func=_cmd_optimize_theta)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
