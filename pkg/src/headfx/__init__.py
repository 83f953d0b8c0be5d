"""Two-sided streaming-market toolkit.

Static logit equilibria, coupled viewer/quality dynamics, welfare
accounting with promotion-share optimization, an agent-based platform
simulation with policy interventions, evaluation metrics, and an
experiment harness with a CLI (``headfx``).
"""

from .core import (
    MarketState,
    PlatformParams,
    StreamerParams,
    TrafficAllocation,
    audience_quality_sensitivity,
    choice_probabilities,
    cost,
    deterministic_utility,
    expected_viewers,
    marginal_cost,
    streamer_profit,
)
from .equilibrium import (
    EquilibriumResult,
    FixedPointConfig,
    enumerate_equilibria,
    find_critical_beta,
    solve_joint_equilibrium,
    solve_viewer_fixed_point,
)
from .dynamics import (
    IntegratorConfig,
    StabilityReport,
    Trajectory,
    assess_stability,
    hhi,
    integrate,
    jacobian,
    path_dependence_experiment,
    phase_portrait,
    rhs,
)
from .abm import (
    PolicyIntervention,
    RoundRecord,
    SimConfig,
    StreamerAgent,
    ViewerAgent,
    apply_policy,
    init_platform,
    run_round,
    run_simulation,
    simulate,
    viewer_round_utility,
)
from .metrics import (
    MetricsSummary,
    avg_satisfaction,
    gini,
    quality_improvement,
    summarize,
    top_k_share,
    viewer_mobility,
)
from .welfare import (
    AllocationSolution,
    WelfareBreakdown,
    consumer_surplus,
    head_effect_welfare_comparison,
    myopic_dynamic_allocation,
    optimize_allocation,
    platform_profit,
    producer_surplus,
    simplex_project,
    total_welfare,
    welfare_gradient_theta,
)
from .harness import (
    ScenarioSpec,
    SweepSpec,
    ab_compare,
    make_scenario,
    parse_config,
    run_scenario,
    sensitivity_sweep,
)

__version__ = "0.1.0"
