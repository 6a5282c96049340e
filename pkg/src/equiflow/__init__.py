"""Decentralized accelerated mirror descent in potential games under delays.

The package is organized around five layers: simplex geometry and step
schedules, the two update algorithms and their simulation driver, the
congestion routing game, network/scenario ingestion, and the benchmark
harness with its CLI.
"""

from .bench import (
    CaseRun,
    CaseSpec,
    OracleResult,
    emit_plot,
    estimate_reference_optimum,
    fig1_suite,
    fig2_suite,
    fit_loglog_slope,
    read_metrics_csv,
    run_case,
    schedule_for_delay,
    write_metrics_csv,
)
from .dynamics import (
    DelayModel,
    FeedbackMessage,
    PlayerState,
    PotentialGameOracle,
    SimulationTrace,
    alg1_step,
    alg2_step,
    apply_feedback,
    arrival_iteration,
    deliver,
    post_message,
    run_simulation,
    staleness_bound_check,
)
from .errors import (
    CountMismatchError,
    DomainError,
    EquiflowError,
    InfeasibleScenarioError,
    InsufficientDataError,
    NoPathError,
    ParseError,
    ScheduleError,
    SchemaError,
    UsageError,
)
from .geometry import (
    EntropyRegularizer,
    ScaledSimplex,
    bregman,
    entropy_eval,
    entropy_gradient,
    entropy_mirror_map,
)
from .ingest import (
    ScenarioConfig,
    TntpLink,
    TntpNetwork,
    grid_network,
    load_scenario,
    load_tntp,
    parse_tntp,
    sample_scenario,
    save_scenario,
    to_road_network,
)
from .paths import k_shortest_paths, shortest_path
from .routing import (
    BprParams,
    PlayerSpec,
    RoadNetwork,
    RouteSet,
    RoutingGame,
    bpr_cost,
    bpr_integral,
    enumerate_routes,
    wardrop_gap,
)
from .schedules import (
    SmoothnessBundle,
    StepSchedule,
    default_a0,
    validate_schedule,
)

__version__ = "0.1.0"
