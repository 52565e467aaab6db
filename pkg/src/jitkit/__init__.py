"""Just-in-time robotic kitting: segmentation planner, kit arranger, and a
shop-floor discrete-event simulator."""

from .kit_layout import (
    CEParams,
    FitnessWeights,
    KitLayout,
    LayoutInfeasibleError,
    PartPlacement,
    arrange_kit,
    bounding_box,
    containment_violation,
    kit_fitness,
    kit_fitness_cost,
    overlap_area,
    pair_distance_sums,
)
from .planner import (
    LayoutCache,
    PlanCandidate,
    PlannerConfig,
    PlannerState,
    PlannerWeights,
    PlanningInfeasibleError,
    SegmentDecision,
    clear_layout_cache,
    default_duration_estimates,
    enumerate_candidates,
    initial_state,
    replan_estimates,
    solve_segment,
    solve_segment_bruteforce,
    upper_objective,
)
from .shopfloor import (
    SimConfig,
    SimMetrics,
    SimulationError,
    bootstrap_mean_ci,
    improvement_summary,
    metrics_from_trace,
    percent_improvement,
    run_simulation,
    sample_durations,
    sweep,
)
from .strategies import STRATEGY_NAMES, KitRequest, grid_layout, replay_strategy, strategy_next_kit
from .task_model import (
    PartInstance,
    PartType,
    Scenario,
    ScenarioError,
    ScenarioParseError,
    ScenarioValidationError,
    Task,
    TaskGraph,
    Tray,
    UnknownPartError,
    UnknownTaskError,
    allowed,
    bundled_scenario_path,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate_graph,
)

__version__ = "0.1.0"
