"""Command-line front end.

Subcommands:

* ``validate <scenario.json>``: check a scenario file; exit 0 when valid,
  1 with the violation list when invalid, 2 on I/O or parse errors.
* ``run <config.json>``: simulate the configured strategies, write the
  per-unit metrics CSV (plus optional event traces), print a summary.
* ``sweep <config.json>``: run the MAT x MTTF x strategy grid from the
  config's sweep block; write per-unit metrics and the improvement summary.
* ``layout <scenario.json> --tasks a,b``: arrange the kit for a set of tasks
  and export it as JSON (optionally SVG), printing the cost breakdown.

Exit codes for run/sweep/layout: 0 success, 2 configuration errors,
3 infeasible arrangements, 4 runtime failures. Runs are reproducible from
the config file and seed alone.
"""

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import shopfloor
from .kit_layout import (
    CEParams,
    FitnessWeights,
    LayoutInfeasibleError,
    containment_violation,
    kit_fitness_cost,
    layout_to_json_obj,
    layout_to_svg,
    overlap_area,
    pair_distance_sums,
)
from .kit_layout import arrange_kit, derive_layout_seed
from .planner import PlannerConfig, PlannerWeights, PlanningInfeasibleError
from .shopfloor import (
    SimConfig,
    SimulationError,
    improvement_summary,
    metrics_rows,
    run_simulation,
    sweep,
    write_improvement_csv,
    write_metrics_csv,
    write_trace_jsonl,
)
from .strategies import STRATEGY_NAMES
from .task_model import (
    ScenarioError,
    ScenarioParseError,
    ScenarioValidationError,
    UnknownTaskError,
    load_scenario,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4


class ConfigError(Exception):
    pass


@dataclass
class ExperimentConfig:
    scenario_path: Path
    strategies: list[str]
    replications: int = 1
    output_dir: Path = Path("results")
    sim: SimConfig | None = None
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    num_units: int = 10
    mat_by_part_type: dict = field(default_factory=dict)
    mttf_by_machine: dict = field(default_factory=dict)
    repair_time: float = 30.0
    delivery_time: float = 10.0
    seed: int = 0
    sweep_mat_values: list[float] = field(default_factory=list)
    sweep_mttf_values: list[float] = field(default_factory=list)
    governed_part_types: list[str] = field(default_factory=lambda: ["leg", "foot"])


_TOP_KEYS = {"name", "scenario", "strategy", "strategies", "replications",
             "output_dir", "sim", "planner", "sweep"}
_SIM_KEYS = {"num_units", "mat_by_part_type", "mttf_by_machine",
             "repair_time_s", "delivery_time_s", "seed"}
_PLANNER_KEYS = {"horizon_n", "delivery_time_s", "weights", "ce", "fitness",
                 "abs_sync_terms"}
_WEIGHT_KEYS = {"w1", "w2", "w3", "w4", "w5", "w7"}
_CE_KEYS = {"samples", "elite", "max_iters", "seed", "convergence_std_tol",
            "cov_jitter", "containment_penalty_weight", "retry_limit"}
_FITNESS_KEYS = {"w6"}
_SWEEP_KEYS = {"mat_values", "mttf_values", "governed_part_types"}


def _check_keys(obj: dict, allowed: set, ctx: str) -> None:
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"{ctx}: unknown keys: {', '.join(unknown)}")


def _as_mttf(value) -> float:
    if value is None or value == "inf":
        return math.inf
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    raise ConfigError(f"MTTF values must be numbers, null, or \"inf\"; got {value!r}")


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _check_keys(doc, _TOP_KEYS, str(path))
    if "scenario" not in doc:
        raise ConfigError(f"{path}: missing required key 'scenario'")
    scenario_path = Path(doc["scenario"])
    if not scenario_path.is_absolute():
        scenario_path = path.parent / scenario_path

    if "strategies" in doc:
        strategies = list(doc["strategies"])
    elif "strategy" in doc:
        strategies = [doc["strategy"]]
    else:
        strategies = list(STRATEGY_NAMES)
    for s in strategies:
        if s not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {s!r}")

    cfg = ExperimentConfig(scenario_path=scenario_path, strategies=strategies)
    cfg.replications = int(doc.get("replications", 1))
    cfg.output_dir = Path(doc.get("output_dir", "results"))

    sim = doc.get("sim", {})
    if not isinstance(sim, dict):
        raise ConfigError("'sim' must be an object")
    _check_keys(sim, _SIM_KEYS, "sim")
    cfg.num_units = int(sim.get("num_units", 10))
    cfg.mat_by_part_type = {
        str(k): float(v) for k, v in dict(sim.get("mat_by_part_type", {})).items()
    }
    cfg.mttf_by_machine = {
        str(k): _as_mttf(v) for k, v in dict(sim.get("mttf_by_machine", {})).items()
    }
    cfg.repair_time = float(sim.get("repair_time_s", 30.0))
    cfg.delivery_time = float(sim.get("delivery_time_s", 10.0))
    cfg.seed = int(sim.get("seed", 0))

    planner = doc.get("planner", {})
    if not isinstance(planner, dict):
        raise ConfigError("'planner' must be an object")
    _check_keys(planner, _PLANNER_KEYS, "planner")
    weights_obj = planner.get("weights", {})
    _check_keys(weights_obj, _WEIGHT_KEYS, "planner.weights")
    weights = PlannerWeights(
        w1_precedence=float(weights_obj.get("w1", 1e6)),
        w2_coverage=float(weights_obj.get("w2", 1.0)),
        w3_sync_now=float(weights_obj.get("w3", 1.0)),
        w4_sync_next=float(weights_obj.get("w4", 1.0)),
        w5_kit_fitness=float(weights_obj.get("w5", 0.01)),
        w7_unavailable=float(weights_obj.get("w7", 1e4)),
    )
    ce_obj = planner.get("ce", {})
    _check_keys(ce_obj, _CE_KEYS, "planner.ce")
    ce = CEParams(
        sample_count=int(ce_obj.get("samples", 200)),
        elite_count=int(ce_obj.get("elite", 30)),
        max_iterations=int(ce_obj.get("max_iters", 100)),
        convergence_std_tol=float(ce_obj.get("convergence_std_tol", 1.0)),
        cov_jitter=float(ce_obj.get("cov_jitter", 1e-6)),
        containment_penalty_weight=float(
            ce_obj.get("containment_penalty_weight", 1e3)
        ),
        retry_limit=int(ce_obj.get("retry_limit", 3)),
        seed=int(ce_obj.get("seed", 0)),
    )
    fitness_obj = planner.get("fitness", {})
    _check_keys(fitness_obj, _FITNESS_KEYS, "planner.fitness")
    fitness = FitnessWeights(w6_overlap=float(fitness_obj.get("w6", 10.0)))
    cfg.planner = PlannerConfig(
        horizon_n=int(planner.get("horizon_n", 5)),
        delivery_time_d=float(planner.get("delivery_time_s", cfg.delivery_time)),
        weights=weights,
        ce_params=ce,
        fitness_weights=fitness,
        abs_sync_terms=bool(planner.get("abs_sync_terms", True)),
    )

    sweep_obj = doc.get("sweep", {})
    if not isinstance(sweep_obj, dict):
        raise ConfigError("'sweep' must be an object")
    _check_keys(sweep_obj, _SWEEP_KEYS, "sweep")
    cfg.sweep_mat_values = [float(v) for v in sweep_obj.get("mat_values", [])]
    cfg.sweep_mttf_values = [_as_mttf(v) for v in sweep_obj.get("mttf_values", [])]
    if "governed_part_types" in sweep_obj:
        cfg.governed_part_types = [str(t) for t in sweep_obj["governed_part_types"]]
    return cfg


def _base_sim_config(cfg: ExperimentConfig, scenario) -> SimConfig:
    return SimConfig(
        scenario=scenario,
        strategy=cfg.strategies[0],
        num_units=cfg.num_units,
        mat_by_part_type=cfg.mat_by_part_type,
        mttf_by_machine=cfg.mttf_by_machine,
        repair_time=cfg.repair_time,
        delivery_time_d=cfg.delivery_time,
        seed=cfg.seed,
        planner=cfg.planner,
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioValidationError as exc:
        print(f"INVALID: {args.scenario}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, ScenarioParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"OK: {args.scenario} ({len(scenario.graph)} tasks, "
          f"{len(scenario.parts)} parts, {len(scenario.part_types)} part types)")
    return EXIT_OK


def _apply_overrides(cfg: ExperimentConfig, args) -> None:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.strategy is not None:
        cfg.strategies = [args.strategy]
    if args.reps is not None:
        cfg.replications = args.reps
    if args.units is not None:
        cfg.num_units = args.units
    if args.out is not None:
        cfg.output_dir = Path(args.out)


def cmd_run(args) -> int:
    try:
        cfg = load_experiment_config(args.config)
        _apply_overrides(cfg, args)
        scenario = load_scenario(cfg.scenario_path)
    except (ConfigError, ScenarioError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _base_sim_config(cfg, scenario)

    all_rows = []
    summary = []
    try:
        for strategy in cfg.strategies:
            totals, idles, kits = [], [], []
            for rep in range(cfg.replications):
                run_cfg = replace(
                    base, strategy=strategy, seed=cfg.seed + rep,
                    collect_trace=bool(args.trace and rep == 0),
                )
                metrics = run_simulation(run_cfg)
                all_rows.extend(metrics_rows(run_cfg, rep, metrics))
                totals.append(metrics.total_task_time)
                idles.append(metrics.human_idle_time)
                kits.append(metrics.kit_count)
                if run_cfg.collect_trace and metrics.trace is not None:
                    trace_path = out_dir / f"trace_{strategy}.jsonl"
                    write_trace_jsonl(metrics.trace, trace_path)
            summary.append((strategy, float(np.mean(totals)), float(np.std(totals)),
                            float(np.mean(idles)), float(np.std(idles)),
                            float(np.mean(kits))))
    except (LayoutInfeasibleError, PlanningInfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    csv_path = out_dir / "metrics.csv"
    write_metrics_csv(all_rows, csv_path)
    print(f"wrote {csv_path} ({len(all_rows)} rows)")
    print(f"{'strategy':<16} {'total_s (mean+/-sd)':>24} "
          f"{'idle_s (mean+/-sd)':>24} {'kits':>6}")
    for strategy, t_mean, t_sd, i_mean, i_sd, k_mean in summary:
        print(f"{strategy:<16} {t_mean:>14.1f} +/- {t_sd:<6.1f} "
              f"{i_mean:>14.1f} +/- {i_sd:<6.1f} {k_mean:>6.1f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = load_experiment_config(args.config)
        _apply_overrides(cfg, args)
        if not cfg.sweep_mat_values or not cfg.sweep_mttf_values:
            raise ConfigError("sweep requires non-empty mat_values and mttf_values")
        scenario = load_scenario(cfg.scenario_path)
    except (ConfigError, ScenarioError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = cfg.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    base = _base_sim_config(cfg, scenario)
    try:
        result = sweep(
            base,
            mat_values=cfg.sweep_mat_values,
            mttf_values=cfg.sweep_mttf_values,
            strategies=cfg.strategies,
            replications=cfg.replications,
            governed_part_types=cfg.governed_part_types,
        )
    except (LayoutInfeasibleError, PlanningInfeasibleError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    csv_path = out_dir / "sweep_metrics.csv"
    write_metrics_csv(result.rows, csv_path)
    print(f"wrote {csv_path} ({len(result.rows)} rows)")

    improvements = improvement_summary(result)
    if improvements:
        summary_path = out_dir / "sweep_summary.csv"
        write_improvement_csv(improvements, summary_path)
        print(f"wrote {summary_path}")
        print(f"{'mat':>6} {'mttf':>8} {'baseline':<16} {'metric':<20} "
              f"{'improv%':>8} {'diff CI95':>22}")
        for row in improvements:
            mttf = "inf" if math.isinf(row.mttf) else f"{row.mttf:g}"
            print(f"{row.mat:>6g} {mttf:>8} {row.baseline:<16} {row.metric:<20} "
                  f"{row.pct_improvement:>8.2f} "
                  f"[{row.diff_ci_low:>8.1f}, {row.diff_ci_high:>8.1f}]")
    return EXIT_OK


def cmd_layout(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        task_ids = [t.strip() for t in args.tasks.split(",") if t.strip()]
        if not task_ids:
            raise ConfigError("no task ids given")
        parts = scenario.parts_for_tasks(task_ids)
    except (ScenarioError, OSError, UnknownTaskError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    params = CEParams(seed=derive_layout_seed(args.seed, [p.id for p in parts]))
    weights = FitnessWeights()
    catalog = dict(scenario.parts)
    try:
        layout, cost = arrange_kit(parts, scenario.tray, weights, params)
    except ValueError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LayoutInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.best_layout is not None:
            dump = Path(args.out)
            dump.write_text(
                json.dumps(layout_to_json_obj(exc.best_layout), indent=2) + "\n",
                encoding="utf-8",
            )
            print(f"best-found layout dumped to {dump}", file=sys.stderr)
        return EXIT_INFEASIBLE

    same, diff = pair_distance_sums(layout, catalog)
    print(f"tasks: {', '.join(task_ids)}")
    print(f"parts: {', '.join(p.id for p in parts)}")
    print(f"same_type_distance_mm:  {same:.3f}")
    print(f"diff_type_distance_mm:  {diff:.3f}")
    print(f"overlap_area_mm2:       {overlap_area(layout, catalog):.6f}")
    print(f"containment_violation:  {containment_violation(layout, catalog):.6f}")
    print(f"cost:                   {kit_fitness_cost(layout, catalog, weights):.3f}")
    out_path = Path(args.out)
    out_path.write_text(
        json.dumps(layout_to_json_obj(layout), indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {out_path}")
    if args.svg:
        Path(args.svg).write_text(layout_to_svg(layout, catalog), encoding="utf-8")
        print(f"wrote {args.svg}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jitkit",
        description="Just-in-time kitting planner and shop-floor simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    for name, func in (("run", cmd_run), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help=f"{name} an experiment config")
        p.add_argument("config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--strategy", choices=STRATEGY_NAMES, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--units", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--trace", action="store_true",
                       help="write an event-trace JSONL for replication 0")
        p.set_defaults(func=func)

    p = sub.add_parser("layout", help="arrange the kit for a set of tasks")
    p.add_argument("scenario")
    p.add_argument("--tasks", required=True,
                   help="comma-separated task ids whose parts form the kit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="layout.json")
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_layout)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
