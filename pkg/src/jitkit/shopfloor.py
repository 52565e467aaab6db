"""Discrete-event simulation of a two-station kitting line.

One robot prepares kits at a preparation station; one human assembles at an
assembly station. The event loop models:

* part arrivals: part types with a configured mean arrival time (MAT) stream
  in as a Poisson process with rate 1/MAT (a MAT of 0 delivers everything at
  time zero); all other types are stocked at time zero,
* feeder breakdowns: the machine feeding a governed part type stays up for
  an exponential time with the configured mean (MTTF), then halts its
  arrival stream for a fixed repair time, after which arrivals resume with a
  fresh draw,
* the robot: asks its strategy for the next kit, waits until every kit part
  is in inventory, spends the sampled robot time kitting, then the delivery
  time; a single tray holds at most one undelivered kit, so the robot blocks
  until the human retrieves it,
* the human: retrieves a delivered kit as soon as idle (otherwise on
  finishing the current segment) and spends the sampled human time on the
  segment's tasks.

Units are assembled back to back: the robot starts kitting the next unit
while the human finishes the current one, inventory persists, and the
planner's completed-task bookkeeping resets per unit. The optimized
strategy replans at every tray retrieval and whenever part availability
changes while the robot is waiting on parts.

Metrics per unit: total task time (gap between consecutive unit completion
times) and human idle time (total minus the time actually spent
assembling). Aggregates sum the units, so the aggregate total equals the
run makespan. Identical configurations (including the seed) produce
identical metrics.
"""

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .planner import GLOBAL_LAYOUT_CACHE, LayoutCache, PlannerConfig, PlannerState, \
    default_duration_estimates
from .strategies import STRATEGY_NAMES, strategy_next_kit
from .task_model import Scenario, Task, duration_sample, load_scenario

EVENT_KINDS = (
    "part_arrival",
    "machine_failure",
    "machine_repaired",
    "kit_ready",
    "kit_delivered",
    "tray_retrieved",
    "human_task_done",
)


class SimulationError(RuntimeError):
    """The event loop stalled (deadlock) or was misconfigured."""


@dataclass(frozen=True)
class SimConfig:
    """One simulation run.

    ``mat_by_part_type`` maps part-type id to its mean arrival time in
    seconds; types not listed are fully stocked at time zero.
    ``mttf_by_machine`` maps a feeder machine (identified by the part type
    it feeds) to its mean time to failure; infinite or missing means the
    feeder never breaks. ``planner`` configures the optimized strategy; its
    delivery time is overridden by ``delivery_time_d`` so both levels agree.
    """

    scenario: "Scenario | str | Path"
    strategy: str = "optimized"
    num_units: int = 10
    mat_by_part_type: Mapping[str, float] = field(default_factory=dict)
    mttf_by_machine: Mapping[str, float] = field(default_factory=dict)
    repair_time: float = 30.0
    delivery_time_d: float = 10.0
    seed: int = 0
    planner: PlannerConfig | None = None
    collect_trace: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGY_NAMES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.num_units < 1:
            raise ValueError("num_units must be >= 1")
        for name in ("repair_time", "delivery_time_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for tid, v in self.mat_by_part_type.items():
            if v < 0 or not math.isfinite(v):
                raise ValueError(f"MAT for {tid!r} must be finite and >= 0")
        for mid, v in self.mttf_by_machine.items():
            if v <= 0:
                raise ValueError(f"MTTF for {mid!r} must be > 0")


@dataclass(frozen=True)
class TraceEvent:
    time: float
    seq: int
    kind: str
    detail: Mapping


@dataclass(frozen=True)
class SimMetrics:
    """Per-unit and aggregate outcome measures of one run."""

    unit_total_task_time: tuple[float, ...]
    unit_human_idle_time: tuple[float, ...]
    unit_kit_count: tuple[int, ...]
    total_task_time: float
    human_idle_time: float
    kit_count: int
    trace: tuple[TraceEvent, ...] | None = None


def sample_durations(task: Task, rng) -> tuple[float, float]:
    """One (human, robot) duration realization for a task: fixed values pass
    through, empirical distributions are sampled uniformly."""
    return (
        duration_sample(task.human_duration, rng),
        duration_sample(task.robot_duration, rng),
    )


class _ShopFloorSim:
    def __init__(self, cfg: SimConfig, scenario: Scenario, cache: LayoutCache):
        self.cfg = cfg
        self.scenario = scenario
        self.cache = cache
        graph = scenario.graph
        self.graph = graph
        base_planner = cfg.planner if cfg.planner is not None else PlannerConfig()
        self.planner_cfg = replace(base_planner, delivery_time_d=cfg.delivery_time_d)

        self.part_type_of = {pid: p.part_type.id for pid, p in scenario.parts.items()}
        per_unit: dict[str, int] = {}
        for p in scenario.parts.values():
            per_unit[p.part_type.id] = per_unit.get(p.part_type.id, 0) + 1
        self.mat = dict(sorted(cfg.mat_by_part_type.items()))
        for tid in self.mat:
            if tid not in scenario.part_types:
                raise SimulationError(f"MAT configured for unknown part type {tid!r}")
            if tid not in per_unit:
                raise SimulationError(
                    f"MAT configured for part type {tid!r} with no instances"
                )
        # Feeders break only for types that actually stream in.
        self.mttf = {
            mid: float(v)
            for mid, v in sorted(cfg.mttf_by_machine.items())
            if math.isfinite(v) and mid in self.mat
        }
        for mid in cfg.mttf_by_machine:
            if mid not in scenario.part_types:
                raise SimulationError(f"MTTF configured for unknown machine {mid!r}")

        self.needed_total = {
            tid: count * cfg.num_units for tid, count in per_unit.items()
        }
        self.inventory: dict[str, int] = {tid: 0 for tid in per_unit}
        self.remaining_arrivals = {
            tid: self.needed_total[tid] for tid in self.mat
        }
        self.machine_up = {tid: True for tid in self.mttf}
        self.arrival_token = {tid: 0 for tid in self.mat}

        ss = np.random.SeedSequence(cfg.seed)
        dur_ss, arr_ss, brk_ss = ss.spawn(3)
        self.arrival_rng = {
            tid: np.random.default_rng(child)
            for tid, child in zip(self.mat, arr_ss.spawn(max(1, len(self.mat))))
        }
        self.machine_rng = {
            mid: np.random.default_rng(child)
            for mid, child in zip(self.mttf, brk_ss.spawn(max(1, len(self.mttf))))
        }
        dur_rng = np.random.default_rng(dur_ss)
        self.durations: dict[tuple[int, str], tuple[float, float]] = {}
        for unit in range(1, cfg.num_units + 1):
            for tid in sorted(graph):
                self.durations[(unit, tid)] = sample_durations(graph.task(tid), dur_rng)
        self.estimates = default_duration_estimates(graph)

        self.heap: list = []
        self.seq = 0
        self.now = 0.0
        self.trace: list[TraceEvent] | None = [] if cfg.collect_trace else None

        self.robot_unit = 1
        self.robot_kitted: list[frozenset[str]] = []
        self.robot_state = "idle"  # idle | waiting | kitting | delivering | blocked | done
        self.robot_dirty = False

        self.tray_kit: tuple[int, object] | None = None
        self.human_busy = False
        self.human_start = 0.0
        self.human_est_total = 0.0

        self.unit_done_tasks: dict[int, set[str]] = {
            u: set() for u in range(1, cfg.num_units + 1)
        }
        self.unit_finish: dict[int, float] = {}
        self.unit_active: dict[int, float] = {u: 0.0 for u in self.unit_done_tasks}
        self.unit_kits: dict[int, int] = {u: 0 for u in self.unit_done_tasks}
        self.completed_units = 0

    # -- plumbing ---------------------------------------------------------

    def _push(self, time: float, kind: str, **detail) -> None:
        heapq.heappush(self.heap, (time, self.seq, kind, detail))
        self.seq += 1

    def _record(self, kind: str, detail: dict) -> None:
        if self.trace is not None:
            self.trace.append(
                TraceEvent(time=self.now, seq=len(self.trace), kind=kind, detail=detail)
            )

    # -- arrivals and breakdowns ------------------------------------------

    def _schedule_arrival(self, type_id: str, now: float) -> None:
        if self.remaining_arrivals[type_id] <= 0:
            return
        self.arrival_token[type_id] += 1
        mat = self.mat[type_id]
        delay = 0.0 if mat <= 0.0 else float(self.arrival_rng[type_id].exponential(mat))
        self._push(now + delay, "part_arrival",
                   part_type=type_id, token=self.arrival_token[type_id])

    def _on_part_arrival(self, detail: dict) -> None:
        type_id = detail["part_type"]
        if detail["token"] != self.arrival_token[type_id]:
            return  # canceled by a breakdown
        if not self.machine_up.get(type_id, True):
            return
        self.inventory[type_id] += 1
        self.remaining_arrivals[type_id] -= 1
        self._record("part_arrival", {"part_type": type_id})
        if self.remaining_arrivals[type_id] > 0:
            self._schedule_arrival(type_id, self.now)
        if self.robot_state == "waiting":
            self.robot_dirty = True

    def _on_machine_failure(self, detail: dict) -> None:
        mid = detail["machine"]
        if not self.machine_up[mid] or self.remaining_arrivals[mid] <= 0:
            return
        self.machine_up[mid] = False
        self.arrival_token[mid] += 1  # cancel the pending arrival
        self._record("machine_failure", {"machine": mid})
        self._push(self.now + self.cfg.repair_time, "machine_repaired", machine=mid)

    def _on_machine_repaired(self, detail: dict) -> None:
        mid = detail["machine"]
        self.machine_up[mid] = True
        self._record("machine_repaired", {"machine": mid})
        if self.remaining_arrivals[mid] > 0:
            self._schedule_arrival(mid, self.now)
            self._push(
                self.now + float(self.machine_rng[mid].exponential(self.mttf[mid])),
                "machine_failure", machine=mid,
            )

    # -- robot -------------------------------------------------------------

    def _planner_state(self, now: float) -> PlannerState:
        kitted = tuple(self.robot_kitted)
        if self.human_busy:
            remaining = max(0.0, self.human_est_total - (now - self.human_start))
        else:
            remaining = 0.0
        done: set[str] = set()
        for seg in kitted:
            done.update(seg)
        availability: dict[str, bool] = {}
        budget = dict(self.inventory)
        for tid in sorted(self.graph):
            if tid in done:
                continue
            for pid in sorted(self.graph.task(tid).required_parts):
                type_id = self.part_type_of[pid]
                if budget.get(type_id, 0) > 0:
                    budget[type_id] -= 1
                    availability[pid] = True
                else:
                    availability[pid] = False
        return PlannerState(
            completed_segments=kitted,
            current_segment_human_remaining=remaining,
            part_availability=availability,
            duration_estimates=self.estimates,
        )

    def _robot_decide(self, now: float) -> None:
        while True:
            if self.robot_unit > self.cfg.num_units:
                self.robot_state = "done"
                return
            state = self._planner_state(now)
            kit = strategy_next_kit(
                self.cfg.strategy, state, self.scenario, self.planner_cfg,
                cache=self.cache,
            )
            if kit is None:
                self.robot_unit += 1
                self.robot_kitted = []
                continue
            break
        need: dict[str, int] = {}
        for pid in kit.parts:
            type_id = self.part_type_of[pid]
            need[type_id] = need.get(type_id, 0) + 1
        if all(self.inventory.get(t, 0) >= c for t, c in need.items()):
            for t, c in need.items():
                self.inventory[t] -= c
            self.robot_kitted.append(kit.segment)
            unit = self.robot_unit
            robot_time = math.fsum(
                self.durations[(unit, tid)][1] for tid in sorted(kit.segment)
            )
            self.robot_state = "kitting"
            self._push(now + robot_time, "kit_ready", unit=unit, kit=kit)
        else:
            self.robot_state = "waiting"

    def _on_kit_ready(self, detail: dict) -> None:
        self._record("kit_ready", {
            "unit": detail["unit"], "tasks": sorted(detail["kit"].segment),
            "parts": list(detail["kit"].parts),
        })
        self.robot_state = "delivering"
        self._push(self.now + self.cfg.delivery_time_d, "kit_delivered",
                   unit=detail["unit"], kit=detail["kit"])

    def _on_kit_delivered(self, detail: dict) -> None:
        self._record("kit_delivered", {
            "unit": detail["unit"], "tasks": sorted(detail["kit"].segment),
        })
        self.tray_kit = (detail["unit"], detail["kit"])
        self.robot_state = "blocked"
        if not self.human_busy:
            self._push(self.now, "tray_retrieved")

    def _on_tray_retrieved(self, detail: dict) -> None:
        assert self.tray_kit is not None, "retrieval without a delivered kit"
        unit, kit = self.tray_kit
        self.tray_kit = None
        self._record("tray_retrieved", {"unit": unit, "tasks": sorted(kit.segment)})
        human_time = math.fsum(
            self.durations[(unit, tid)][0] for tid in sorted(kit.segment)
        )
        self.human_busy = True
        self.human_start = self.now
        self.human_est_total = math.fsum(
            self.estimates[tid][0] for tid in sorted(kit.segment)
        )
        self.unit_active[unit] += human_time
        self.unit_kits[unit] += 1
        self._push(self.now + human_time, "human_task_done",
                   unit=unit, tasks=frozenset(kit.segment))
        if self.robot_state == "blocked":
            self._robot_decide(self.now)

    def _on_human_task_done(self, detail: dict) -> None:
        unit = detail["unit"]
        tasks = detail["tasks"]
        self._record("human_task_done", {"unit": unit, "tasks": sorted(tasks)})
        self.human_busy = False
        self.unit_done_tasks[unit].update(tasks)
        if len(self.unit_done_tasks[unit]) == len(self.graph):
            self.unit_finish[unit] = self.now
            self.completed_units += 1
        if self.tray_kit is not None:
            self._push(self.now, "tray_retrieved")

    # -- main loop ----------------------------------------------------------

    _HANDLERS = {
        "part_arrival": _on_part_arrival,
        "machine_failure": _on_machine_failure,
        "machine_repaired": _on_machine_repaired,
        "kit_ready": _on_kit_ready,
        "kit_delivered": _on_kit_delivered,
        "tray_retrieved": _on_tray_retrieved,
        "human_task_done": _on_human_task_done,
    }

    def run(self) -> SimMetrics:
        # Stock non-streaming types and emit their arrival records.
        for type_id in sorted(self.inventory):
            if type_id in self.mat:
                continue
            count = self.needed_total[type_id]
            self.inventory[type_id] = count
            for _ in range(count):
                self._record("part_arrival", {"part_type": type_id})
        for type_id in self.mat:
            self._schedule_arrival(type_id, 0.0)
        for mid in self.mttf:
            self._push(
                float(self.machine_rng[mid].exponential(self.mttf[mid])),
                "machine_failure", machine=mid,
            )
        self._robot_decide(0.0)

        max_events = 10_000_000
        handled = 0
        while self.completed_units < self.cfg.num_units:
            if self.robot_dirty and (not self.heap or self.heap[0][0] > self.now):
                self.robot_dirty = False
                if self.robot_state == "waiting":
                    self._robot_decide(self.now)
                continue
            if not self.heap:
                raise SimulationError(self._deadlock_message())
            time, _, kind, detail = heapq.heappop(self.heap)
            self.now = time
            self._HANDLERS[kind](self, detail)
            handled += 1
            if handled > max_events:
                raise SimulationError("event budget exceeded; simulation diverged")

        return self._build_metrics()

    def _deadlock_message(self) -> str:
        lines = [
            "deadlock: no event is schedulable but tasks remain",
            f"  robot: state={self.robot_state} unit={self.robot_unit}",
            f"  completed units: {self.completed_units}/{self.cfg.num_units}",
            f"  inventory: {dict(sorted(self.inventory.items()))}",
        ]
        if self.trace:
            lines.append("  last events:")
            for ev in self.trace[-10:]:
                lines.append(f"    t={ev.time:.3f} {ev.kind} {dict(ev.detail)}")
        return "\n".join(lines)

    def _build_metrics(self) -> SimMetrics:
        totals: list[float] = []
        idles: list[float] = []
        kits: list[int] = []
        previous = 0.0
        for unit in range(1, self.cfg.num_units + 1):
            finish = self.unit_finish[unit]
            total = finish - previous
            previous = finish
            totals.append(total)
            idles.append(max(0.0, total - self.unit_active[unit]))
            kits.append(self.unit_kits[unit])
        return SimMetrics(
            unit_total_task_time=tuple(totals),
            unit_human_idle_time=tuple(idles),
            unit_kit_count=tuple(kits),
            total_task_time=math.fsum(totals),
            human_idle_time=math.fsum(idles),
            kit_count=sum(kits),
            trace=tuple(self.trace) if self.trace is not None else None,
        )


def run_simulation(config: SimConfig, cache: LayoutCache | None = None) -> SimMetrics:
    """Execute one run; see the module docstring for the protocol.

    Raises SimulationError on deadlock (with a trace tail when tracing is
    enabled) and propagates planner infeasibility errors.
    """
    scenario = config.scenario
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)
    sim = _ShopFloorSim(config, scenario,
                        cache if cache is not None else GLOBAL_LAYOUT_CACHE)
    return sim.run()


# ---------------------------------------------------------------------------
# Trace replay
# ---------------------------------------------------------------------------

def metrics_from_trace(trace: Sequence[TraceEvent], num_units: int) -> SimMetrics:
    """Recompute the outcome measures from a trace alone (independent
    accounting used to cross-check run_simulation)."""
    retrievals: dict[int, list[float]] = {}
    dones: dict[int, list[float]] = {}
    for ev in trace:
        if ev.kind == "tray_retrieved":
            retrievals.setdefault(ev.detail["unit"], []).append(ev.time)
        elif ev.kind == "human_task_done":
            dones.setdefault(ev.detail["unit"], []).append(ev.time)
    totals: list[float] = []
    idles: list[float] = []
    kits: list[int] = []
    previous = 0.0
    for unit in range(1, num_units + 1):
        finish = max(dones[unit])
        active = math.fsum(
            done - start for start, done in zip(retrievals[unit], dones[unit])
        )
        total = finish - previous
        previous = finish
        totals.append(total)
        idles.append(max(0.0, total - active))
        kits.append(len(retrievals[unit]))
    return SimMetrics(
        unit_total_task_time=tuple(totals),
        unit_human_idle_time=tuple(idles),
        unit_kit_count=tuple(kits),
        total_task_time=math.fsum(totals),
        human_idle_time=math.fsum(idles),
        kit_count=sum(kits),
    )


def write_trace_jsonl(trace: Sequence[TraceEvent], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in trace:
            fh.write(json.dumps(
                {"t": ev.time, "seq": ev.seq, "kind": ev.kind, **dict(ev.detail)},
                sort_keys=True,
            ))
            fh.write("\n")


def read_trace_jsonl(path) -> tuple[TraceEvent, ...]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            detail = {k: v for k, v in obj.items() if k not in ("t", "seq", "kind")}
            events.append(TraceEvent(time=obj["t"], seq=obj["seq"],
                                     kind=obj["kind"], detail=detail))
    return tuple(events)


# ---------------------------------------------------------------------------
# Metrics tables and sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsRow:
    """One CSV row: per-unit outcomes of one run."""

    strategy: str
    mat_leg_s: float
    mat_foot_s: float
    mttf_s: float
    replication: int
    unit: int
    total_task_time_s: float
    human_idle_time_s: float
    kit_count: int


CSV_COLUMNS = (
    "strategy", "mat_leg_s", "mat_foot_s", "mttf_s", "replication", "unit",
    "total_task_time_s", "human_idle_time_s", "kit_count",
)


def _column_mat(mat_map: Mapping[str, float], type_id: str) -> float:
    if type_id in mat_map:
        return float(mat_map[type_id])
    if mat_map:
        return float(max(mat_map.values()))
    return 0.0


def _column_mttf(mttf_map: Mapping[str, float]) -> float:
    if not mttf_map:
        return math.inf
    return float(min(mttf_map.values()))


def metrics_rows(config: SimConfig, replication: int,
                 metrics: SimMetrics) -> list[MetricsRow]:
    mat_leg = _column_mat(config.mat_by_part_type, "leg")
    mat_foot = _column_mat(config.mat_by_part_type, "foot")
    mttf = _column_mttf(config.mttf_by_machine)
    return [
        MetricsRow(
            strategy=config.strategy,
            mat_leg_s=mat_leg,
            mat_foot_s=mat_foot,
            mttf_s=mttf,
            replication=replication,
            unit=unit,
            total_task_time_s=metrics.unit_total_task_time[unit - 1],
            human_idle_time_s=metrics.unit_human_idle_time[unit - 1],
            kit_count=metrics.unit_kit_count[unit - 1],
        )
        for unit in range(1, len(metrics.unit_total_task_time) + 1)
    ]


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    if v == math.inf:
        return "inf"
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.6g}"


def _fmt_time(v: float) -> str:
    return f"{v:.6f}"


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join((
            r.strategy,
            _fmt_value(r.mat_leg_s),
            _fmt_value(r.mat_foot_s),
            _fmt_value(r.mttf_s),
            str(r.replication),
            str(r.unit),
            _fmt_time(r.total_task_time_s),
            _fmt_time(r.human_idle_time_s),
            str(r.kit_count),
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class RunAggregate:
    strategy: str
    mat: float
    mttf: float
    replication: int
    total_task_time_s: float
    human_idle_time_s: float
    kit_count: int


@dataclass
class SweepResult:
    rows: list[MetricsRow]
    runs: list[RunAggregate]
    mat_values: tuple[float, ...]
    mttf_values: tuple[float, ...]
    strategies: tuple[str, ...]
    replications: int

    def cell_runs(self, strategy: str, mat: float, mttf: float) -> list[RunAggregate]:
        return [
            r for r in self.runs
            if r.strategy == strategy and r.mat == mat and r.mttf == mttf
        ]


def sweep(base: SimConfig, mat_values: Sequence[float],
          mttf_values: Sequence[float], strategies: Sequence[str],
          replications: int, governed_part_types: Sequence[str] = ("leg", "foot"),
          cache: LayoutCache | None = None) -> SweepResult:
    """Run the MAT x MTTF x strategy grid with ``replications`` runs per
    cell (seeds ``base.seed + 0 .. base.seed + replications - 1``).

    The swept MAT applies jointly to every governed part type; an infinite
    MTTF disables breakdowns for that cell. Failures propagate annotated
    with the failing cell's coordinates.
    """
    if not mat_values or not mttf_values or not strategies:
        raise ValueError("sweep grids must be non-empty")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    scenario = base.scenario
    if not isinstance(scenario, Scenario):
        scenario = load_scenario(scenario)

    rows: list[MetricsRow] = []
    runs: list[RunAggregate] = []
    for mat in mat_values:
        for mttf in mttf_values:
            for strategy in strategies:
                for rep in range(replications):
                    cfg = replace(
                        base,
                        scenario=scenario,
                        strategy=strategy,
                        seed=base.seed + rep,
                        mat_by_part_type={t: float(mat) for t in governed_part_types},
                        mttf_by_machine=(
                            {} if math.isinf(mttf)
                            else {t: float(mttf) for t in governed_part_types}
                        ),
                        collect_trace=False,
                    )
                    try:
                        metrics = run_simulation(cfg, cache=cache)
                    except Exception as exc:
                        raise SimulationError(
                            f"sweep cell failed (mat={mat}, mttf={mttf}, "
                            f"strategy={strategy}, replication={rep}): {exc}"
                        ) from exc
                    cell_rows = metrics_rows(cfg, rep, metrics)
                    # Record grid coordinates exactly as swept.
                    rows.extend(
                        replace(r, mat_leg_s=float(mat), mat_foot_s=float(mat),
                                mttf_s=float(mttf))
                        for r in cell_rows
                    )
                    runs.append(RunAggregate(
                        strategy=strategy, mat=float(mat), mttf=float(mttf),
                        replication=rep,
                        total_task_time_s=metrics.total_task_time,
                        human_idle_time_s=metrics.human_idle_time,
                        kit_count=metrics.kit_count,
                    ))
    return SweepResult(
        rows=rows, runs=runs,
        mat_values=tuple(float(v) for v in mat_values),
        mttf_values=tuple(float(v) for v in mttf_values),
        strategies=tuple(strategies),
        replications=replications,
    )


# ---------------------------------------------------------------------------
# Summary statistics
# ---------------------------------------------------------------------------

def percent_improvement(baseline_mean: float, other_mean: float) -> float:
    """100 * (baseline - other) / baseline; positive when ``other`` wins."""
    if baseline_mean == 0.0:
        return 0.0
    return 100.0 * (baseline_mean - other_mean) / baseline_mean


def bootstrap_mean_ci(values: Sequence[float], confidence: float = 0.95,
                      n_resamples: int = 10_000, seed: int = 0) -> tuple[float, float]:
    """Percentile bootstrap confidence interval for the mean."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("no values to bootstrap")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, arr.size, size=(n_resamples, arr.size))
    means = arr[idx].mean(axis=1)
    alpha = (1.0 - confidence) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    return float(low), float(high)


@dataclass(frozen=True)
class ImprovementRow:
    """Optimized-vs-baseline comparison for one sweep cell and metric.

    ``diff_ci_low``/``diff_ci_high`` bound the mean per-replication
    difference (baseline minus optimized, seconds); the interval excluding
    zero from below means the optimized strategy is reliably better.
    """

    mat: float
    mttf: float
    baseline: str
    metric: str
    baseline_mean: float
    optimized_mean: float
    pct_improvement: float
    diff_ci_low: float
    diff_ci_high: float


def improvement_summary(result: SweepResult, n_resamples: int = 10_000,
                        seed: int = 0) -> list[ImprovementRow]:
    """Paired per-replication comparison of 'optimized' against every other
    strategy in the sweep, for both outcome metrics."""
    if "optimized" not in result.strategies:
        return []
    baselines = [s for s in result.strategies if s != "optimized"]
    out: list[ImprovementRow] = []
    for mat in result.mat_values:
        for mttf in result.mttf_values:
            opt = {r.replication: r for r in result.cell_runs("optimized", mat, mttf)}
            for baseline in baselines:
                base_runs = {
                    r.replication: r for r in result.cell_runs(baseline, mat, mttf)
                }
                reps = sorted(set(opt) & set(base_runs))
                if not reps:
                    continue
                for metric in ("total_task_time_s", "human_idle_time_s"):
                    b = [getattr(base_runs[r], metric) for r in reps]
                    o = [getattr(opt[r], metric) for r in reps]
                    diffs = [bv - ov for bv, ov in zip(b, o)]
                    low, high = bootstrap_mean_ci(
                        diffs, n_resamples=n_resamples, seed=seed
                    )
                    out.append(ImprovementRow(
                        mat=mat, mttf=mttf, baseline=baseline, metric=metric,
                        baseline_mean=float(np.mean(b)),
                        optimized_mean=float(np.mean(o)),
                        pct_improvement=percent_improvement(
                            float(np.mean(b)), float(np.mean(o))
                        ),
                        diff_ci_low=low,
                        diff_ci_high=high,
                    ))
    return out


def write_improvement_csv(rows: Sequence[ImprovementRow], path) -> None:
    header = ("mat_s,mttf_s,baseline,metric,baseline_mean,optimized_mean,"
              "pct_improvement,diff_ci_low,diff_ci_high")
    lines = [header]
    for r in rows:
        lines.append(",".join((
            _fmt_value(r.mat), _fmt_value(r.mttf), r.baseline, r.metric,
            _fmt_time(r.baseline_mean), _fmt_time(r.optimized_mean),
            f"{r.pct_improvement:.3f}", _fmt_time(r.diff_ci_low),
            _fmt_time(r.diff_ci_high),
        )))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
