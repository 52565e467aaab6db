"""Greedy just-in-time segmentation and scheduling of assembly tasks.

At each planning step the robot picks the next task segment to kit: an
ordered sequence K of future tasks (length up to the horizon) together with
a partition index i splitting K into the next kit (K[:i]) and a lookahead
tail (K[i:]). Every (K, i) candidate is scored by a weighted objective:

* a large penalty for any task whose predecessors are not satisfied,
* minus a coverage bonus per task in the next kit,
* a synchronization term comparing kit preparation plus delivery time
  against the human's remaining work on the current segment,
* a second synchronization term comparing the remaining robot work for the
  tail against the human work contained in the next kit,
* the nested kit-arrangement cost of the next kit's parts (so candidates
  whose parts arrange into a tidy tray are preferred), and
* a penalty per currently unavailable part in the next kit.

The two synchronization terms are absolute differences by default
(``abs_sync_terms=True``), which penalizes both finishing early and late;
set the flag to False to score the raw signed differences instead.

The winning candidate defines the next segment (its first i tasks) and the
kit layout produced by the lower-level arranger. Scoring depends on a
candidate only through the unordered sets {K[:i]} and {K}; solve_segment
exploits this by evaluating precedence-closed task sets directly, which is
equivalent to scoring every ordered candidate (solve_segment_bruteforce
does exactly that and is kept as a cross-check oracle).
"""

import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Mapping, Sequence

from .kit_layout import (
    CEParams,
    FitnessWeights,
    KitLayout,
    LayoutInfeasibleError,
    arrange_kit,
    derive_layout_seed,
)
from .task_model import Scenario, TaskGraph, allowed, duration_mean

_AREA_SLACK = 1e-9


class PlanningInfeasibleError(RuntimeError):
    """No candidate admits an acceptable kit layout."""


@dataclass(frozen=True)
class PlannerWeights:
    w1_precedence: float = 1e6
    w2_coverage: float = 1.0
    w3_sync_now: float = 1.0
    w4_sync_next: float = 1.0
    w5_kit_fitness: float = 0.01
    w7_unavailable: float = 1e4

    def __post_init__(self):
        for name in ("w1_precedence", "w2_coverage", "w3_sync_now",
                     "w4_sync_next", "w5_kit_fitness", "w7_unavailable"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PlannerConfig:
    horizon_n: int = 5
    delivery_time_d: float = 10.0
    weights: PlannerWeights = field(default_factory=PlannerWeights)
    ce_params: CEParams = field(default_factory=CEParams)
    fitness_weights: FitnessWeights = field(default_factory=FitnessWeights)
    abs_sync_terms: bool = True

    def __post_init__(self):
        if self.horizon_n < 1:
            raise ValueError("horizon_n must be >= 1")
        if self.delivery_time_d < 0:
            raise ValueError("delivery_time_d must be >= 0")


@dataclass(frozen=True)
class PlannerState:
    """Planner-visible snapshot of progress on one assembly unit.

    ``completed_segments`` are the segments already kitted, in order (the
    last one is the segment the human is working on, or about to).
    ``current_segment_human_remaining`` is the human's remaining time on
    that segment, in seconds. ``part_availability`` flags parts currently
    in the robot's inventory; parts missing from the map count as
    available. ``duration_estimates`` maps task id to (human, robot)
    second estimates; tasks missing from the map fall back to the task's
    fixed duration or distribution mean.
    """

    completed_segments: tuple[frozenset[str], ...] = ()
    current_segment_human_remaining: float = 0.0
    part_availability: Mapping[str, bool] = field(default_factory=dict)
    duration_estimates: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "completed_segments",
            tuple(frozenset(s) for s in self.completed_segments),
        )
        if self.current_segment_human_remaining < 0:
            raise ValueError("current_segment_human_remaining must be >= 0")

    @property
    def completed_tasks(self) -> frozenset[str]:
        out: set[str] = set()
        for seg in self.completed_segments:
            out.update(seg)
        return frozenset(out)

    def with_segment(self, segment) -> "PlannerState":
        return replace(self, completed_segments=self.completed_segments + (frozenset(segment),))


def default_duration_estimates(graph: TaskGraph) -> dict[str, tuple[float, float]]:
    """Per-task (human, robot) estimates: fixed values or distribution means."""
    return {
        tid: (duration_mean(t.human_duration), duration_mean(t.robot_duration))
        for tid, t in graph.tasks.items()
    }


def initial_state(graph: TaskGraph) -> PlannerState:
    return PlannerState(duration_estimates=default_duration_estimates(graph))


@dataclass(frozen=True)
class PlanCandidate:
    """An ordered future-task sequence with a partition index: the first
    ``partition_i`` tasks form the proposed next kit."""

    k_sequence: tuple[str, ...]
    partition_i: int

    def __post_init__(self):
        object.__setattr__(self, "k_sequence", tuple(self.k_sequence))
        if not 1 <= self.partition_i <= len(self.k_sequence):
            raise ValueError("partition_i must be within 1..len(k_sequence)")

    @property
    def segment(self) -> frozenset[str]:
        return frozenset(self.k_sequence[: self.partition_i])


@dataclass(frozen=True)
class SegmentDecision:
    segment: frozenset[str]
    layout: KitLayout
    objective_value: float
    estimated_robot_time: float
    candidate: PlanCandidate


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def _estimate(state: PlannerState, graph: TaskGraph, task_id: str) -> tuple[float, float]:
    est = state.duration_estimates.get(task_id)
    if est is not None:
        return est
    task = graph.task(task_id)
    return (duration_mean(task.human_duration), duration_mean(task.robot_duration))


def _sum_estimates(state, graph, task_ids) -> tuple[float, float]:
    # Accumulate in sorted id order so the result does not depend on the
    # ordering of the candidate sequence (float addition is not associative).
    human = 0.0
    robot = 0.0
    for tid in sorted(task_ids):
        h, r = _estimate(state, graph, tid)
        human += h
        robot += r
    return human, robot


def _unavailable_count(state: PlannerState, graph: TaskGraph, task_ids) -> int:
    avail = state.part_availability
    count = 0
    for tid in task_ids:
        for pid in graph.task(tid).required_parts:
            if avail.get(pid, True) is False:
                count += 1
    return count


def upper_objective(candidate: PlanCandidate, layout_cost: float,
                    state: PlannerState, graph: TaskGraph,
                    config: PlannerConfig) -> float:
    """Score one (K, i) candidate; lower is better.

    ``layout_cost`` is the kit-arrangement cost of the first-i parts (the
    kit fitness used in the objective is its negation).
    """
    k = candidate.k_sequence
    i = candidate.partition_i
    if len(set(k)) != len(k):
        raise ValueError("candidate sequence contains duplicate tasks")
    completed = state.completed_tasks
    if completed & set(k):
        raise ValueError("candidate sequence contains already-completed tasks")

    w = config.weights
    d = config.delivery_time_d

    penalty = 0
    done: set[str] = set(completed)
    for tid in k:
        penalty += 1 - allowed(tid, done, graph)
        done.add(tid)

    prefix = k[:i]
    suffix = k[i:]
    h_prefix, r_prefix = _sum_estimates(state, graph, prefix)
    _, r_suffix = _sum_estimates(state, graph, suffix)

    sync_now = d + r_prefix - state.current_segment_human_remaining
    sync_next = d + r_suffix - h_prefix
    if config.abs_sync_terms:
        sync_now = abs(sync_now)
        sync_next = abs(sync_next)

    unavailable = _unavailable_count(state, graph, prefix)

    return (
        w.w1_precedence * penalty
        - w.w2_coverage * i
        + w.w3_sync_now * sync_now
        + w.w4_sync_next * sync_next
        + w.w5_kit_fitness * layout_cost
        + w.w7_unavailable * unavailable
    )


# ---------------------------------------------------------------------------
# Candidate enumeration
# ---------------------------------------------------------------------------

def enumerate_candidates(state: PlannerState, scenario: Scenario,
                         config: PlannerConfig) -> list[PlanCandidate]:
    """All precedence-valid ordered sequences of incomplete tasks of length
    min(horizon, #incomplete), paired with every partition index whose kit
    parts pass the fast footprint-area tray filter.

    Sequences whose prefixes would violate precedence are pruned during
    construction rather than scored. Intended for small horizons; the
    solver uses an equivalent set-based evaluation for large instances.
    """
    graph = scenario.graph
    completed = state.completed_tasks
    incomplete = sorted(tid for tid in graph if tid not in completed)
    if not incomplete:
        return []
    length = min(config.horizon_n, len(incomplete))
    residual = {
        tid: graph.predecessor_sets[tid] - completed for tid in incomplete
    }
    task_area = {
        tid: scenario.part_area_sum(graph.task(tid).required_parts)
        for tid in incomplete
    }
    tray_area = scenario.tray.area

    out: list[PlanCandidate] = []
    seq: list[str] = []
    chosen: set[str] = set()

    def extend() -> None:
        if len(seq) == length:
            k = tuple(seq)
            area = 0.0
            for i in range(1, length + 1):
                area += task_area[k[i - 1]]
                if area <= tray_area + _AREA_SLACK:
                    out.append(PlanCandidate(k_sequence=k, partition_i=i))
                else:
                    break
            return
        for tid in incomplete:
            if tid in chosen or not residual[tid] <= chosen:
                continue
            seq.append(tid)
            chosen.add(tid)
            extend()
            seq.pop()
            chosen.remove(tid)

    extend()
    return out


# ---------------------------------------------------------------------------
# Layout memoization
# ---------------------------------------------------------------------------

class LayoutCache:
    """Content-keyed memo of kit arrangements.

    The cross-entropy seed for a part set is derived from the configured
    base seed and the sorted part ids, so a given part set always arranges
    to the same layout; caching is therefore transparent and safe across
    planning calls, simulation runs, and replications.
    """

    def __init__(self):
        self._store: dict = {}

    def __len__(self) -> int:
        return len(self._store)

    def clear(self) -> None:
        self._store.clear()

    @staticmethod
    def _key(part_ids: tuple[str, ...], scenario: Scenario, config: PlannerConfig):
        geometry = tuple(
            (pid, scenario.part(pid).part_type.id,
             scenario.part(pid).part_type.bbox_width,
             scenario.part(pid).part_type.bbox_height)
            for pid in part_ids
        )
        return (geometry, scenario.tray, config.fitness_weights, config.ce_params)

    def arrangement(self, part_ids, scenario: Scenario,
                    config: PlannerConfig) -> tuple[KitLayout, float]:
        ids = tuple(sorted(part_ids))
        key = self._key(ids, scenario, config)
        hit = self._store.get(key)
        if hit is not None:
            status, payload = hit
            if status == "ok":
                return payload
            raise payload
        parts = [scenario.part(pid) for pid in ids]
        params = replace(
            config.ce_params, seed=derive_layout_seed(config.ce_params.seed, ids)
        )
        try:
            layout, cost = arrange_kit(parts, scenario.tray, config.fitness_weights, params)
        except (LayoutInfeasibleError, ValueError) as exc:
            self._store[key] = ("fail", exc)
            raise
        self._store[key] = ("ok", (layout, cost))
        return layout, cost


GLOBAL_LAYOUT_CACHE = LayoutCache()


def clear_layout_cache() -> None:
    GLOBAL_LAYOUT_CACHE.clear()


# ---------------------------------------------------------------------------
# Segment solving
# ---------------------------------------------------------------------------

_closed_sets_cache: dict = {}


def _closed_task_sets(graph: TaskGraph, completed: frozenset[str],
                      max_size: int) -> list[frozenset[str]]:
    """All precedence-closed sets of incomplete tasks with 1..max_size
    elements (every predecessor of a member is completed or a member)."""
    cache_key = (graph.structure_key, completed, max_size)
    hit = _closed_sets_cache.get(cache_key)
    if hit is not None:
        return hit

    incomplete = sorted(tid for tid in graph if tid not in completed)
    residual = {tid: graph.predecessor_sets[tid] - completed for tid in incomplete}
    out: list[frozenset[str]] = []
    frontier: set[frozenset[str]] = {frozenset()}
    for _ in range(max_size):
        nxt: set[frozenset[str]] = set()
        for s in frontier:
            for tid in incomplete:
                if tid not in s and residual[tid] <= s:
                    nxt.add(s | {tid})
        if not nxt:
            break
        out.extend(sorted(nxt, key=lambda s: tuple(sorted(s))))
        frontier = nxt

    if len(_closed_sets_cache) > 4096:
        _closed_sets_cache.clear()
    _closed_sets_cache[cache_key] = out
    return out


def _lexmin_sequence(prefix: frozenset[str], full: frozenset[str],
                     completed: frozenset[str], graph: TaskGraph) -> tuple[str, ...]:
    """Lexicographically smallest precedence-valid ordering of ``full`` whose
    first |prefix| elements are exactly ``prefix``."""
    seq: list[str] = []
    done = set(completed)
    for pool in (set(prefix), set(full - prefix)):
        while pool:
            tid = min(t for t in pool if graph.predecessor_sets[t] <= done)
            pool.remove(tid)
            seq.append(tid)
            done.add(tid)
    return tuple(seq)


def solve_segment(state: PlannerState, scenario: Scenario, config: PlannerConfig,
                  cache: LayoutCache | None = None) -> SegmentDecision:
    """Pick the best next segment by scoring every (K, i) candidate.

    The objective depends on a candidate only through the sets {K[:i]} and
    {K}, so candidates are evaluated per (prefix set, full set) pair of
    precedence-closed sets; this is exactly equivalent to scoring each
    ordered sequence. Ties resolve to the lowest objective, then the larger
    partition index, then the lexicographically smallest sequence.

    Raises ValueError when no tasks remain and PlanningInfeasibleError when
    no candidate admits an acceptable kit layout.
    """
    if cache is None:
        cache = GLOBAL_LAYOUT_CACHE
    graph = scenario.graph
    completed = state.completed_tasks
    incomplete = [tid for tid in graph if tid not in completed]
    if not incomplete:
        raise ValueError("no incomplete tasks to plan")
    length = min(config.horizon_n, len(incomplete))

    closed = _closed_task_sets(graph, completed, length)
    fulls = [s for s in closed if len(s) == length]

    w = config.weights
    d = config.delivery_time_d
    h_rem = state.current_segment_human_remaining
    tray_area = scenario.tray.area

    # Per-set sums, shared across pairs.
    info: dict[frozenset[str], tuple[float, float, tuple[str, ...], float, int]] = {}
    for s in closed:
        h_sum, r_sum = _sum_estimates(state, graph, s)
        part_ids = tuple(sorted(
            pid for tid in s for pid in graph.task(tid).required_parts
        ))
        area = scenario.part_area_sum(part_ids)
        unavailable = _unavailable_count(state, graph, s)
        info[s] = (h_sum, r_sum, part_ids, area, unavailable)

    layout_cost: dict[frozenset[str], float | None] = {}

    def prefix_cost(s: frozenset[str]) -> float | None:
        if s not in layout_cost:
            try:
                _, cost = cache.arrangement(info[s][2], scenario, config)
                layout_cost[s] = cost
            except (LayoutInfeasibleError, ValueError):
                layout_cost[s] = None
        return layout_cost[s]

    best_key: tuple[float, int] | None = None
    best_pairs: list[tuple[frozenset[str], frozenset[str]]] = []
    for full in fulls:
        r_full = info[full][1]
        for prefix in closed:
            if not prefix <= full:
                continue
            h_pre, r_pre, _, area, unavailable = info[prefix]
            if area > tray_area + _AREA_SLACK:
                continue
            cost = prefix_cost(prefix)
            if cost is None:
                continue
            i = len(prefix)
            sync_now = d + r_pre - h_rem
            sync_next = d + (r_full - r_pre) - h_pre
            if config.abs_sync_terms:
                sync_now = abs(sync_now)
                sync_next = abs(sync_next)
            objective = (
                -w.w2_coverage * i
                + w.w3_sync_now * sync_now
                + w.w4_sync_next * sync_next
                + w.w5_kit_fitness * cost
                + w.w7_unavailable * unavailable
            )
            key = (objective, -i)
            if best_key is None or key < best_key:
                best_key = key
                best_pairs = [(prefix, full)]
            elif key == best_key:
                best_pairs.append((prefix, full))

    if best_key is None:
        raise PlanningInfeasibleError(
            "no candidate segment admits an acceptable kit layout"
        )

    sequences = sorted(
        _lexmin_sequence(prefix, full, completed, graph)
        for prefix, full in best_pairs
    )
    winner_seq = sequences[0]
    i = -best_key[1]
    candidate = PlanCandidate(k_sequence=winner_seq, partition_i=i)
    prefix = candidate.segment
    layout, cost = cache.arrangement(info[prefix][2], scenario, config)
    return SegmentDecision(
        segment=prefix,
        layout=layout,
        objective_value=best_key[0],
        estimated_robot_time=info[prefix][1],
        candidate=candidate,
    )


def solve_segment_bruteforce(state: PlannerState, scenario: Scenario,
                             config: PlannerConfig,
                             cache: LayoutCache | None = None) -> SegmentDecision:
    """Reference solver: scores every enumerated ordered candidate with
    upper_objective. Exponential in the horizon; used as a cross-check
    oracle and for exhaustive search when the horizon covers all tasks.
    """
    if cache is None:
        cache = GLOBAL_LAYOUT_CACHE
    graph = scenario.graph
    if all(tid in state.completed_tasks for tid in graph):
        raise ValueError("no incomplete tasks to plan")
    candidates = enumerate_candidates(state, scenario, config)

    best: tuple[tuple[float, int, tuple[str, ...]], PlanCandidate, KitLayout, float] | None = None
    for cand in candidates:
        part_ids = tuple(sorted(
            pid for tid in cand.segment for pid in graph.task(tid).required_parts
        ))
        try:
            layout, cost = cache.arrangement(part_ids, scenario, config)
        except (LayoutInfeasibleError, ValueError):
            continue
        objective = upper_objective(cand, cost, state, graph, config)
        key = (objective, -cand.partition_i, cand.k_sequence)
        if best is None or key < best[0]:
            best = (key, cand, layout, cost)

    if best is None:
        raise PlanningInfeasibleError(
            "no candidate segment admits an acceptable kit layout"
        )
    key, cand, layout, _ = best
    _, r_prefix = _sum_estimates(state, graph, cand.segment)
    return SegmentDecision(
        segment=cand.segment,
        layout=layout,
        objective_value=key[0],
        estimated_robot_time=r_prefix,
        candidate=cand,
    )


def replan_estimates(state: PlannerState,
                     observed: Mapping[str, float]) -> PlannerState:
    """Fold observed human progress (seconds per task of the current
    segment) into the state, flooring the remaining time at zero."""
    if not observed:
        return state
    current = state.completed_segments[-1] if state.completed_segments else frozenset()
    unknown = set(observed) - current
    if unknown:
        raise ValueError(
            f"observed tasks not in the current segment: {sorted(unknown)}"
        )
    progress = math.fsum(observed.values())
    remaining = max(0.0, state.current_segment_human_remaining - progress)
    return replace(state, current_segment_human_remaining=remaining)
