"""Kitting strategies: what goes in the next kit.

Three policies share one interface:

* ``whole_assembly``: one kit holding every part of the unit, delivered up
  front.
* ``single_task``: one kit per task, in a fixed precedence-valid order
  (lexicographic among the currently allowed tasks).
* ``optimized``: delegates to the greedy segment solver, which sizes and
  times kits against the human's progress and part availability.

The fixed strategies lay parts out on a deterministic type-grouped shelf
grid (no search); the optimized strategy uses the cross-entropy layout from
the solver. All policies are pure functions of the planner state.
"""

from dataclasses import dataclass

from .kit_layout import KitLayout, PartPlacement
from .planner import LayoutCache, PlannerConfig, PlannerState, solve_segment
from .task_model import Scenario

STRATEGY_NAMES = ("whole_assembly", "single_task", "optimized")


@dataclass(frozen=True)
class KitRequest:
    """One kit to prepare: the task segment it serves, the part ids to
    gather (union of the segment tasks' requirements), and the tray layout."""

    segment: frozenset[str]
    parts: tuple[str, ...]
    layout: KitLayout | None = None


def grid_layout(part_ids, scenario: Scenario, margin: float = 6.0,
                gap: float = 6.0) -> KitLayout:
    """Deterministic shelf layout: parts grouped by type (tallest types
    first), placed left to right in rows that wrap at the tray edge."""
    parts = [scenario.part(pid) for pid in part_ids]
    parts.sort(key=lambda p: (-p.part_type.bbox_height, p.part_type.id, p.id))
    tray = scenario.tray
    x = margin
    y = margin
    row_height = 0.0
    placements = []
    for part in parts:
        w = part.part_type.bbox_width
        h = part.part_type.bbox_height
        if x + w > tray.width - margin and x > margin:
            y += row_height + gap
            x = margin
            row_height = 0.0
        placements.append(PartPlacement(part=part.id, x=x + w / 2.0, y=y + h / 2.0))
        x += w + gap
        row_height = max(row_height, h)
    return KitLayout(placements=tuple(placements), tray=tray)


def strategy_next_kit(strategy: str, state: PlannerState, scenario: Scenario,
                      config: PlannerConfig,
                      cache: LayoutCache | None = None) -> KitRequest | None:
    """Produce the next kit for ``strategy``, or None when every task of the
    unit has been kitted."""
    if strategy not in STRATEGY_NAMES:
        raise ValueError(
            f"unknown strategy {strategy!r}; expected one of {STRATEGY_NAMES}"
        )
    graph = scenario.graph
    completed = state.completed_tasks
    remaining = [tid for tid in graph if tid not in completed]
    if not remaining:
        return None

    if strategy == "whole_assembly":
        segment = frozenset(remaining)
        layout = grid_layout(
            (p.id for p in scenario.parts_for_tasks(segment)), scenario
        )
    elif strategy == "single_task":
        ready = sorted(
            tid for tid in remaining if graph.predecessor_sets[tid] <= completed
        )
        if not ready:
            raise ValueError("no allowed task remains; graph is not executable")
        segment = frozenset({ready[0]})
        layout = grid_layout(
            (p.id for p in scenario.parts_for_tasks(segment)), scenario
        )
    else:
        decision = solve_segment(state, scenario, config, cache=cache)
        segment = decision.segment
        layout = decision.layout

    parts = tuple(p.id for p in scenario.parts_for_tasks(segment))
    return KitRequest(segment=segment, parts=parts, layout=layout)


def replay_strategy(strategy: str, scenario: Scenario, config: PlannerConfig,
                    cache: LayoutCache | None = None) -> list[KitRequest]:
    """Run a strategy to completion on a fresh unit and return its kit
    sequence (no timing; used for validation and analysis)."""
    from .planner import initial_state

    state = initial_state(scenario.graph)
    kits: list[KitRequest] = []
    for _ in range(len(scenario.graph) + 1):
        kit = strategy_next_kit(strategy, state, scenario, config, cache=cache)
        if kit is None:
            return kits
        kits.append(kit)
        state = state.with_segment(kit.segment)
    raise RuntimeError(f"strategy {strategy!r} failed to terminate")
