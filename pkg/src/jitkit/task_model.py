"""Assembly scenarios: tasks, parts, precedence constraints, and the kitting tray.

A scenario bundles everything the planner and simulator need to know about
one product:

* a catalog of part types (with bounding-box footprints) and part instances,
* assembly tasks with human/robot durations, required parts, and
  predecessor tasks,
* the kitting tray geometry.

Durations are either a fixed number of seconds or an empirical distribution,
stored as a tuple of observed samples; the simulator draws uniformly from the
tuple. All types are immutable after loading and safe to share between
concurrent readers.

Scenario files are single JSON documents with top-level keys ``part_types``,
``parts``, ``tasks`` and ``tray`` (plus an optional ``name``). Unknown keys
are rejected so that typos fail loudly instead of being silently ignored.
"""

import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping, Sequence

Duration = float | tuple[float, ...]


class ScenarioError(Exception):
    """Base class for scenario loading failures."""


class ScenarioParseError(ScenarioError):
    """The document is malformed: bad JSON, wrong types, or unknown keys."""


class ScenarioValidationError(ScenarioError):
    """A well-formed document violates scenario invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid scenario: " + "; ".join(self.violations))


class UnknownTaskError(LookupError):
    def __init__(self, task_id: str):
        self.task_id = task_id
        super().__init__(f"unknown task id: {task_id!r}")


class UnknownPartError(LookupError):
    def __init__(self, part_id: str):
        self.part_id = part_id
        super().__init__(f"unknown part id: {part_id!r}")


# ---------------------------------------------------------------------------
# Durations
# ---------------------------------------------------------------------------

def duration_is_fixed(value: Duration) -> bool:
    return isinstance(value, (int, float))


def duration_mean(value: Duration) -> float:
    """Point estimate of a duration: the value itself, or the sample mean."""
    if duration_is_fixed(value):
        return float(value)
    if not value:
        raise ValueError("empty duration distribution")
    return math.fsum(value) / len(value)


def duration_sample(value: Duration, rng) -> float:
    """Draw one realization: fixed values pass through, distributions are
    sampled uniformly. ``rng`` is a numpy Generator."""
    if duration_is_fixed(value):
        return float(value)
    if not value:
        raise ValueError("empty duration distribution")
    return float(value[int(rng.integers(0, len(value)))])


def _validate_duration(value: Duration, what: str) -> None:
    if duration_is_fixed(value):
        if value < 0:
            raise ValueError(f"{what} must be >= 0, got {value}")
    else:
        if not value:
            raise ValueError(f"{what} distribution must be non-empty")
        if any(v < 0 for v in value):
            raise ValueError(f"{what} distribution contains negative samples")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartType:
    """A kind of part, e.g. "M6 screw box" or "leg", with its tray footprint
    in millimetres (axis-aligned bounding box at zero rotation)."""

    id: str
    name: str
    bbox_width: float
    bbox_height: float

    def __post_init__(self):
        if self.bbox_width <= 0 or self.bbox_height <= 0:
            raise ValueError(
                f"part type {self.id!r}: bounding box dimensions must be positive"
            )

    @property
    def area(self) -> float:
        return self.bbox_width * self.bbox_height


@dataclass(frozen=True)
class PartInstance:
    """One concrete part consumed by exactly one assembly task."""

    id: str
    part_type: PartType


@dataclass(frozen=True)
class Task:
    """One assembly step.

    ``human_duration`` / ``robot_duration`` are seconds (fixed float) or an
    empirical sample tuple. ``required_parts`` lists ids of the part
    instances this step consumes; a part belongs to exactly one task.
    """

    id: str
    human_duration: Duration
    robot_duration: Duration
    required_parts: tuple[str, ...] = ()
    predecessors: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "required_parts", tuple(self.required_parts))
        object.__setattr__(self, "predecessors", tuple(self.predecessors))
        for attr in ("human_duration", "robot_duration"):
            value = getattr(self, attr)
            if not duration_is_fixed(value):
                object.__setattr__(self, attr, tuple(float(v) for v in value))
            _validate_duration(getattr(self, attr), f"task {self.id!r} {attr}")


@dataclass(frozen=True, eq=False)
class TaskGraph:
    """Tasks keyed by id; precedence edges are implied by predecessor lists.

    Iteration follows the insertion (file) order of the tasks.
    """

    tasks: Mapping[str, Task]

    @classmethod
    def from_tasks(cls, tasks: Sequence[Task]) -> "TaskGraph":
        by_id: dict[str, Task] = {}
        for t in tasks:
            if t.id in by_id:
                raise ValueError(f"duplicate task id {t.id!r}")
            by_id[t.id] = t
        return cls(tasks=by_id)

    def __iter__(self) -> Iterator[str]:
        return iter(self.tasks)

    def __len__(self) -> int:
        return len(self.tasks)

    def __contains__(self, task_id: str) -> bool:
        return task_id in self.tasks

    def __eq__(self, other) -> bool:
        return isinstance(other, TaskGraph) and dict(self.tasks) == dict(other.tasks)

    def task(self, task_id: str) -> Task:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownTaskError(task_id) from None

    @cached_property
    def predecessor_sets(self) -> dict[str, frozenset[str]]:
        return {tid: frozenset(t.predecessors) for tid, t in self.tasks.items()}

    @cached_property
    def structure_key(self) -> tuple:
        """Hashable fingerprint of the precedence structure, used as a cache
        key by the planner."""
        return tuple(
            (tid, tuple(sorted(t.predecessors))) for tid, t in sorted(self.tasks.items())
        )

    def topological_order(self) -> tuple[str, ...]:
        """Deterministic (lexicographic tie-break) topological order.

        Raises ValueError if the graph has a cycle or dangling predecessors.
        """
        indegree = {tid: 0 for tid in self.tasks}
        dependents: dict[str, list[str]] = {tid: [] for tid in self.tasks}
        for tid, task in self.tasks.items():
            for p in task.predecessors:
                if p not in self.tasks:
                    raise ValueError(f"unknown predecessor {p} (task {tid})")
                indegree[tid] += 1
                dependents[p].append(tid)
        ready = sorted(tid for tid, d in indegree.items() if d == 0)
        order: list[str] = []
        while ready:
            tid = ready.pop(0)
            order.append(tid)
            changed = False
            for dep in dependents[tid]:
                indegree[dep] -= 1
                if indegree[dep] == 0:
                    ready.append(dep)
                    changed = True
            if changed:
                ready.sort()
        if len(order) != len(self.tasks):
            raise ValueError("graph contains a cycle")
        return tuple(order)


@dataclass(frozen=True)
class Tray:
    """Kitting tray rectangle in millimetres; the origin is its lower-left
    corner and part centroids live in [0, width] x [0, height]."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("tray dimensions must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated (graph, tray, part catalog) bundle."""

    graph: TaskGraph
    tray: Tray
    part_types: Mapping[str, PartType]
    parts: Mapping[str, PartInstance]
    name: str = ""

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Scenario)
            and self.graph == other.graph
            and self.tray == other.tray
            and dict(self.part_types) == dict(other.part_types)
            and dict(self.parts) == dict(other.parts)
            and self.name == other.name
        )

    def part(self, part_id: str) -> PartInstance:
        try:
            return self.parts[part_id]
        except KeyError:
            raise UnknownPartError(part_id) from None

    def parts_for_tasks(self, task_ids) -> tuple[PartInstance, ...]:
        """All part instances required by the given tasks, sorted by id."""
        ids: set[str] = set()
        for tid in task_ids:
            ids.update(self.graph.task(tid).required_parts)
        return tuple(self.part(pid) for pid in sorted(ids))

    def part_area_sum(self, part_ids) -> float:
        """Total bounding-box area (zero rotation) of the given parts."""
        return math.fsum(self.part(pid).part_type.area for pid in part_ids)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def allowed(task_id: str, completed, graph: TaskGraph) -> int:
    """1 if every predecessor of ``task_id`` is in ``completed``, else 0.

    Pure function; raises UnknownTaskError for ids not in the graph.
    """
    preds = graph.predecessor_sets.get(task_id)
    if preds is None:
        raise UnknownTaskError(task_id)
    if not isinstance(completed, (set, frozenset)):
        completed = set(completed)
    return int(preds <= completed)


def validate_graph(graph: TaskGraph) -> list[str]:
    """Collect all graph-invariant violations (never raises).

    Checks: non-empty graph, predecessor references resolve, acyclicity,
    and exclusive part-to-task assignment. An empty list means the graph
    is valid.
    """
    violations: list[str] = []
    if not graph.tasks:
        return ["graph has no tasks"]

    known = set(graph.tasks)
    for tid, task in graph.tasks.items():
        for p in task.predecessors:
            if p not in known:
                violations.append(f"unknown predecessor {p} (task {tid})")

    # Kahn's algorithm over resolvable edges only; leftovers sit on a cycle.
    indegree = {
        tid: sum(1 for p in task.predecessors if p in known)
        for tid, task in graph.tasks.items()
    }
    dependents: dict[str, list[str]] = {tid: [] for tid in graph.tasks}
    for tid, task in graph.tasks.items():
        for p in task.predecessors:
            if p in known:
                dependents[p].append(tid)
    ready = [tid for tid, d in indegree.items() if d == 0]
    seen = 0
    while ready:
        tid = ready.pop()
        seen += 1
        for dep in dependents[tid]:
            indegree[dep] -= 1
            if indegree[dep] == 0:
                ready.append(dep)
    if seen != len(graph.tasks):
        stuck = sorted(tid for tid, d in indegree.items() if d > 0)
        violations.append("cycle: " + ",".join(stuck))

    usage: dict[str, list[str]] = {}
    for tid, task in graph.tasks.items():
        for pid in task.required_parts:
            usage.setdefault(pid, []).append(tid)
    for pid, tids in sorted(usage.items()):
        if len(tids) > 1:
            violations.append(
                f"part {pid} required by multiple tasks: " + ",".join(sorted(tids))
            )
    return violations


# ---------------------------------------------------------------------------
# Scenario documents
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {"name", "part_types", "parts", "tasks", "tray"}
_PART_TYPE_KEYS = {"id", "name", "bbox_width_mm", "bbox_height_mm"}
_PART_KEYS = {"id", "part_type"}
_TASK_KEYS = {
    "id",
    "name",
    "human_duration_s",
    "human_duration_dist",
    "robot_duration_s",
    "robot_duration_dist",
    "predecessors",
    "required_parts",
}
_TRAY_KEYS = {"width_mm", "height_mm"}


def _require_dict(value, ctx: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioParseError(f"{ctx}: expected an object, got {type(value).__name__}")
    return value


def _require_list(value, ctx: str) -> list:
    if not isinstance(value, list):
        raise ScenarioParseError(f"{ctx}: expected an array, got {type(value).__name__}")
    return value


def _require_str(value, ctx: str) -> str:
    if not isinstance(value, str) or not value:
        raise ScenarioParseError(f"{ctx}: expected a non-empty string")
    return value


def _require_number(value, ctx: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioParseError(f"{ctx}: expected a number, got {type(value).__name__}")
    return float(value)


def _reject_unknown(obj: dict, allowed_keys: set, ctx: str) -> None:
    unknown = sorted(set(obj) - allowed_keys)
    if unknown:
        raise ScenarioParseError(f"{ctx}: unknown keys: {', '.join(unknown)}")


def _parse_duration(obj: dict, stem: str, ctx: str) -> Duration:
    fixed_key, dist_key = f"{stem}_s", f"{stem}_dist"
    has_fixed, has_dist = fixed_key in obj, dist_key in obj
    if has_fixed == has_dist:
        raise ScenarioParseError(
            f"{ctx}: exactly one of {fixed_key!r} or {dist_key!r} is required"
        )
    if has_fixed:
        return _require_number(obj[fixed_key], f"{ctx}.{fixed_key}")
    samples = _require_list(obj[dist_key], f"{ctx}.{dist_key}")
    if not samples:
        raise ScenarioParseError(f"{ctx}.{dist_key}: must be a non-empty array")
    return tuple(
        _require_number(v, f"{ctx}.{dist_key}[{i}]") for i, v in enumerate(samples)
    )


def _parse_str_list(value, ctx: str) -> tuple[str, ...]:
    return tuple(_require_str(v, f"{ctx}[{i}]") for i, v in enumerate(_require_list(value, ctx)))


def scenario_from_dict(doc: dict, source: str = "<dict>") -> Scenario:
    """Build and validate a Scenario from a parsed JSON document.

    Raises ScenarioParseError for structural problems and
    ScenarioValidationError (with the full violation list) for semantic ones.
    """
    _require_dict(doc, source)
    _reject_unknown(doc, _SCENARIO_KEYS, source)
    for key in ("part_types", "parts", "tasks", "tray"):
        if key not in doc:
            raise ScenarioParseError(f"{source}: missing required key {key!r}")

    violations: list[str] = []

    part_types: dict[str, PartType] = {}
    for i, entry in enumerate(_require_list(doc["part_types"], f"{source}.part_types")):
        ctx = f"{source}.part_types[{i}]"
        entry = _require_dict(entry, ctx)
        _reject_unknown(entry, _PART_TYPE_KEYS, ctx)
        tid = _require_str(entry.get("id"), f"{ctx}.id")
        width = _require_number(entry.get("bbox_width_mm"), f"{ctx}.bbox_width_mm")
        height = _require_number(entry.get("bbox_height_mm"), f"{ctx}.bbox_height_mm")
        if width <= 0 or height <= 0:
            raise ScenarioParseError(f"{ctx}: bounding box dimensions must be positive")
        if tid in part_types:
            violations.append(f"duplicate part type id {tid}")
            continue
        part_types[tid] = PartType(
            id=tid, name=str(entry.get("name", tid)), bbox_width=width, bbox_height=height
        )

    parts: dict[str, PartInstance] = {}
    for i, entry in enumerate(_require_list(doc["parts"], f"{source}.parts")):
        ctx = f"{source}.parts[{i}]"
        entry = _require_dict(entry, ctx)
        _reject_unknown(entry, _PART_KEYS, ctx)
        pid = _require_str(entry.get("id"), f"{ctx}.id")
        type_id = _require_str(entry.get("part_type"), f"{ctx}.part_type")
        if pid in parts:
            violations.append(f"duplicate part id {pid}")
            continue
        if type_id not in part_types:
            violations.append(f"unknown part type {type_id} (part {pid})")
            continue
        parts[pid] = PartInstance(id=pid, part_type=part_types[type_id])

    tasks: list[Task] = []
    seen_tasks: set[str] = set()
    for i, entry in enumerate(_require_list(doc["tasks"], f"{source}.tasks")):
        ctx = f"{source}.tasks[{i}]"
        entry = _require_dict(entry, ctx)
        _reject_unknown(entry, _TASK_KEYS, ctx)
        tid = _require_str(entry.get("id"), f"{ctx}.id")
        human = _parse_duration(entry, "human_duration", ctx)
        robot = _parse_duration(entry, "robot_duration", ctx)
        preds = _parse_str_list(entry.get("predecessors", []), f"{ctx}.predecessors")
        req = _parse_str_list(entry.get("required_parts", []), f"{ctx}.required_parts")
        if tid in seen_tasks:
            violations.append(f"duplicate task id {tid}")
            continue
        seen_tasks.add(tid)
        try:
            tasks.append(
                Task(
                    id=tid,
                    name=str(entry.get("name", "")),
                    human_duration=human,
                    robot_duration=robot,
                    predecessors=preds,
                    required_parts=req,
                )
            )
        except ValueError as exc:
            raise ScenarioParseError(f"{ctx}: {exc}") from None

    tray_obj = _require_dict(doc["tray"], f"{source}.tray")
    _reject_unknown(tray_obj, _TRAY_KEYS, f"{source}.tray")
    width = _require_number(tray_obj.get("width_mm"), f"{source}.tray.width_mm")
    height = _require_number(tray_obj.get("height_mm"), f"{source}.tray.height_mm")
    if width <= 0 or height <= 0:
        raise ScenarioParseError(f"{source}.tray: dimensions must be positive")

    graph = TaskGraph.from_tasks(tasks)
    violations.extend(validate_graph(graph))

    required: set[str] = set()
    for task in tasks:
        for pid in task.required_parts:
            if pid not in parts:
                violations.append(f"unknown part {pid} (task {task.id})")
            required.add(pid)
    for pid in sorted(set(parts) - required):
        violations.append(f"part {pid} not required by any task")

    if violations:
        raise ScenarioValidationError(violations)

    return Scenario(
        graph=graph,
        tray=Tray(width=width, height=height),
        part_types=part_types,
        parts=parts,
        name=str(doc.get("name", "")),
    )


def load_scenario(path) -> Scenario:
    """Load, parse, and validate a scenario JSON file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return scenario_from_dict(doc, source=str(path))


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of scenario_from_dict, producing the canonical document form."""
    doc: dict = {}
    if scenario.name:
        doc["name"] = scenario.name
    doc["part_types"] = [
        {
            "id": pt.id,
            "name": pt.name,
            "bbox_width_mm": pt.bbox_width,
            "bbox_height_mm": pt.bbox_height,
        }
        for pt in scenario.part_types.values()
    ]
    doc["parts"] = [
        {"id": p.id, "part_type": p.part_type.id} for p in scenario.parts.values()
    ]
    task_entries = []
    for task in scenario.graph.tasks.values():
        entry: dict = {"id": task.id}
        if task.name:
            entry["name"] = task.name
        if duration_is_fixed(task.human_duration):
            entry["human_duration_s"] = task.human_duration
        else:
            entry["human_duration_dist"] = list(task.human_duration)
        if duration_is_fixed(task.robot_duration):
            entry["robot_duration_s"] = task.robot_duration
        else:
            entry["robot_duration_dist"] = list(task.robot_duration)
        entry["predecessors"] = list(task.predecessors)
        entry["required_parts"] = list(task.required_parts)
        task_entries.append(entry)
    doc["tasks"] = task_entries
    doc["tray"] = {"width_mm": scenario.tray.width, "height_mm": scenario.tray.height}
    return doc


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(
        json.dumps(scenario_to_dict(scenario), indent=2) + "\n", encoding="utf-8"
    )


def bundled_scenario_path(name: str) -> Path:
    """Path to one of the scenario files shipped with the package."""
    return Path(__file__).parent / "scenarios" / name
