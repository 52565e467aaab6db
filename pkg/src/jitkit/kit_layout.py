"""Tray layout scoring and the cross-entropy kit arranger.

A layout places each part's centroid at (x, y) on the tray with an in-plane
rotation theta. Geometry uses the axis-aligned envelope of the rotated part
rectangle: a w x h part rotated by theta occupies a box with half-extents

    ((w|cos t| + h|sin t|) / 2,  (w|sin t| + h|cos t|) / 2)

about its centroid. Envelopes are conservative: they never under-report
overlap or tray overhang.

Layout quality is a cost (lower is better) combining three terms:

    cost = sum of same-type centroid distances
         - sum of different-type centroid distances
         + w6_overlap * total pairwise envelope overlap area

so minimizing it clusters same-type parts, spreads different types apart,
and pushes overlap to zero. Each unordered pair is counted once. The
arranger minimizes this cost with a cross-entropy search: sample candidate
layouts from a Gaussian, keep the lowest-cost elite fraction, refit the
Gaussian, repeat. Tray containment is enforced by clipping sampled centroids
to the tray and adding a per-area penalty during the search; the returned
layout is the best fully-contained, overlap-free sample ever drawn.
"""

import hashlib
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .task_model import PartInstance, Tray, UnknownPartError

TWO_PI = 2.0 * math.pi

# Total pairwise overlap (mm^2) a returned layout may carry; strict zero is
# numerically brittle.
OVERLAP_TOLERANCE = 1e-3

Catalog = Mapping[str, PartInstance]


@dataclass(frozen=True)
class PartPlacement:
    """Pose of one part on the tray: centroid (mm) and rotation (radians,
    normalized to [0, 2*pi))."""

    part: str
    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        theta = math.fmod(self.theta, TWO_PI)
        if theta < 0.0:
            theta += TWO_PI
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class KitLayout:
    placements: tuple[PartPlacement, ...]
    tray: Tray

    def __post_init__(self):
        object.__setattr__(self, "placements", tuple(self.placements))
        ids = [p.part for p in self.placements]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate part ids in layout")


@dataclass(frozen=True)
class FitnessWeights:
    w6_overlap: float = 10.0

    def __post_init__(self):
        if self.w6_overlap < 0:
            raise ValueError("w6_overlap must be >= 0")


@dataclass(frozen=True)
class CEParams:
    """Cross-entropy search parameters.

    Defaults: 200 samples per iteration, 30 elites, at most 100 iterations.
    ``convergence_std_tol`` stops the search once every positional standard
    deviation falls below it. ``cov_jitter`` is added to the covariance
    diagonal at each refit to keep sampling well conditioned.
    ``retry_limit`` is the total number of restarts (fresh random
    initializations) attempted before reporting infeasibility.
    """

    sample_count: int = 200
    elite_count: int = 30
    max_iterations: int = 100
    convergence_std_tol: float = 1.0
    cov_jitter: float = 1e-6
    containment_penalty_weight: float = 1e3
    retry_limit: int = 3
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.elite_count <= self.sample_count):
            raise ValueError("need 0 < elite_count <= sample_count")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.retry_limit < 1:
            raise ValueError("retry_limit must be >= 1")


class LayoutInfeasibleError(RuntimeError):
    """No acceptable (contained, overlap-free) layout was found.

    Carries the best layout seen across all restarts for diagnostics.
    """

    def __init__(self, message: str, best_layout: "KitLayout | None", best_cost: float):
        super().__init__(message)
        self.best_layout = best_layout
        self.best_cost = best_cost


# ---------------------------------------------------------------------------
# Scalar geometry
# ---------------------------------------------------------------------------

def envelope_half_extents(width: float, height: float, theta: float) -> tuple[float, float]:
    c = abs(math.cos(theta))
    s = abs(math.sin(theta))
    return (width * c + height * s) / 2.0, (width * s + height * c) / 2.0


def _resolve_part(placement: PartPlacement, catalog: Catalog) -> PartInstance:
    part = catalog.get(placement.part)
    if part is None:
        raise UnknownPartError(placement.part)
    return part


def bounding_box(placement: PartPlacement, catalog: Catalog) -> tuple[float, float, float, float]:
    """Axis-aligned envelope (xmin, ymin, xmax, ymax) of the rotated part."""
    part = _resolve_part(placement, catalog)
    hw, hh = envelope_half_extents(
        part.part_type.bbox_width, part.part_type.bbox_height, placement.theta
    )
    return (placement.x - hw, placement.y - hh, placement.x + hw, placement.y + hh)


def pair_distance_sums(layout: KitLayout, catalog: Catalog) -> tuple[float, float]:
    """(same-type, different-type) sums of centroid distances over unordered
    pairs of placements."""
    same = 0.0
    diff = 0.0
    pls = layout.placements
    types = [_resolve_part(p, catalog).part_type.id for p in pls]
    for k in range(len(pls)):
        for j in range(k + 1, len(pls)):
            d = math.hypot(pls[k].x - pls[j].x, pls[k].y - pls[j].y)
            if types[k] == types[j]:
                same += d
            else:
                diff += d
    return same, diff


def overlap_area(layout: KitLayout, catalog: Catalog) -> float:
    """Total pairwise intersection area of the part envelopes (mm^2)."""
    boxes = [bounding_box(p, catalog) for p in layout.placements]
    total = 0.0
    for k in range(len(boxes)):
        ax1, ay1, ax2, ay2 = boxes[k]
        for j in range(k + 1, len(boxes)):
            bx1, by1, bx2, by2 = boxes[j]
            ow = min(ax2, bx2) - max(ax1, bx1)
            if ow <= 0.0:
                continue
            oh = min(ay2, by2) - max(ay1, by1)
            if oh > 0.0:
                total += ow * oh
    return total


def containment_violation(layout: KitLayout, catalog: Catalog) -> float:
    """Total envelope area lying outside the tray (mm^2); exactly 0.0 when
    every envelope is contained."""
    total = 0.0
    tray = layout.tray
    for p in layout.placements:
        part = _resolve_part(p, catalog)
        hw, hh = envelope_half_extents(
            part.part_type.bbox_width, part.part_type.bbox_height, p.theta
        )
        # Overhang lengths on each axis; inside extents reproduce the full
        # width exactly (2*hw) when there is no overhang, so fully contained
        # boxes contribute exactly 0.0.
        ow = max(0.0, hw - p.x) + max(0.0, p.x + hw - tray.width)
        oh = max(0.0, hh - p.y) + max(0.0, p.y + hh - tray.height)
        inside_w = max(0.0, 2.0 * hw - ow)
        inside_h = max(0.0, 2.0 * hh - oh)
        total += (2.0 * hw) * (2.0 * hh) - inside_w * inside_h
    return total


def kit_fitness_cost(layout: KitLayout, catalog: Catalog, weights: FitnessWeights) -> float:
    """Layout cost minimized by the arranger (see module docstring)."""
    same, diff = pair_distance_sums(layout, catalog)
    return same - diff + weights.w6_overlap * overlap_area(layout, catalog)


def kit_fitness(layout: KitLayout, catalog: Catalog, weights: FitnessWeights) -> float:
    """Usability score of a layout, larger is better (negated cost)."""
    return -kit_fitness_cost(layout, catalog, weights)


# ---------------------------------------------------------------------------
# Cross-entropy arrangement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArrangementResult:
    """Outcome of a single cross-entropy run."""

    layout: "KitLayout | None"
    cost: float
    feasible: bool
    iterations: int
    converged: bool
    best_cost_history: tuple[float, ...]
    best_any_layout: "KitLayout | None"
    best_any_cost: float


def derive_layout_seed(base_seed: int, part_ids: Sequence[str]) -> int:
    """Deterministic per-part-set seed so that arranging the same part set
    (same base seed) always yields the same layout, independent of when or
    where in a planning run it is requested."""
    payload = f"{int(base_seed)}|" + "|".join(sorted(part_ids))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class _Geometry:
    """Precomputed per-part arrays shared by all samples of a CE run."""

    def __init__(self, parts: Sequence[PartInstance], tray: Tray):
        self.ids = [p.id for p in parts]
        self.widths = np.array([p.part_type.bbox_width for p in parts])
        self.heights = np.array([p.part_type.bbox_height for p in parts])
        type_ids = {p.part_type.id for p in parts}
        codes = {t: i for i, t in enumerate(sorted(type_ids))}
        self.type_codes = np.array([codes[p.part_type.id] for p in parts])
        self.tray = tray
        n = len(parts)
        iu, ju = np.triu_indices(n, k=1)
        self.iu, self.ju = iu, ju
        self.same_pair = self.type_codes[iu] == self.type_codes[ju]
        self.diff_pair = ~self.same_pair


def _score_batch(samples: np.ndarray, geom: _Geometry, weights: FitnessWeights,
                 penalty_weight: float):
    """Vectorized layout scoring for a (m, 3n) batch of pose vectors.

    Returns (penalized cost, raw cost, total overlap, containment violation)
    arrays of shape (m,). Matches the scalar functions' arithmetic.
    """
    xs = samples[:, 0::3]
    ys = samples[:, 1::3]
    th = samples[:, 2::3]
    c = np.abs(np.cos(th))
    s = np.abs(np.sin(th))
    hw = (geom.widths * c + geom.heights * s) / 2.0
    hh = (geom.widths * s + geom.heights * c) / 2.0

    iu, ju = geom.iu, geom.ju
    dx = xs[:, iu] - xs[:, ju]
    dy = ys[:, iu] - ys[:, ju]
    dist = np.hypot(dx, dy)
    same = dist[:, geom.same_pair].sum(axis=1)
    diff = dist[:, geom.diff_pair].sum(axis=1)

    ow = np.maximum(0.0, (hw[:, iu] + hw[:, ju]) - np.abs(dx))
    oh = np.maximum(0.0, (hh[:, iu] + hh[:, ju]) - np.abs(dy))
    overlap = (ow * oh).sum(axis=1)

    tray = geom.tray
    out_w = np.maximum(0.0, hw - xs) + np.maximum(0.0, xs + hw - tray.width)
    out_h = np.maximum(0.0, hh - ys) + np.maximum(0.0, ys + hh - tray.height)
    inside_w = np.maximum(0.0, 2.0 * hw - out_w)
    inside_h = np.maximum(0.0, 2.0 * hh - out_h)
    violation = ((2.0 * hw) * (2.0 * hh) - inside_w * inside_h).sum(axis=1)

    raw = same - diff + weights.w6_overlap * overlap
    penalized = raw + penalty_weight * violation
    return penalized, raw, overlap, violation


def _vector_to_layout(vec: np.ndarray, geom: _Geometry) -> KitLayout:
    placements = tuple(
        PartPlacement(part=pid, x=float(vec[3 * k]), y=float(vec[3 * k + 1]),
                      theta=float(vec[3 * k + 2]))
        for k, pid in enumerate(geom.ids)
    )
    return KitLayout(placements=placements, tray=geom.tray)


def cross_entropy_arrange(parts: Sequence[PartInstance], tray: Tray,
                          weights: FitnessWeights, params: CEParams,
                          rng: np.random.Generator | None = None) -> ArrangementResult:
    """One cross-entropy run (no restarts); see arrange_kit for the wrapper.

    The sampling distribution starts with centroids uniform over the tray,
    rotations uniform over [0, 2*pi), a diagonal covariance with positional
    std tray_dimension/4 and rotational std pi/2, and is refit from the
    elite samples (plus diagonal jitter) each iteration. Samples' centroids
    are clipped to the tray rectangle before scoring.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    geom = _Geometry(parts, tray)
    n = len(parts)
    dim = 3 * n

    mu = np.empty(dim)
    mu[0::3] = rng.uniform(0.0, tray.width, n)
    mu[1::3] = rng.uniform(0.0, tray.height, n)
    mu[2::3] = rng.uniform(0.0, TWO_PI, n)
    cov = np.zeros((dim, dim))
    cov[np.arange(0, dim, 3), np.arange(0, dim, 3)] = (tray.width / 4.0) ** 2
    cov[np.arange(1, dim, 3), np.arange(1, dim, 3)] = (tray.height / 4.0) ** 2
    cov[np.arange(2, dim, 3), np.arange(2, dim, 3)] = (math.pi / 2.0) ** 2

    pos_mask = np.ones(dim, dtype=bool)
    pos_mask[2::3] = False

    best_any_vec: np.ndarray | None = None
    best_any_cost = math.inf
    best_feas_vec: np.ndarray | None = None
    best_feas_cost = math.inf
    history: list[float] = []
    converged = False
    iterations = 0

    for iterations in range(1, params.max_iterations + 1):
        samples = rng.multivariate_normal(
            mu, cov, size=params.sample_count, check_valid="ignore", method="cholesky"
        )
        np.clip(samples[:, 0::3], 0.0, tray.width, out=samples[:, 0::3])
        np.clip(samples[:, 1::3], 0.0, tray.height, out=samples[:, 1::3])

        penalized, raw, overlap, violation = _score_batch(
            samples, geom, weights, params.containment_penalty_weight
        )

        order = np.argsort(penalized, kind="stable")
        best_idx = int(order[0])
        if penalized[best_idx] < best_any_cost:
            best_any_cost = float(penalized[best_idx])
            best_any_vec = samples[best_idx].copy()
        history.append(best_any_cost)

        feasible = (violation <= 0.0) & (overlap <= OVERLAP_TOLERANCE)
        if feasible.any():
            cand = np.flatnonzero(feasible)
            local = cand[int(np.argmin(raw[cand]))]
            if raw[local] < best_feas_cost:
                best_feas_cost = float(raw[local])
                best_feas_vec = samples[local].copy()

        elites = samples[order[: params.elite_count]]
        mu = elites.mean(axis=0)
        if params.elite_count == 1:
            cov = np.zeros((dim, dim))
        else:
            cov = np.atleast_2d(np.cov(elites, rowvar=False))
        cov[np.diag_indices(dim)] += params.cov_jitter

        # Early stop once the search has collapsed positionally, but never
        # before an acceptable sample exists: acceptance needs a contained,
        # overlap-free layout and the distribution may still be drifting
        # toward the feasible region when the std first drops.
        if math.sqrt(float(np.max(np.diag(cov)[pos_mask]))) < params.convergence_std_tol:
            converged = True
            if best_feas_vec is not None:
                break

    catalog = {p.id: p for p in parts}
    layout = None
    cost = math.inf
    feasible_run = False
    if best_feas_vec is not None:
        layout = _vector_to_layout(best_feas_vec, geom)
        # Recompute with the scalar functions so the reported cost is exactly
        # what kit_fitness_cost(layout) returns.
        if containment_violation(layout, catalog) <= 0.0 and \
                overlap_area(layout, catalog) <= OVERLAP_TOLERANCE:
            cost = kit_fitness_cost(layout, catalog, weights)
            feasible_run = True
        else:
            layout = None
    best_any_layout = (
        _vector_to_layout(best_any_vec, geom) if best_any_vec is not None else None
    )
    return ArrangementResult(
        layout=layout,
        cost=cost,
        feasible=feasible_run,
        iterations=iterations,
        converged=converged,
        best_cost_history=tuple(history),
        best_any_layout=best_any_layout,
        best_any_cost=best_any_cost,
    )


def arrange_kit(parts: Sequence[PartInstance], tray: Tray, weights: FitnessWeights,
                params: CEParams) -> tuple[KitLayout, float]:
    """Arrange ``parts`` on ``tray``, returning (layout, cost).

    The returned layout is the lowest-cost fully-contained sample with total
    overlap at most OVERLAP_TOLERANCE seen across up to ``params.retry_limit``
    cross-entropy runs. Identical inputs (including the seed) produce an
    identical layout.

    Raises ValueError when the parts cannot fit even in theory (empty part
    list, or total footprint area exceeding the tray area) and
    LayoutInfeasibleError when every restart fails to produce an acceptable
    layout.
    """
    if not parts:
        raise ValueError("cannot arrange an empty part list")
    ids = [p.id for p in parts]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate part ids")
    total_area = math.fsum(p.part_type.area for p in parts)
    if total_area > tray.area + 1e-9:
        raise ValueError(
            f"parts cannot fit: total part area {total_area:.1f} mm^2 exceeds "
            f"tray area {tray.area:.1f} mm^2"
        )

    best_fail_layout: KitLayout | None = None
    best_fail_cost = math.inf
    for attempt in range(params.retry_limit):
        rng = np.random.default_rng([params.seed, attempt])
        result = cross_entropy_arrange(parts, tray, weights, params, rng=rng)
        if result.feasible:
            assert result.layout is not None
            return result.layout, result.cost
        if result.best_any_cost < best_fail_cost:
            best_fail_cost = result.best_any_cost
            best_fail_layout = result.best_any_layout
    raise LayoutInfeasibleError(
        f"no contained, overlap-free layout found for {len(parts)} parts after "
        f"{params.retry_limit} restarts",
        best_layout=best_fail_layout,
        best_cost=best_fail_cost,
    )


# ---------------------------------------------------------------------------
# Export helpers
# ---------------------------------------------------------------------------

def layout_to_json_obj(layout: KitLayout) -> list[dict]:
    return [
        {"part_id": p.part, "x_mm": p.x, "y_mm": p.y, "theta_rad": p.theta}
        for p in layout.placements
    ]


def layout_to_svg(layout: KitLayout, catalog: Catalog) -> str:
    """Simple SVG rendering of the tray and the rotated part rectangles."""
    tray = layout.tray
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="-10 -10 '
        f'{tray.width + 20:.1f} {tray.height + 20:.1f}" width="{tray.width + 20:.0f}" '
        f'height="{tray.height + 20:.0f}">',
        f'<rect x="0" y="0" width="{tray.width:.1f}" height="{tray.height:.1f}" '
        'fill="#f8f8f8" stroke="#333" stroke-width="1"/>',
    ]
    palette = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"]
    type_color: dict[str, str] = {}
    for p in layout.placements:
        part = _resolve_part(p, catalog)
        tid = part.part_type.id
        color = type_color.setdefault(tid, palette[len(type_color) % len(palette)])
        w = part.part_type.bbox_width
        h = part.part_type.bbox_height
        deg = math.degrees(p.theta)
        lines.append(
            f'<g transform="translate({p.x:.2f},{p.y:.2f}) rotate({deg:.2f})">'
            f'<rect x="{-w / 2:.2f}" y="{-h / 2:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{color}" fill-opacity="0.6" stroke="#222" stroke-width="0.8"/>'
            f'<text x="0" y="0" font-size="8" text-anchor="middle">{p.part}</text></g>'
        )
    lines.append("</svg>")
    return "\n".join(lines)
