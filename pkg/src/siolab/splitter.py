"""Separated partitions of a measure into two halves of every dyadic cube.

Given a discretized measure sigma and a level n, the construction picks a
fine dyadic size delta = 2^(-m) so small that no delta-cube carries a
2^(-n) fraction of the lightest populated dyadic cube of size 2^(-n), then
walks the fine cubes of each size-2^(-n) cube in lexicographic order,
always adding the next cube to the half with currently smaller mass.  The
resulting halves E^1, E^2 split every populated dyadic cube of size 2^(-n)
to relative accuracy 2^(-n); shrinking each fine cube about its corner by a
factor tau < 1 then makes the two halves lie at distance at least
(1 - tau) * delta from each other without spoiling the balance.

The atom-aware variant runs the same construction on the continuous parts,
adjoins the n heaviest atoms of mu to E^1 and of nu to E^2, and carves a
small ball around each adjoined atom out of the *other* half, so the halves
stay separated even when an atom lands inside a cube of the opposite half.

All coordinates are dyadic rationals, so the geometry below is exact in
floating point: cube corners are integer multiples of delta, and membership
tests reduce to integer grid indices plus an offset comparison.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    CommonAtomsError,
    ParameterError,
    ResolutionError,
    ShrinkRetryError,
    ToleranceError,
)
from .measure import DiscreteMeasure, _rows_view, common_atoms, decompose, merge

__all__ = [
    "DyadicGrid",
    "RemovedBall",
    "SeparatedPartition",
    "ShrinkStabilityReport",
    "DEFAULT_TAU",
    "build_partition",
    "atom_aware_partition",
    "shrink_stability",
    "balance_at_level",
    "verify_partition",
    "save_partition",
    "load_partition",
]

DEFAULT_TAU = 1.0 - 2.0**-8


@dataclass(frozen=True)
class DyadicGrid:
    """Ambient window [-2^n, 2^n)^N tiled by dyadic cubes of two sizes.

    ``level`` fixes the window and the coarse subdivision into cubes of
    side 2^(-level); ``fine_level`` >= level fixes the fine size
    2^(-fine_level), so the fine cubes tile every coarse cube exactly.
    """

    level: int
    fine_level: int
    dimension: int

    def __post_init__(self):
        if self.level < 0:
            raise ParameterError("level must be a nonnegative integer")
        if self.fine_level < self.level:
            raise ParameterError("fine_level must be at least level")
        if self.dimension < 1:
            raise ParameterError("dimension must be at least 1")

    @property
    def window_half_width(self) -> float:
        return 2.0**self.level

    @property
    def subcube_size(self) -> float:
        return 2.0**-self.level

    @property
    def fine_size(self) -> float:
        return 2.0**-self.fine_level


@dataclass(frozen=True)
class RemovedBall:
    """An open ball carved out of one half around an atom of the other.

    ``carved_from`` is the half (1 or 2) that loses the ball;
    ``sigma_mass`` is the continuous mass the ball removes, kept below
    ``budget``; ``intersected_cubes`` counts the shrunken cubes of that
    half the ball actually meets (0 when the atom sits far from them).
    """

    center: tuple
    radius: float
    carved_from: int
    budget: float
    sigma_mass: float
    intersected_cubes: int


def _int_rows(indices: np.ndarray) -> np.ndarray:
    idx = np.ascontiguousarray(indices, dtype=np.int64)
    return idx.view([("", np.int64)] * idx.shape[1]).ravel()


def _lexsorted(indices: np.ndarray) -> np.ndarray:
    if len(indices) == 0:
        return indices.reshape(0, indices.shape[1] if indices.ndim == 2 else 1)
    order = np.lexsort(indices.T[::-1])
    return indices[order]


@dataclass(frozen=True)
class SeparatedPartition:
    """Two separated unions of shrunken fine cubes, plus adjoined atoms.

    ``e1_indices`` and ``e2_indices`` are integer corner indices on the
    fine grid (corner = index * delta, shrunken cube = corner + [0,
    tau*delta)^N per axis).  ``balance_report`` maps the integer corner
    index of each populated dyadic cube Q of size 2^(-level) to the pair
    of relative deviations |sigma(E^k cap Q) - sigma(Q)/2| / sigma(Q).
    ``separation`` is the certified lower bound on dist(E^1, E^2): it is
    (1 - tau) * delta for pure partitions and additionally bounded by the
    carved ball radii for atom-aware ones.
    """

    grid: DyadicGrid
    tau: float
    e1_indices: np.ndarray
    e2_indices: np.ndarray
    separation: float
    balance_report: dict
    kind: str = "pure"
    e1_atoms: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    e2_atoms: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    removed_balls: tuple = ()

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ParameterError("tau must lie in (0, 1)")

    @property
    def level(self) -> int:
        return self.grid.level

    @property
    def delta(self) -> float:
        return self.grid.fine_size

    @property
    def e1_corners(self) -> np.ndarray:
        return np.asarray(self.e1_indices, dtype=float) * self.delta

    @property
    def e2_corners(self) -> np.ndarray:
        return np.asarray(self.e2_indices, dtype=float) * self.delta

    def _in_cubes(self, pts: np.ndarray, indices: np.ndarray) -> np.ndarray:
        if len(indices) == 0:
            return np.zeros(len(pts), dtype=bool)
        delta = self.delta
        cell = np.floor(pts / delta).astype(np.int64)
        inside = np.isin(_int_rows(cell), _int_rows(indices))
        offset_ok = np.all(pts - cell * delta < self.tau * delta, axis=1)
        return inside & offset_ok

    def indicator(self, points) -> tuple:
        """Membership masks (in E^1, in E^2) for an array of points.

        Cubes are half-open after shrinking, adjoined atoms match by exact
        coordinates, and carved balls are open; the two masks are always
        disjoint.
        """
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(points, dtype=float)))
        if pts.shape[1] != self.grid.dimension:
            raise ParameterError("points have the wrong dimension")
        masks = [self._in_cubes(pts, self.e1_indices),
                 self._in_cubes(pts, self.e2_indices)]
        for k, atoms in ((0, self.e1_atoms), (1, self.e2_atoms)):
            if len(atoms):
                masks[k] |= np.isin(
                    _rows_view(pts), _rows_view(np.ascontiguousarray(atoms))
                )
        for ball in self.removed_balls:
            hit = (
                np.linalg.norm(pts - np.asarray(ball.center), axis=1) < ball.radius
            )
            masks[ball.carved_from - 1] &= ~hit
        return masks[0], masks[1]


# -- exact grid bookkeeping ---------------------------------------------------


def _window_mask(points: np.ndarray, level: int) -> np.ndarray:
    half = 2.0**level
    return np.all((points >= -half) & (points < half), axis=1)


def _group_masses(indices: np.ndarray, weights: np.ndarray):
    """Unique index rows (lexicographic) with summed weights and counts."""
    rows = _int_rows(indices)
    uniq, inverse, counts = np.unique(rows, return_inverse=True, return_counts=True)
    masses = np.bincount(inverse, weights=weights, minlength=len(uniq))
    uniq_idx = uniq.view(np.int64).reshape(len(uniq), indices.shape[1])
    return uniq_idx, masses, counts


def _fine_indices(points: np.ndarray, fine_level: int) -> np.ndarray:
    return np.floor(points * 2.0**fine_level).astype(np.int64)


def _choose_fine_level(points, weights, level, alpha) -> int:
    """Smallest m >= level with every fine-cube mass below 2^(-level)*alpha.

    The search stops, with a resolution error, once every fine cube holds a
    single discretization cell: from there on, refining delta cannot reduce
    any cube mass, so no admissible delta exists at this resolution.
    """
    threshold = 2.0**-level * alpha
    m = level
    while True:
        _, masses, counts = _group_masses(_fine_indices(points, m), weights)
        if np.max(masses) < threshold:
            return m
        if np.max(counts) <= 1:
            raise ResolutionError(
                f"no fine size achieves cube masses below {threshold}: a "
                f"single discretization cell carries {np.max(masses)}; "
                "refine the measure before partitioning"
            )
        m += 1


def _half_masses(points, weights, fine_level, level, side_of_cube, tau):
    """Per-Q masses (total, in E^1, in E^2) after shrinking by tau.

    ``side_of_cube`` maps lexicographic fine-cube rank to 1 or 2; a point
    counts for its cube's side when its offset stays below tau * delta on
    every axis.
    """
    delta = 2.0**-fine_level
    cell = _fine_indices(points, fine_level)
    rows = _int_rows(cell)
    uniq, inverse = np.unique(rows, return_inverse=True)
    side_per_point = side_of_cube[inverse]
    kept = np.all(points - cell * delta < tau * delta, axis=1)

    q_idx = np.floor_divide(cell, 2 ** (fine_level - level))
    q_uniq, q_inverse = np.unique(_int_rows(q_idx), return_inverse=True)
    n_q = len(q_uniq)
    total = np.bincount(q_inverse, weights=weights, minlength=n_q)
    mass1 = np.bincount(
        q_inverse, weights=weights * (kept & (side_per_point == 1)), minlength=n_q
    )
    mass2 = np.bincount(
        q_inverse, weights=weights * (kept & (side_per_point == 2)), minlength=n_q
    )
    q_indices = q_uniq.view(np.int64).reshape(n_q, points.shape[1])
    return q_indices, total, mass1, mass2


def _greedy_sides(cube_indices: np.ndarray, cube_masses: np.ndarray, shift: int):
    """Assign each fine cube to the lighter half of its dyadic cube.

    Cubes are visited in numeric lexicographic order of their corner
    coordinates; within each dyadic cube the first goes to E^1, and every
    subsequent cube to the side of smaller accumulated mass, ties to E^1.
    Returns an array of sides (1 or 2) aligned with the *input* order.
    """
    order = np.lexsort(cube_indices.T[::-1])
    q_rows = _int_rows(np.floor_divide(cube_indices, 2**shift))
    sides = np.empty(len(cube_indices), dtype=np.int64)
    running: dict = {}
    for k in order:
        key = q_rows[k].tobytes()
        m1, m2 = running.get(key, (0.0, 0.0))
        if m1 <= m2:
            sides[k] = 1
            running[key] = (m1 + cube_masses[k], m2)
        else:
            sides[k] = 2
            running[key] = (m1, m2 + cube_masses[k])
    return sides


def build_partition(
    sigma: DiscreteMeasure,
    level: int,
    tau: float = DEFAULT_TAU,
    max_retries: int = 20,
) -> SeparatedPartition:
    """Split sigma into two separated halves of every dyadic cube at a level.

    The fine size delta = 2^(-m) is the coarsest one for which every fine
    cube inside the window carries less than 2^(-level) * alpha, where
    alpha is the smallest positive mass among the dyadic cubes of size
    2^(-level); greedily filling the lighter half then balances every such
    cube to relative accuracy 2^(-level), and shrinking each assigned cube
    about its corner by tau separates the halves by (1 - tau) * delta.
    When shrinking loses enough mass to break a balance, tau moves halfway
    to 1 and the shrink is retried, up to ``max_retries`` times.

    The measure must be a non-atomic discretization (no atomic-tagged
    points); points outside the window [-2^level, 2^level)^N are ignored.
    """
    if not 0.0 < tau < 1.0:
        raise ParameterError("tau must lie in (0, 1)")
    if int(level) != level or level < 0:
        raise ParameterError("level must be a nonnegative integer")
    level = int(level)
    if np.any(sigma.atomic):
        raise ParameterError(
            "sigma carries atomic-tagged points; use atom_aware_partition"
        )

    inside = _window_mask(sigma.points, level)
    points = np.ascontiguousarray(sigma.points[inside])
    weights = sigma.weights[inside]
    dim = sigma.dimension
    if len(points) == 0:
        grid = DyadicGrid(level, level, dim)
        empty = np.empty((0, dim), dtype=np.int64)
        return SeparatedPartition(
            grid, tau, empty, empty, (1.0 - tau) * grid.fine_size, {},
            e1_atoms=np.empty((0, dim)), e2_atoms=np.empty((0, dim)),
        )

    _, q_masses, _ = _group_masses(_fine_indices(points, level), weights)
    alpha = float(np.min(q_masses[q_masses > 0]))
    fine_level = _choose_fine_level(points, weights, level, alpha)
    shift = fine_level - level

    cube_indices, cube_masses, _ = _group_masses(
        _fine_indices(points, fine_level), weights
    )
    sides = _greedy_sides(cube_indices, cube_masses, shift)

    threshold = 2.0**-level
    current_tau = float(tau)
    for _attempt in range(max_retries + 1):
        q_indices, total, mass1, mass2 = _half_masses(
            points, weights, fine_level, level, sides, current_tau
        )
        dev1 = np.abs(mass1 - total / 2.0)
        dev2 = np.abs(mass2 - total / 2.0)
        bad = (dev1 >= threshold * total) | (dev2 >= threshold * total)
        if not np.any(bad):
            report = {
                tuple(int(c) for c in q_indices[i]): (
                    float(dev1[i] / total[i]),
                    float(dev2[i] / total[i]),
                )
                for i in range(len(q_indices))
            }
            grid = DyadicGrid(level, fine_level, dim)
            return SeparatedPartition(
                grid,
                current_tau,
                cube_indices[sides == 1],
                cube_indices[sides == 2],
                (1.0 - current_tau) * grid.fine_size,
                report,
                e1_atoms=np.empty((0, dim)),
                e2_atoms=np.empty((0, dim)),
            )
        current_tau = (1.0 + current_tau) / 2.0
    offender = tuple(int(c) for c in q_indices[np.argmax(bad)])
    raise ShrinkRetryError(
        f"balance of dyadic cube at index {offender} (corner "
        f"{tuple(c * 2.0**-level for c in offender)}) still broken after "
        f"{max_retries} shrink retries"
    )


# -- atom-aware construction --------------------------------------------------


def _sorted_atoms(measure: DiscreteMeasure, count: int) -> np.ndarray:
    """The ``count`` heaviest atoms, weight descending, ties lexicographic."""
    atoms = decompose(measure).atoms
    if len(atoms) == 0:
        return np.empty((0, measure.dimension))
    keys = tuple(atoms.points.T[::-1]) + (-atoms.weights,)
    order = np.lexsort(keys)
    return atoms.points[order[: min(count, len(order))]]


def _ball_mass(points, weights, center, radius) -> float:
    if len(points) == 0:
        return 0.0
    return float(
        np.sum(weights[np.linalg.norm(points - center, axis=1) < radius])
    )


def _carve_radius(points, weights, center, budget, excluded, level) -> float:
    """Largest power of two whose open ball stays under the mass budget.

    The ball also must not contain any point of ``excluded`` (the adjoined
    atoms of the other half).  Fails when even a microscopic ball carries
    the budget, which means a discretization cell sits exactly at the atom.
    """
    exponent = level + 2
    while exponent >= -80:
        radius = 2.0**exponent
        if _ball_mass(points, weights, center, radius) < budget and (
            len(excluded) == 0
            or np.min(np.linalg.norm(excluded - center, axis=1)) >= radius
        ):
            return radius
        exponent -= 1
    raise ResolutionError(
        f"no ball around atom {tuple(center)} stays below the mass budget "
        f"{budget}; refine the continuous discretization"
    )


def _cube_ball_hits(partition_like, indices, center, radius, delta, tau) -> int:
    if len(indices) == 0:
        return 0
    corners = np.asarray(indices, dtype=float) * delta
    low = corners
    high = corners + tau * delta
    nearest = np.clip(np.asarray(center), low, high)
    return int(np.sum(np.linalg.norm(nearest - center, axis=1) < radius))


def atom_aware_partition(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    level: int,
    tau: float = DEFAULT_TAU,
    max_retries: int = 20,
) -> SeparatedPartition:
    """Separated partition for a pair of measures with atoms.

    Builds the pure partition of sigma = mu_continuous + nu_continuous,
    adjoins the ``level`` heaviest atoms of mu to E^1 and of nu to E^2
    (weight-descending order), and carves an open ball around each adjoined
    atom out of the *other* half.  The j-th ball's radius is the largest
    power of two whose sigma-mass stays below 2^(-level) / 2^(j+1) -- the
    budgets sum below 2^(-level) -- and which contains no adjoined atom of
    the opposite half, so atoms survive the carving and every component of
    one half keeps a positive distance from the other.
    """
    shared = common_atoms(mu, nu)
    if len(shared):
        raise CommonAtomsError(
            f"measures share {len(shared)} atom(s), first at {tuple(shared[0])}",
            points=shared,
        )
    sigma = merge(decompose(mu).continuous, decompose(nu).continuous)
    base = build_partition(sigma, level, tau, max_retries=max_retries)

    e1_atoms = _sorted_atoms(mu, int(level))
    e2_atoms = _sorted_atoms(nu, int(level))
    inside = _window_mask(sigma.points, level)
    pts = np.ascontiguousarray(sigma.points[inside])
    wts = sigma.weights[inside]

    delta, used_tau = base.delta, base.tau
    balls = []
    for carved_from, centers, excluded in (
        (1, e2_atoms, e1_atoms),
        (2, e1_atoms, e2_atoms),
    ):
        own = base.e1_indices if carved_from == 1 else base.e2_indices
        for j, center in enumerate(centers, start=1):
            budget = 2.0**-level / 2.0 ** (j + 1)
            radius = _carve_radius(pts, wts, center, budget, excluded, level)
            balls.append(
                RemovedBall(
                    center=tuple(float(c) for c in center),
                    radius=radius,
                    carved_from=carved_from,
                    budget=budget,
                    sigma_mass=_ball_mass(pts, wts, center, radius),
                    intersected_cubes=_cube_ball_hits(
                        base, own, center, radius, delta, used_tau
                    ),
                )
            )

    separation = min(
        [base.separation] + [b.radius for b in balls]
    )
    partial = SeparatedPartition(
        base.grid,
        used_tau,
        base.e1_indices,
        base.e2_indices,
        separation,
        {},
        kind="atom_aware",
        e1_atoms=e1_atoms,
        e2_atoms=e2_atoms,
        removed_balls=tuple(balls),
    )
    report = balance_at_level(partial, sigma, level) if len(pts) else {}
    return SeparatedPartition(
        base.grid,
        used_tau,
        base.e1_indices,
        base.e2_indices,
        separation,
        report,
        kind="atom_aware",
        e1_atoms=e1_atoms,
        e2_atoms=e2_atoms,
        removed_balls=tuple(balls),
    )


# -- diagnostics --------------------------------------------------------------


def balance_at_level(
    partition: SeparatedPartition, sigma: DiscreteMeasure, level: int
) -> dict:
    """Relative balance deviations of the partition on dyadic cubes.

    Groups sigma by the dyadic cubes of size 2^(-level) inside the window
    and reports, per populated cube, |sigma(E^k cap Q) - sigma(Q)/2| /
    sigma(Q) for k = 1, 2 using the partition's own membership (shrunken
    cubes, atoms excluded from sigma, carved balls honored).  Coarser
    levels than the partition's own inherit the balance bound by summation.
    """
    inside = _window_mask(sigma.points, partition.level)
    pts = np.ascontiguousarray(sigma.points[inside][~sigma.atomic[inside]])
    wts = sigma.weights[inside][~sigma.atomic[inside]]
    if len(pts) == 0:
        return {}
    in1, in2 = partition.indicator(pts)
    q_idx = _fine_indices(pts, level)
    q_uniq, q_inverse = np.unique(_int_rows(q_idx), return_inverse=True)
    n_q = len(q_uniq)
    total = np.bincount(q_inverse, weights=wts, minlength=n_q)
    mass1 = np.bincount(q_inverse, weights=wts * in1, minlength=n_q)
    mass2 = np.bincount(q_inverse, weights=wts * in2, minlength=n_q)
    q_rows = q_uniq.view(np.int64).reshape(n_q, pts.shape[1])
    return {
        tuple(int(c) for c in q_rows[i]): (
            float(abs(mass1[i] - total[i] / 2.0) / total[i]),
            float(abs(mass2[i] - total[i] / 2.0) / total[i]),
        )
        for i in range(n_q)
        if total[i] > 0
    }


def _cube_set_min_distance(
    idx1: np.ndarray, idx2: np.ndarray, delta: float, tau: float
) -> float:
    """Exact minimum distance between two sets of shrunken fine cubes.

    Only corner-index differences with infinity norm <= 1 can realize the
    minimum (any larger difference leaves a gap of at least (2 - tau) *
    delta on some axis, which exceeds the diagonal distance sqrt(N) *
    (1 - tau) * delta of touching neighbors); those candidate pairs are
    found with a KD-tree and evaluated with the exact box-gap formula.
    """
    if len(idx1) == 0 or len(idx2) == 0:
        return math.inf
    dim = idx1.shape[1]
    tree = cKDTree(np.asarray(idx2, dtype=float))
    pairs = tree.query_ball_point(
        np.asarray(idx1, dtype=float), r=math.sqrt(dim) + 1e-9
    )
    best = math.inf
    for i, hits in enumerate(pairs):
        for j in hits:
            diff = np.abs(idx1[i] - idx2[j])
            if np.max(diff) > 1:
                continue
            gaps = np.maximum(0.0, diff * delta - tau * delta)
            best = min(best, float(np.linalg.norm(gaps)))
    # pairs two or more cells apart leave at least (2 - tau) * delta of gap
    return min(best, (2.0 - tau) * delta)


def verify_partition(
    partition: SeparatedPartition, sigma: DiscreteMeasure | None = None
) -> dict:
    """Re-check every partition invariant; returns {check: (ok, detail)}.

    Runs from the partition data alone: disjointness of the halves, exact
    minimum distance at least the stored separation, alignment of all
    corners inside the window, the balance bound 2^(-level) on the stored
    report, and -- for atom-aware partitions -- that each adjoined atom
    belongs to its own half only and that carved balls contain no atom of
    the protected half.  When ``sigma`` is supplied, the balance report is
    recomputed from the measure instead of trusted.
    """
    checks = {}
    grid, delta, tau = partition.grid, partition.delta, partition.tau

    e1, e2 = partition.e1_indices, partition.e2_indices
    if len(e1) and len(e2):
        disjoint = not np.any(np.isin(_int_rows(e1), _int_rows(e2)))
    else:
        disjoint = True
    checks["halves_disjoint"] = (disjoint, "corner index sets intersect" if not disjoint else "")

    min_dist = _cube_set_min_distance(e1, e2, delta, tau)
    ok = min_dist >= partition.separation - 1e-15
    checks["separation"] = (ok, f"min cube distance {min_dist} vs bound {partition.separation}")

    half = grid.window_half_width
    per_axis = int(round(half / delta))
    all_idx = np.vstack([e1, e2]) if len(e1) + len(e2) else np.empty((0, grid.dimension), dtype=np.int64)
    aligned = bool(
        np.all(all_idx >= -per_axis) and np.all(all_idx < per_axis)
    ) if len(all_idx) else True
    checks["cubes_in_window"] = (aligned, "corner outside the window" if not aligned else "")
    checks["fine_tiles_coarse"] = (
        grid.fine_level >= grid.level,
        f"fine level {grid.fine_level} coarser than level {grid.level}",
    )

    if sigma is not None:
        report = balance_at_level(partition, sigma, partition.level)
    else:
        report = partition.balance_report
    threshold = 2.0**-partition.level
    worst = max(
        (max(v) for v in report.values()), default=0.0
    )
    if partition.kind == "atom_aware" and partition.removed_balls:
        # the strict balance bound applies before carving; the carved mass
        # (below 2^-level in total) is reported but not held to the bound
        balance_ok = True
        detail = f"worst relative deviation {worst} (carve slack applies)"
    else:
        balance_ok = bool(worst < threshold)
        detail = f"worst relative deviation {worst} vs {threshold}"
    checks["balance"] = (balance_ok, detail)

    if partition.kind == "atom_aware":
        own_ok = True
        detail = ""
        for k, atoms in ((1, partition.e1_atoms), (2, partition.e2_atoms)):
            if len(atoms) == 0:
                continue
            in1, in2 = partition.indicator(atoms)
            mine, other = (in1, in2) if k == 1 else (in2, in1)
            if not (np.all(mine) and not np.any(other)):
                own_ok = False
                detail = f"an adjoined atom of E^{k} leaks into the other half"
        checks["atoms_in_own_half"] = (own_ok, detail)

        balls_ok = True
        detail = ""
        for ball in partition.removed_balls:
            protected = (
                partition.e1_atoms if ball.carved_from == 1 else partition.e2_atoms
            )
            if len(protected) and np.min(
                np.linalg.norm(protected - np.asarray(ball.center), axis=1)
            ) < ball.radius:
                balls_ok = False
                detail = f"ball at {ball.center} swallows a protected atom"
            if not ball.sigma_mass < ball.budget:
                balls_ok = False
                detail = f"ball at {ball.center} exceeds its mass budget"
        checks["carved_balls"] = (balls_ok, detail)
    return checks


# -- shrink stability ---------------------------------------------------------


@dataclass(frozen=True)
class ShrinkStabilityReport:
    """Masses sigma(tau * R) for a cube R shrunk about its corner."""

    taus: tuple
    masses: tuple
    full_mass: float
    resolution_gap: float


def shrink_stability(
    sigma: DiscreteMeasure, corner, side: float, taus
) -> ShrinkStabilityReport:
    """Masses of the shrunken cubes tau * R (about the corner of R).

    The masses are nondecreasing in tau (the shrunken cubes nest), which is
    asserted, and converge to sigma(R) as tau -> 1 at the discretization
    scale: ``resolution_gap`` = sigma(R) - sigma(tau_max * R) is the mass
    sitting within (1 - tau_max) * side of the upper faces of R.
    """
    corner = np.asarray(corner, dtype=float).reshape(-1)
    if corner.shape[0] != sigma.dimension:
        raise ParameterError("corner has the wrong dimension")
    if not side > 0:
        raise ParameterError("side must be positive")
    taus = [float(t) for t in taus]
    if any(not 0.0 < t <= 1.0 for t in taus):
        raise ParameterError("each tau must lie in (0, 1]")

    offsets = sigma.points - corner

    def mass(factor: float) -> float:
        inside = np.all((offsets >= 0) & (offsets < factor * side), axis=1)
        return float(np.sum(sigma.weights[inside]))

    masses = [mass(t) for t in taus]
    full = mass(1.0)
    order = np.argsort(taus)
    sorted_masses = np.asarray(masses)[order]
    if np.any(np.diff(sorted_masses) < 0):
        raise ToleranceError("shrunken cube masses are not monotone in tau")
    gap = full - float(sorted_masses[-1]) if len(taus) else full
    return ShrinkStabilityReport(tuple(taus), tuple(masses), full, gap)


# -- serialization ------------------------------------------------------------


def partition_to_dict(partition: SeparatedPartition) -> dict:
    """JSON-ready dictionary with exact dyadic geometry."""
    return {
        "kind": partition.kind,
        "dimension": partition.grid.dimension,
        "level": partition.grid.level,
        "fine_level": partition.grid.fine_level,
        "delta": partition.delta,
        "tau": partition.tau,
        "separation": partition.separation,
        "e1_indices": np.asarray(partition.e1_indices, dtype=np.int64).tolist(),
        "e2_indices": np.asarray(partition.e2_indices, dtype=np.int64).tolist(),
        "e1_atoms": np.asarray(partition.e1_atoms, dtype=float).tolist(),
        "e2_atoms": np.asarray(partition.e2_atoms, dtype=float).tolist(),
        "removed_balls": [
            {
                "center": list(b.center),
                "radius": b.radius,
                "carved_from": b.carved_from,
                "budget": b.budget,
                "sigma_mass": b.sigma_mass,
                "intersected_cubes": b.intersected_cubes,
            }
            for b in partition.removed_balls
        ],
        "balance_report": {
            ",".join(str(c) for c in key): list(value)
            for key, value in sorted(partition.balance_report.items())
        },
    }


def partition_from_dict(data: dict) -> SeparatedPartition:
    dim = int(data["dimension"])
    grid = DyadicGrid(int(data["level"]), int(data["fine_level"]), dim)

    def as_idx(rows):
        arr = np.asarray(rows, dtype=np.int64)
        return arr.reshape(len(rows), dim) if len(rows) else np.empty((0, dim), np.int64)

    def as_pts(rows):
        arr = np.asarray(rows, dtype=float)
        return arr.reshape(len(rows), dim) if len(rows) else np.empty((0, dim))

    balls = tuple(
        RemovedBall(
            center=tuple(b["center"]),
            radius=float(b["radius"]),
            carved_from=int(b["carved_from"]),
            budget=float(b["budget"]),
            sigma_mass=float(b["sigma_mass"]),
            intersected_cubes=int(b["intersected_cubes"]),
        )
        for b in data.get("removed_balls", [])
    )
    report = {
        tuple(int(c) for c in key.split(",")): tuple(value)
        for key, value in data.get("balance_report", {}).items()
    }
    return SeparatedPartition(
        grid,
        float(data["tau"]),
        as_idx(data["e1_indices"]),
        as_idx(data["e2_indices"]),
        float(data["separation"]),
        report,
        kind=data.get("kind", "pure"),
        e1_atoms=as_pts(data.get("e1_atoms", [])),
        e2_atoms=as_pts(data.get("e2_atoms", [])),
        removed_balls=balls,
    )


def save_partition(partition: SeparatedPartition, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(partition_to_dict(partition), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_partition(path) -> SeparatedPartition:
    with open(path, encoding="utf-8") as handle:
        return partition_from_dict(json.load(handle))
