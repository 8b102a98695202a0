"""Two-weight ball-growth constants and the blow-up experiment tying them
to restricted operator norms.

The scanned quantity for a measure pair (mu, nu) at exponent p and order
alpha is

    value(c, r) = (2 r)^(-alpha) * mu(S)^(1/p') * nu(S)^(1/p),

where the scanned set S is the open Euclidean ball of diameter r centered
at c, and p' is the conjugate exponent.  The scan parameter r plays the
role of the ball diameter; the prefactor uses 2r throughout.  This
convention is stated in every report (``BALL_CONVENTION``) because the
prefactor normalization is the one ambiguity that moves the reported
numbers: it rescales every constant by the same power of two, so suprema,
witnesses, scaling laws and p-independence are unaffected by it.

The blow-up experiment takes a kernel factored as K(s, t) = A(|x|) B(x)
with x = t - s, where B is homogeneous of order d and bounded away from
zero on the unit sphere, and A(r) >= r^(-d-alpha).  Multiplying entrywise
by m(x/eps) with m(x) = B(x) w(|x|) (w a smooth window equal to 1 on
[0, 2] and vanishing beyond 3) produces a kernel whose entries are real
and at least C' eps^(-alpha) on every pair at distance <= 2 eps, with
C' = C^2 2^(d-alpha) and C the sphere infimum of |B|.  Pairing indicators
of a ball against that kernel chains the ball-growth value to a Schur
bound times a restricted-norm estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    ParameterError,
    ProfileBoundError,
    ToleranceError,
    UsageError,
)
from .forms import (
    NormEstimate,
    dual_exponent,
    lp_norm,
    operator_norm_p,
    operator_norm_p2,
    restricted_norm_heuristic,
)
from .kernels import ConvolutionProfile, KernelSpec, materialize
from .measure import DiscreteMeasure, common_atoms
from .mollifiers import (
    smooth_step,
    vector_multiplier_wiener_bound,
    wiener_norm,
)
from .truncation import _sphere_directions

__all__ = [
    "BALL_CONVENTION",
    "MuckenhouptReport",
    "ball_value",
    "ap_alpha_constant",
    "HomogeneousWindowMultiplier",
    "NecessityBallCheck",
    "NecessityReport",
    "necessity_experiment",
    "HomogeneityReport",
    "homogeneity_check",
]

BALL_CONVENTION = (
    "value(c, r) = (2r)^(-alpha) * mu(S)^(1/p') * nu(S)^(1/p) with "
    "S = {x : |x - c| < r/2}, the open ball of diameter r"
)

_RADIUS_RATIO = np.sqrt(2.0)


# -- ball-growth constant ---------------------------------------------------


@dataclass(frozen=True)
class MuckenhouptReport:
    """Supremum of the scanned ball values and the ball attaining it.

    ``witness_ball`` is (center, r) with r the scan parameter (the ball
    diameter); re-evaluating it through :func:`ball_value` reproduces
    ``constant`` to relative 1e-12.  ``scan`` records how the center and
    radius grids were chosen, and ``convention`` restates the prefactor
    normalization so the number is self-describing.
    """

    constant: float
    witness_ball: tuple[tuple[float, ...], float]
    scan: dict
    p: float
    alpha: float
    convention: str = BALL_CONVENTION


def ball_value(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    center,
    r: float,
    p: float,
    alpha: float,
) -> float:
    """Evaluate one scanned ball: (2r)^(-alpha) mu(S)^(1/p') nu(S)^(1/p)."""
    q = dual_exponent(p)
    if not r > 0:
        raise ParameterError("scan parameter r must be positive")
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    m = mu.mass_in_ball(center, r / 2.0)
    n = nu.mass_in_ball(center, r / 2.0)
    return float((2.0 * r) ** (-alpha) * m ** (1.0 / q) * n ** (1.0 / p))


def _combined_support(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    pts = [m.points for m in (mu, nu) if len(m)]
    if not pts:
        raise UsageError("cannot scan balls over empty supports")
    return np.unique(np.vstack(pts), axis=0)


def _default_centers(support: np.ndarray) -> np.ndarray:
    """Support points plus midpoints of near-pairs (within twice the
    minimum pairwise distance)."""
    if len(support) < 2:
        return support
    tree = cKDTree(support)
    d_min = float(np.min(tree.query(support, k=2)[0][:, 1]))
    pairs = sorted(tree.query_pairs(2.0 * d_min * (1.0 + 1e-12)))
    if len(pairs) > 4 * len(support):
        pairs = pairs[: 4 * len(support)]
    if not pairs:
        return support
    idx = np.asarray(pairs, dtype=int)
    midpoints = 0.5 * (support[idx[:, 0]] + support[idx[:, 1]])
    return np.vstack([support, midpoints])


def _default_radii(support: np.ndarray) -> np.ndarray:
    """Geometric grid, ratio sqrt(2), from the minimum pairwise distance up
    to twice the bounding-box diagonal (so a covering ball is included)."""
    if len(support) < 2:
        raise UsageError(
            "fewer than two distinct support points: provide explicit radii"
        )
    tree = cKDTree(support)
    d_min = float(np.min(tree.query(support, k=2)[0][:, 1]))
    diag = float(np.linalg.norm(support.max(axis=0) - support.min(axis=0)))
    top = 2.0 * diag
    radii = [d_min]
    while radii[-1] < top:
        radii.append(radii[-1] * _RADIUS_RATIO)
    return np.asarray(radii)


def ap_alpha_constant(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: float,
    alpha: float,
    centers=None,
    radii=None,
) -> MuckenhouptReport:
    """Maximum of :func:`ball_value` over a finite scan of (center, r).

    Defaults anchor the centers at the support points of mu and nu plus
    midpoints of near-pairs, and place the radii on a geometric grid from
    the minimum pairwise support distance up to a covering scale.  The scan
    order (radii ascending, centers in listed order) breaks ties
    deterministically.  An explicitly empty grid raises ``UsageError``.
    """
    q = dual_exponent(p)
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if len(mu) and len(nu) and mu.dimension != nu.dimension:
        raise ParameterError("measures must share a dimension")

    support = _combined_support(mu, nu)
    if centers is None:
        centers_arr = _default_centers(support)
        centers_kind = "default:support+near-pair-midpoints"
    else:
        centers_arr = np.atleast_2d(np.asarray(centers, dtype=float))
        centers_kind = "explicit"
    if radii is None:
        radii_arr = _default_radii(support)
        radii_kind = "default:geometric(sqrt2)"
    else:
        radii_arr = np.sort(np.asarray(radii, dtype=float).ravel())
        radii_kind = "explicit"
    if centers_arr.size == 0 or radii_arr.size == 0:
        raise UsageError("empty scan: need at least one center and one radius")
    if not np.all(radii_arr > 0):
        raise ParameterError("all scanned radii must be positive")
    if centers_arr.shape[1] != support.shape[1]:
        raise ParameterError("centers do not match the measure dimension")

    best_value = -1.0
    best = (0, 0)  # (center index, radius index)
    chunk = max(1, int(4e7 / max(len(mu) + len(nu), 1)))
    for start in range(0, len(centers_arr), chunk):
        block = centers_arr[start : start + chunk]
        dist_mu = (
            np.linalg.norm(block[:, None, :] - mu.points[None, :, :], axis=-1)
            if len(mu)
            else np.zeros((len(block), 0))
        )
        dist_nu = (
            np.linalg.norm(block[:, None, :] - nu.points[None, :, :], axis=-1)
            if len(nu)
            else np.zeros((len(block), 0))
        )
        for k, r in enumerate(radii_arr):
            rho = r / 2.0
            m = (dist_mu < rho) @ mu.weights if len(mu) else np.zeros(len(block))
            n = (dist_nu < rho) @ nu.weights if len(nu) else np.zeros(len(block))
            values = (2.0 * r) ** (-alpha) * m ** (1.0 / q) * n ** (1.0 / p)
            j = int(np.argmax(values))
            if values[j] > best_value:
                best_value = float(values[j])
                best = (start + j, k)

    center = centers_arr[best[0]]
    r = float(radii_arr[best[1]])
    constant = ball_value(mu, nu, center, r, p, alpha)
    if abs(constant - best_value) > 1e-12 * max(abs(constant), 1e-300):
        raise ToleranceError(
            f"witness re-evaluation {constant} disagrees with the scan "
            f"maximum {best_value}"
        )
    scan = {
        "centers": {"kind": centers_kind, "count": int(len(centers_arr))},
        "radii": {
            "kind": radii_kind,
            "values": [float(x) for x in radii_arr],
        },
    }
    return MuckenhouptReport(
        constant=constant,
        witness_ball=(tuple(float(x) for x in center), r),
        scan=scan,
        p=float(p),
        alpha=float(alpha),
    )


# -- blow-up experiment -----------------------------------------------------


def _window(u):
    """Smooth window: 1 on [0, 2], strictly decreasing on (2, 3), 0 beyond."""
    return smooth_step(3.0 - np.asarray(u, dtype=float))


@dataclass(frozen=True)
class HomogeneousWindowMultiplier:
    """Entrywise factor m((t - s)/eps) with m(x) = B(x) * window(|x|).

    B is the homogeneous lift of the kernel's spherical factor, so pairing
    this multiplier with the kernel itself contracts to the real scalar
    window(|x|/eps) * eps^(-d) * |B(x)|^2 * A(|x|), nonnegative everywhere
    and bounded below on pairs at distance <= 2 eps.
    """

    profile: ConvolutionProfile
    eps: float
    vanishes_at_zero: bool = True

    def components(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        lifted = np.asarray(self.profile.lifted_spherical(x))
        w = _window(r)
        if lifted.ndim > r.ndim:
            return lifted * w[..., None]
        return lifted * w

    def __call__(self, s, t):
        x = (np.asarray(t, dtype=float) - np.asarray(s, dtype=float)) / self.eps
        return self.components(x)


_WIENER_GRIDS = {1: (48.0, 8192), 2: (24.0, 1024), 3: (12.0, 128)}


def _multiplier_schur_bound(profile: ConvolutionProfile, dimension: int):
    """Certified Schur bound for the scale-1 window multiplier; the bound is
    scale invariant, so it covers every eps at once."""
    base = HomogeneousWindowMultiplier(profile, 1.0)
    probe = np.asarray(base.components(np.ones((1, dimension))))
    half_width, points = _WIENER_GRIDS.get(dimension, (8.0, 64))
    if probe.ndim == 2:
        bound = vector_multiplier_wiener_bound(
            base.components, dimension, probe.shape[1], half_width, points
        )
        return bound.bound, bound.error_estimate
    value, err = wiener_norm(base.components, dimension, half_width, points)
    return value, err


@dataclass(frozen=True)
class NecessityBallCheck:
    """One scanned ball at one scale in the blow-up experiment.

    ``bound_target`` is C' eps^(-alpha).  ``pairing`` is the form of the
    windowed kernel against in-ball indicators with the right side
    dual-normalized; ``chain_lhs`` is the exact lower bound for it implied
    by the pointwise entry bound (the coincident-pair deficit is
    subtracted because the multiplier vanishes on the diagonal);
    ``image_norm`` is the weighted p-norm of the mapped indicator; and
    ``quotient`` = image_norm / mu(ball)^(1/p) is a lower bound for the
    windowed operator norm, compared against ``chain_rhs`` = 2 * (Schur
    bound) * (restricted-norm estimate).  Balls with an empty side are
    recorded with ``checked`` False and no numbers.
    """

    center: tuple[float, ...]
    eps: float
    mu_mass: float
    nu_mass: float
    checked: bool
    pairs_checked: int = 0
    min_entry: float | None = None
    bound_target: float | None = None
    pointwise_ok: bool = True
    pairing: float | None = None
    chain_lhs: float | None = None
    image_norm: float | None = None
    quotient: float | None = None
    chain_rhs: float | None = None
    chain_ok: bool = True


@dataclass(frozen=True)
class NecessityReport:
    kernel: str
    dimension: int
    degree: float
    alpha: float
    p: float
    sphere_infimum: float
    c_prime: float
    schur_bound: float
    schur_bound_error: float
    profile_check: dict
    restricted: NormEstimate
    growth: MuckenhouptReport
    witness_to_restricted_ratio: float
    eps_list: tuple[float, ...]
    operator_norms: tuple[tuple[float, float], ...]
    balls: tuple[NecessityBallCheck, ...]

    @property
    def pointwise_ok(self) -> bool:
        return all(b.pointwise_ok for b in self.balls)

    @property
    def chain_ok(self) -> bool:
        return all(b.chain_ok for b in self.balls)


def _check_radial_lower_bound(
    profile: ConvolutionProfile, d: float, alpha: float, samples: int
) -> dict:
    rs = np.geomspace(1e-3, 1e3, samples)
    values = np.asarray(profile.lifted_radial(rs), dtype=float)
    target = rs ** (-(d + alpha))
    ratio = values / target
    worst = int(np.argmin(ratio))
    if not ratio[worst] >= 1.0 - 1e-9:
        raise ProfileBoundError(
            f"radial factor falls below r^-(d+alpha) at r = {rs[worst]:g}: "
            f"ratio {ratio[worst]:.6g}"
        )
    return {"samples": int(samples), "min_ratio": float(ratio[worst])}


def _central_then_spread(points: np.ndarray, count: int) -> np.ndarray:
    """The minimax-central point, then a farthest-point traversal."""
    pts = points
    if len(pts) > 2048:
        pts = pts[:: len(pts) // 2048 + 1]
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    chosen = [int(np.argmin(dist.max(axis=1)))]
    while len(chosen) < min(count, len(pts)):
        nearest = dist[:, chosen].min(axis=1)
        nxt = int(np.argmax(nearest))
        if nearest[nxt] == 0.0:
            break
        chosen.append(nxt)
    return pts[chosen]


def _coincident_index_pairs(
    mu: DiscreteMeasure, nu: DiscreteMeasure
) -> tuple[np.ndarray, np.ndarray]:
    """Indices (into nu, into mu) of exactly coincident support points."""
    if not len(mu) or not len(nu):
        empty = np.empty(0, dtype=int)
        return empty, empty
    mu_map = {p.tobytes(): j for j, p in enumerate(np.ascontiguousarray(mu.points))}
    rows, cols = [], []
    for i, p in enumerate(np.ascontiguousarray(nu.points)):
        j = mu_map.get(p.tobytes())
        if j is not None:
            rows.append(i)
            cols.append(j)
    return np.asarray(rows, dtype=int), np.asarray(cols, dtype=int)


def necessity_experiment(
    kernel: KernelSpec,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    p: float,
    eps_list,
    alpha: float | None = None,
    centers=None,
    pairs_per_ball: int = 1000,
    sphere_samples: int = 4096,
    profile_samples: int = 256,
    max_balls: int = 4,
    heuristic_trials: int = 24,
    seed: int = 0,
) -> NecessityReport:
    """Verify the pointwise blow-up of the windowed kernel and chain it to
    a Schur bound times a restricted-norm estimate.

    For each scale eps and each scanned ball of radius eps the experiment
    (a) materializes the kernel against the window multiplier at scale eps,
    (b) checks sampled in-ball entries against C' eps^(-alpha), and
    (c) pairs in-ball indicators to confirm, link by link, that the
    radius-based growth value is controlled by 2 * (Schur bound) *
    (restricted estimate).  The ratio of the scanned growth constant to the
    restricted estimate is reported for cross-scale comparisons.
    """
    if kernel.profile is None:
        raise ParameterError(
            "kernel must expose a radial/spherical factorization"
        )
    profile = kernel.profile
    d = float(profile.degree)
    alpha = float(kernel.order if alpha is None else alpha)
    if alpha < d:
        raise ParameterError(f"alpha = {alpha} must be at least the degree {d}")
    dual_exponent(p)
    eps_arr = np.asarray(list(eps_list), dtype=float)
    if eps_arr.size == 0 or not np.all(eps_arr > 0):
        raise ParameterError("eps_list must contain positive scales")
    shared = common_atoms(mu, nu)
    if len(shared):
        from .errors import CommonAtomsError

        raise CommonAtomsError(
            f"measures share {len(shared)} atom(s); the blow-up argument "
            "requires atom-free overlap",
            points=shared,
        )

    profile_check = _check_radial_lower_bound(profile, d, alpha, profile_samples)

    directions = _sphere_directions(kernel.dimension, sphere_samples)
    sph = np.asarray(profile.spherical(directions))
    if sph.ndim == 1:
        sph = sph[:, None]
    sphere_infimum = float(np.min(np.linalg.norm(sph, axis=1)))
    if sphere_infimum <= 1e-12:
        raise ProfileBoundError(
            "spherical factor is not bounded below on the unit sphere"
        )
    c_prime = sphere_infimum**2 * 2.0 ** (d - alpha)

    schur, schur_err = _multiplier_schur_bound(profile, kernel.dimension)

    km_raw = materialize(kernel, mu, nu, diagonal_policy=0.0)
    restricted = restricted_norm_heuristic(
        km_raw, p=p, trials=heuristic_trials, seed=seed
    )
    growth = ap_alpha_constant(mu, nu, p, alpha)
    ratio = (
        growth.constant / restricted.value
        if restricted.value > 0
        else float("inf")
    )
    chain_rhs = 2.0 * schur * restricted.value

    if centers is None:
        centers_arr = _central_then_spread(_combined_support(mu, nu), max_balls)
    else:
        centers_arr = np.atleast_2d(np.asarray(centers, dtype=float))

    rng = np.random.default_rng(seed)
    q = dual_exponent(p)
    co_rows, co_cols = _coincident_index_pairs(mu, nu)

    balls: list[NecessityBallCheck] = []
    operator_norms: list[tuple[float, float]] = []
    for eps in eps_arr:
        multiplier = HomogeneousWindowMultiplier(profile, float(eps))
        km_eps = materialize(kernel, mu, nu, multiplier=multiplier)
        entries = np.asarray(km_eps.entries)
        if np.iscomplexobj(entries):
            if np.max(np.abs(entries.imag)) > 1e-9 * max(
                np.max(np.abs(entries.real)), 1e-300
            ):
                raise ToleranceError(
                    "windowed kernel entries are not numerically real"
                )
            entries = entries.real
        if p == 2.0:
            opnorm = operator_norm_p2(km_eps).value
        else:
            opnorm = operator_norm_p(km_eps, p, seeds=8, iterations=40, seed=seed).value
        operator_norms.append((float(eps), float(opnorm)))

        for center in centers_arr:
            in_mu = np.linalg.norm(mu.points - center, axis=1) < eps
            in_nu = np.linalg.norm(nu.points - center, axis=1) < eps
            mu_mass = float(np.sum(mu.weights[in_mu]))
            nu_mass = float(np.sum(nu.weights[in_nu]))
            rows = np.flatnonzero(in_nu)
            cols = np.flatnonzero(in_mu)
            if not len(rows) or not len(cols):
                balls.append(
                    NecessityBallCheck(
                        center=tuple(float(x) for x in center),
                        eps=float(eps),
                        mu_mass=mu_mass,
                        nu_mass=nu_mass,
                        checked=False,
                    )
                )
                continue

            pair_rows = np.repeat(rows, len(cols))
            pair_cols = np.tile(cols, len(rows))
            distinct = np.any(
                nu.points[pair_rows] != mu.points[pair_cols], axis=1
            )
            pair_rows, pair_cols = pair_rows[distinct], pair_cols[distinct]
            if len(pair_rows) > pairs_per_ball:
                pick = rng.choice(len(pair_rows), size=pairs_per_ball, replace=False)
                pair_rows, pair_cols = pair_rows[pick], pair_cols[pick]
            target = float(c_prime * eps ** (-alpha))
            if len(pair_rows):
                sampled = entries[pair_rows, pair_cols]
                min_entry = float(np.min(sampled))
                pointwise_ok = bool(min_entry >= target * (1.0 - 1e-9))
            else:
                min_entry = None
                pointwise_ok = True

            f = in_mu.astype(float)
            image = entries @ (f * mu.weights)
            h_scale = nu_mass ** (1.0 / q)
            pairing = float(np.sum(image[rows] * nu.weights[rows]) / h_scale)
            deficit_mask = in_nu[co_rows] & in_mu[co_cols]
            deficit = float(
                np.sum(nu.weights[co_rows[deficit_mask]] * mu.weights[co_cols[deficit_mask]])
            )
            chain_lhs = float(
                c_prime * eps ** (-alpha) * (mu_mass * nu_mass - deficit) / h_scale
            )
            image_norm = lp_norm(image, nu.weights, p)
            quotient = float(image_norm / mu_mass ** (1.0 / p))
            chain_ok = bool(
                pairing >= chain_lhs * (1.0 - 1e-9)
                and pairing <= image_norm * (1.0 + 1e-9)
                and quotient <= chain_rhs * (1.0 + 1e-6)
            )
            balls.append(
                NecessityBallCheck(
                    center=tuple(float(x) for x in center),
                    eps=float(eps),
                    mu_mass=mu_mass,
                    nu_mass=nu_mass,
                    checked=True,
                    pairs_checked=int(len(pair_rows)),
                    min_entry=min_entry,
                    bound_target=target,
                    pointwise_ok=pointwise_ok,
                    pairing=pairing,
                    chain_lhs=chain_lhs,
                    image_norm=image_norm,
                    quotient=quotient,
                    chain_rhs=float(chain_rhs),
                    chain_ok=chain_ok,
                )
            )

    return NecessityReport(
        kernel=kernel.name,
        dimension=int(kernel.dimension),
        degree=d,
        alpha=alpha,
        p=float(p),
        sphere_infimum=sphere_infimum,
        c_prime=float(c_prime),
        schur_bound=float(schur),
        schur_bound_error=float(schur_err),
        profile_check=profile_check,
        restricted=restricted,
        growth=growth,
        witness_to_restricted_ratio=float(ratio),
        eps_list=tuple(float(e) for e in eps_arr),
        operator_norms=tuple(operator_norms),
        balls=tuple(balls),
    )


# -- homogeneity ------------------------------------------------------------


@dataclass(frozen=True)
class HomogeneityReport:
    order: float
    samples: int
    max_deviation: float
    worst_scale: float


def homogeneity_check(
    spherical_map,
    order: float,
    samples: int = 256,
    dimension: int = 1,
    seed: int = 0,
) -> HomogeneityReport:
    """Largest relative deviation of B(c x) from c^order B(x) over random
    scales c in [0.1, 10] and directions x with |x| in [0.5, 2]."""
    if samples < 1:
        raise ParameterError("need at least one sample")
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((samples, dimension))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    x = raw / norms * (0.5 + 1.5 * rng.random((samples, 1)))
    c = 10.0 ** rng.uniform(-1.0, 1.0, samples)

    b0 = np.asarray(spherical_map(x))
    b1 = np.asarray(spherical_map(c[:, None] * x))
    if b0.ndim == 1:
        b0 = b0[:, None]
        b1 = b1[:, None]
    expected = (c**order)[:, None] * b0
    num = np.linalg.norm(b1 - expected, axis=1)
    den = np.linalg.norm(expected, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    worst = int(np.argmax(dev))
    return HomogeneityReport(
        order=float(order),
        samples=int(samples),
        max_deviation=float(dev[worst]),
        worst_scale=float(c[worst]),
    )
