"""Mollifying multipliers and certified bounds for their Schur norms.

A mollifier is a function m on R^N that vanishes identically near the
origin and tends to 1 at infinity, so that M_eps(s, t) = m((t - s) / eps)
kills a neighbourhood of the diagonal when multiplied onto a kernel.  The
certified Schur bound comes from the Fourier side: if 1 - m is the Fourier
transform of an integrable rho, the Schur norm of M_eps is at most
1 + ||rho||_1 at every scale eps.  The L1 norm is estimated by an inverse
DFT with the continuous-transform normalization, always at two resolutions
so that the disagreement provides an error estimate.

The transform convention is rho_hat(s) = integral of rho(x) e^{-i s.x} dx.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import (
    NormalizationError,
    ParameterError,
    UnreliableEstimateError,
)

__all__ = [
    "Mollifier",
    "ScaledMultiplier",
    "SchurBound",
    "MomentOrderReport",
    "gaussian_mollifier",
    "complex_shift_mollifier",
    "smooth_annulus_mollifier",
    "constant_one_mollifier",
    "scale",
    "wiener_norm",
    "inverse_transform_grid",
    "schur_bound",
    "sobolev_bound",
    "sobolev_weight_constant",
    "moment_order",
    "multiplier_power",
    "smooth_step",
    "mollifier_from_name",
    "vector_multiplier_wiener_bound",
]

_DEFAULT_POINTS = {1: 8192, 2: 1024}


@dataclass(frozen=True)
class Mollifier:
    """A multiplier profile m with m = 0 on a ball around the origin.

    ``vanishing_radius`` is the radius of that ball (0 when m only vanishes
    at the origin itself, as for profiles with a zero of finite order).
    ``tail_type`` records whether 1 - m is compactly supported or merely
    integrable-after-transform.  ``support_scale`` sets the default grids
    for transform-side estimates.  Powers keep a reference to their base so
    certified bounds can use the product rule.
    """

    dimension: int
    profile: Callable[[np.ndarray], np.ndarray]
    vanishing_radius: float
    vanishing_order: float
    tail_type: str  # "one_minus_compact" | "one_minus_integrable"
    support_scale: float = 1.0
    name: str = "custom"
    base: "Mollifier | None" = None
    exponent: int = 1

    def __post_init__(self):
        if self.tail_type not in ("one_minus_compact", "one_minus_integrable"):
            raise ParameterError(f"unknown tail_type {self.tail_type!r}")
        if self.vanishing_radius < 0:
            raise ParameterError("vanishing_radius must be nonnegative")

    def __call__(self, x):
        return self.profile(np.asarray(x, dtype=float))

    def tail(self, x):
        """1 - m, the part whose inverse transform must be integrable."""
        return 1.0 - self.profile(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class ScaledMultiplier:
    """M_eps(s, t) = m((t - s) / eps), callable on broadcast point grids."""

    mollifier: Mollifier
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterError("eps must be positive")

    @property
    def dimension(self) -> int:
        return self.mollifier.dimension

    @property
    def vanishing_radius(self) -> float:
        return self.mollifier.vanishing_radius * self.eps

    @property
    def vanishes_at_zero(self) -> bool:
        return self.mollifier.vanishing_radius > 0 or self.mollifier.vanishing_order > 0

    def __call__(self, s, t):
        x = (np.asarray(t, float) - np.asarray(s, float)) / self.eps
        return self.mollifier.profile(x)

    def profile_x(self, x):
        """The scaled profile as a function of the difference variable."""
        return self.mollifier.profile(np.asarray(x, float) / self.eps)

    def tail_x(self, x):
        """1 - m(x / eps): the scaled tail in the difference variable."""
        return 1.0 - self.mollifier.profile(np.asarray(x, float) / self.eps)


@dataclass(frozen=True)
class SchurBound:
    """A certified upper bound for the Schur norm of a multiplier family.

    ``bound`` dominates the Schur norm of m((t-s)/eps) uniformly in eps.
    ``method`` names the certification route; ``error_estimate`` is the
    disagreement between the two grid resolutions actually computed.
    """

    bound: float
    method: str  # "wiener_dft" | "sobolev" | "exact_formula"
    grid: tuple
    error_estimate: float


def smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, strictly monotone between."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        left = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        right = np.where(
            u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0
        )
    out = np.where(u <= 0, 0.0, np.where(u >= 1, 1.0, left / (left + right)))
    return out


# -- catalog --------------------------------------------------------------


def gaussian_mollifier(dimension: int = 1) -> Mollifier:
    """m(x) = 1 - exp(-|x|^2 / 2); zero of order 2 at the origin.

    1 - m is the transform of the standard Gaussian density, whose L1 norm
    is exactly 1, so the certified Schur bound is exactly 2.
    """

    def profile(x):
        x = np.asarray(x, dtype=float)
        return 1.0 - np.exp(-0.5 * np.sum(x**2, axis=-1))

    return Mollifier(
        dimension=dimension,
        profile=profile,
        vanishing_radius=0.0,
        vanishing_order=2.0,
        tail_type="one_minus_integrable",
        support_scale=1.0,
        name="gaussian",
    )


def complex_shift_mollifier() -> Mollifier:
    """m(s) = s / (s - i) on R; the multiplier that shifts a simple pole.

    1 - m(s) = 1 / (1 + i s) is the transform of the one-sided exponential
    density, so the certified Schur bound is again exactly 2.  Values are
    complex; pair it with scalar kernels.
    """

    def profile(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return x / (x - 1j)

    return Mollifier(
        dimension=1,
        profile=profile,
        vanishing_radius=0.0,
        vanishing_order=1.0,
        tail_type="one_minus_integrable",
        support_scale=1.0,
        name="complex_shift",
    )


def smooth_annulus_mollifier(delta: float, dimension: int = 1) -> Mollifier:
    """Radial C-infinity profile: 0 for |x| <= 1 - delta, 1 for |x| >= 1.

    1 - m is smooth and compactly supported in the closed unit ball, so it
    lies in every Sobolev space and the transform-side machinery applies.
    """
    if not 0 < delta < 1:
        raise ParameterError("delta must lie in (0, 1)")

    def profile(x):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return smooth_step((r - (1.0 - delta)) / delta)

    return Mollifier(
        dimension=dimension,
        profile=profile,
        vanishing_radius=1.0 - delta,
        vanishing_order=np.inf,
        tail_type="one_minus_compact",
        support_scale=1.0,
        name=f"annulus(delta={delta})",
    )


def constant_one_mollifier(dimension: int = 1) -> Mollifier:
    """m = 1: no regularization at all; Schur bound 1."""

    def profile(x):
        x = np.asarray(x, dtype=float)
        return np.ones(x.shape[:-1])

    return Mollifier(
        dimension=dimension,
        profile=profile,
        vanishing_radius=0.0,
        vanishing_order=0.0,
        tail_type="one_minus_compact",
        support_scale=1.0,
        name="one",
    )


def mollifier_from_name(spec: str) -> Mollifier:
    """Parse 'gaussian', 'complex_shift', 'annulus:delta=D', 'power:base=B,k=K'."""
    name, _, arg_str = spec.partition(":")
    args = {}
    if arg_str:
        for item in arg_str.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ParameterError(f"malformed mollifier argument {item!r}")
            args[key.strip().lower()] = val.strip()
    try:
        if name == "gaussian":
            return gaussian_mollifier(int(args.get("n", 1)))
        if name == "complex_shift":
            return complex_shift_mollifier()
        if name == "annulus":
            try:
                return smooth_annulus_mollifier(
                    float(args["delta"]), int(args.get("n", 1))
                )
            except KeyError as exc:
                raise ParameterError("annulus mollifier needs delta=...") from exc
        if name == "one":
            return constant_one_mollifier(int(args.get("n", 1)))
        if name == "power":
            try:
                return multiplier_power(
                    mollifier_from_name(args["base"]), int(args["k"])
                )
            except KeyError as exc:
                raise ParameterError("power mollifier needs base=...,k=...") from exc
    except ValueError as exc:
        raise ParameterError(f"malformed mollifier argument in {spec!r}") from exc
    raise ParameterError(f"unknown mollifier {name!r}")


# -- scaling and powers ----------------------------------------------------


def scale(mollifier: Mollifier, eps: float) -> ScaledMultiplier:
    """The multiplier M_eps(s, t) = m((t - s)/eps)."""
    return ScaledMultiplier(mollifier, float(eps))


def multiplier_power(mollifier: Mollifier, k: int) -> Mollifier:
    """Pointwise k-th power; k = 1 returns the mollifier unchanged.

    The vanishing order multiplies by k and the certified Schur bound is the
    k-th power of the base bound (Schur norms are submultiplicative under
    pointwise products of multipliers).
    """
    if k < 1 or k != int(k):
        raise ParameterError("power must be a positive integer")
    if k == 1:
        return mollifier
    base_profile = mollifier.profile

    def profile(x):
        return base_profile(np.asarray(x, dtype=float)) ** k

    return replace(
        mollifier,
        profile=profile,
        vanishing_order=mollifier.vanishing_order * k,
        name=f"power({mollifier.name},{k})",
        base=mollifier,
        exponent=k,
    )


# -- transform-side estimates ----------------------------------------------


def _default_grid(
    dimension: int,
    support_scale: float,
    tail_type: str = "one_minus_compact",
) -> tuple[float, int]:
    if tail_type == "one_minus_integrable" and dimension == 1:
        # Slowly decaying transforms need a very wide sampling window; the
        # dual grid stays adequate because its spacing is pi / half_width.
        return 16384.0 * float(support_scale), 2**19
    half_width = 16.0 * float(support_scale)
    points = _DEFAULT_POINTS.get(dimension, 64)
    return half_width, points


def inverse_transform_grid(
    f: Callable, dimension: int, half_width: float, points: int
):
    """Inverse Fourier transform of f sampled on [-L, L)^N, M points per axis.

    Returns (x_axes, rho) where rho[j] approximates
    (2 pi)^-N * integral of f(s) e^{i s.x_j} ds on the dual grid whose axes
    are 2*pi*fftfreq(M, d=ds).  All continuous normalization factors
    (sample spacing, 2 pi powers, end-point phases) are included.
    """
    L, M = float(half_width), int(points)
    if not (L > 0 and M > 1):
        raise ParameterError("need positive half_width and at least 2 points")
    ds = 2.0 * L / M
    axis_s = -L + ds * np.arange(M)
    mesh = np.meshgrid(*([axis_s] * dimension), indexing="ij")
    samples = np.asarray(f(np.stack(mesh, axis=-1)))
    if samples.shape != (M,) * dimension:
        raise ParameterError("profile did not vectorize to the grid shape")

    axis_x = 2.0 * np.pi * np.fft.fftfreq(M, d=ds)
    rho = np.fft.ifftn(samples) * (M * ds / (2.0 * np.pi)) ** dimension
    # The grid starts at -L rather than 0; restore the matching phase.
    for ax in range(dimension):
        phase = np.exp(-1j * L * axis_x)
        shape = [1] * dimension
        shape[ax] = M
        rho = rho * phase.reshape(shape)
    return axis_x, rho


def _l1_on_grid(f, dimension, half_width, points) -> float:
    axis_x, rho = inverse_transform_grid(f, dimension, half_width, points)
    dx = float(axis_x[1] - axis_x[0])
    return float(np.sum(np.abs(rho)) * dx**dimension)


def wiener_norm(
    f: Callable,
    dimension: int,
    half_width: float | None = None,
    points: int | None = None,
    support_scale: float = 1.0,
) -> tuple[float, float]:
    """L1 norm of the inverse transform of f, with a two-resolution error bar.

    The sampling window [-L, L) determines the dual grid spacing pi / L, and
    the point count M determines the dual range pi M / (2 L).  The coarse run
    uses (L/2, M/4) so that all three discretization knobs -- window, dual
    spacing, dual range -- degrade at once; the doubled disagreement is the
    error estimate.  Returns (estimate, error_estimate).
    """
    L0, M0 = _default_grid(dimension, support_scale)
    L = float(half_width) if half_width is not None else L0
    M = int(points) if points is not None else M0
    fine = _l1_on_grid(f, dimension, L, M)
    coarse = _l1_on_grid(f, dimension, L / 2.0, max(M // 4, 2))
    return fine, 2.0 * abs(fine - coarse)


def schur_bound(
    mollifier: Mollifier,
    half_width: float | None = None,
    points: int | None = None,
    instability_tol: float = 0.05,
) -> SchurBound:
    """Certified Schur bound 1 + ||inverse transform of (1 - m)||_1.

    Declared powers use the product rule (base bound raised to the power)
    rather than transforming the powered profile.  Two DFT resolutions that
    disagree by more than ``instability_tol`` relative error make the
    estimate unreliable and raise instead of returning a number.
    """
    if mollifier.exponent > 1 and mollifier.base is not None:
        base = schur_bound(mollifier.base, half_width, points, instability_tol)
        k = mollifier.exponent
        err = k * base.bound ** (k - 1) * base.error_estimate
        return SchurBound(base.bound**k, base.method, base.grid, err)

    L0, M0 = _default_grid(
        mollifier.dimension, mollifier.support_scale, mollifier.tail_type
    )
    L = float(half_width) if half_width is not None else L0
    M = int(points) if points is not None else M0
    value, err = wiener_norm(mollifier.tail, mollifier.dimension, L, M)
    if err > instability_tol * max(value, 1e-12):
        coarse = value - err  # sign is irrelevant for the report
        raise UnreliableEstimateError(
            f"transform grid is unstable for {mollifier.name}: fine {value}, "
            f"disagreement {err}",
            fine=value,
            coarse=coarse,
        )
    return SchurBound(1.0 + value, "wiener_dft", (L, M), err)


def sobolev_weight_constant(dimension: int, smoothness: int) -> float:
    """C(N, k) = L2 norm of (1 + |x|^k)^(-1) over R^N; finite iff 2k > N."""
    if 2 * smoothness <= dimension:
        raise ParameterError("need smoothness k > N/2 for a finite constant")
    sphere_area = 2.0 * math.pi ** (dimension / 2.0) / math.gamma(dimension / 2.0)
    integrand = lambda r: r ** (dimension - 1) / (1.0 + r**smoothness) ** 2
    val, _ = quad(integrand, 0.0, np.inf, limit=200)
    return math.sqrt(sphere_area * val)


def sobolev_bound(
    mollifier: Mollifier,
    smoothness: int,
    half_width: float | None = None,
    points: int | None = None,
) -> SchurBound:
    """Bound 1 + C(N, k) * ||(1 + |x|^k) rho||_2 via Cauchy-Schwarz.

    Always at least as large as the direct transform-side bound, since it
    spends an inequality to trade L1 for a weighted L2 norm.
    """
    N = mollifier.dimension
    C = sobolev_weight_constant(N, smoothness)
    L0, M0 = _default_grid(N, mollifier.support_scale, mollifier.tail_type)
    L = float(half_width) if half_width is not None else L0
    M = int(points) if points is not None else M0

    def weighted_l2(Lc, Mc):
        axis_x, rho = inverse_transform_grid(mollifier.tail, N, Lc, Mc)
        dx = float(axis_x[1] - axis_x[0])
        mesh = np.meshgrid(*([axis_x] * N), indexing="ij")
        radius = np.sqrt(sum(m**2 for m in mesh))
        w = 1.0 + radius**smoothness
        return float(np.sqrt(np.sum((w * np.abs(rho)) ** 2) * dx**N))

    fine = weighted_l2(L, M)
    coarse = weighted_l2(L / 2.0, max(M // 4, 2))
    return SchurBound(
        1.0 + C * fine, "sobolev", (L, M), 2.0 * C * abs(fine - coarse)
    )


def vector_multiplier_wiener_bound(
    components: Callable,
    dimension: int,
    value_dim: int,
    half_width: float,
    points: int,
) -> SchurBound:
    """Certified Schur bound for a vector-valued multiplier profile.

    The bound is the sum over components of their individual transform-side
    L1 norms (no additive 1: these profiles are compactly supported rather
    than of the form 1 - small).
    """
    total = 0.0
    err = 0.0
    for j in range(value_dim):
        comp = lambda x, j=j: np.asarray(components(x))[..., j]
        val, e = wiener_norm(comp, dimension, half_width, points)
        total += val
        err += e
    return SchurBound(total, "wiener_dft", (half_width, points), err)


# -- moment analysis -------------------------------------------------------


@dataclass(frozen=True)
class MomentOrderReport:
    order: int
    moments: dict
    fitted_slope: float
    mass: float


def _multi_indices(dimension: int, degree: int):
    for combo in itertools.product(range(degree + 1), repeat=dimension):
        if sum(combo) == degree:
            yield combo


def moment_order(
    points: np.ndarray,
    values: np.ndarray,
    cell_volume: float,
    max_order: int,
    tolerance: float = 1e-6,
    mass_tolerance: float = 1e-4,
    fit_range: tuple[float, float] = (0.03, 0.3),
    fit_samples: int = 9,
) -> MomentOrderReport:
    """Order of the zero of 1 - rho_hat at the origin, from moments of rho.

    ``points`` (P, N) and ``values`` (P,) sample a density whose integral
    must be 1 within ``mass_tolerance``.  The returned order is the largest
    k' <= max_order such that every moment of order 1 .. k'-1 vanishes
    within ``tolerance`` (relative to the same-order absolute moment).  As a
    cross-check, |1 - rho_hat(s)| is fitted against |s| on a log-log grid
    along the first coordinate axis; the slope should not fall below the
    returned order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(values, dtype=float).ravel()
    if len(vals) != len(pts):
        raise ParameterError("points and values must have equal length")
    if max_order < 1:
        raise ParameterError("max_order must be at least 1")
    vol = float(cell_volume)

    mass = float(np.sum(vals) * vol)
    if abs(mass - 1.0) > mass_tolerance:
        raise NormalizationError(
            f"density integrates to {mass}, expected 1 within {mass_tolerance}"
        )

    dimension = pts.shape[1]
    moments: dict = {}
    order = max_order
    for degree in range(1, max_order):
        degree_ok = True
        scale_ref = float(
            np.sum(np.abs(vals) * np.linalg.norm(pts, axis=1) ** degree) * vol
        )
        for alpha in _multi_indices(dimension, degree):
            mono = np.prod(pts ** np.asarray(alpha), axis=1)
            m_alpha = float(np.sum(mono * vals) * vol)
            moments[alpha] = m_alpha
            if abs(m_alpha) > tolerance * (1.0 + scale_ref):
                degree_ok = False
        if not degree_ok:
            order = degree
            break

    s_grid = np.geomspace(fit_range[0], fit_range[1], fit_samples)
    direction = np.zeros(dimension)
    direction[0] = 1.0
    tail_vals = []
    for s in s_grid:
        phase = np.exp(-1j * s * pts @ direction)
        rho_hat = np.sum(vals * phase) * vol
        tail_vals.append(abs(1.0 - rho_hat))
    tail_vals = np.asarray(tail_vals)
    if np.any(tail_vals <= 0):
        slope = float("inf")
    else:
        slope = float(np.polyfit(np.log(s_grid), np.log(tail_vals), 1)[0])

    return MomentOrderReport(order, moments, slope, mass)
