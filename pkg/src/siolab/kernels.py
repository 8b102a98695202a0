"""Singular convolution kernels and their discretization against measures.

A kernel is a map K(s, t) defined off the diagonal with values in R^m
(m = 2 encodes complex values as (real, imag) pairs; complex multiplication
is the corresponding real 2x2 action).  Convolution kernels carry a profile
K1 with K(s, t) = K1(t - s) and K1(x) = A(|x|) * B(x/|x|), where B is a
spherical factor that lifts to a homogeneous map of declared degree.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import DiagonalSingularityError, ParameterError
from .measure import DiscreteMeasure

__all__ = [
    "ConvolutionProfile",
    "KernelSpec",
    "KernelMatrix",
    "make_hilbert",
    "make_cauchy",
    "make_riesz_generalized",
    "make_ahlfors_beurling",
    "order_check",
    "OrderReport",
    "materialize",
    "clamp",
    "kernel_from_name",
]


@dataclass(frozen=True)
class ConvolutionProfile:
    """Factorization K1(x) = radial(|x|) * spherical(x/|x|).

    ``degree`` is the homogeneity order of the lifted spherical factor
    B(x) = |x|**degree * spherical(x/|x|), used by constructions that need a
    continuous homogeneous profile rather than one living on the sphere.
    """

    radial: Callable[[np.ndarray], np.ndarray]
    spherical: Callable[[np.ndarray], np.ndarray]
    degree: float

    def kernel_values(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            theta = x / r[..., None]
        sph = np.asarray(self.spherical(theta))
        rad = np.asarray(self.radial(r))
        if sph.ndim == rad.ndim:  # scalar spherical factor
            return rad * sph
        return rad[..., None] * sph

    def lifted_spherical(self, x: np.ndarray) -> np.ndarray:
        """Homogeneous lift B(x) = |x|**degree * spherical(x/|x|); B(0) = 0."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        sph = np.asarray(self.spherical(x / safe[..., None]))
        scale = np.where(r > 0, safe**self.degree, 0.0)
        if sph.ndim == r.ndim:
            return scale * np.where(r > 0, sph, 0.0)
        return scale[..., None] * np.where(r[..., None] > 0, sph, 0.0)

    def lifted_radial(self, r: np.ndarray) -> np.ndarray:
        """A(r) / r**degree, so kernel_values = lifted_radial * lifted_spherical."""
        r = np.asarray(r, dtype=float)
        return np.asarray(self.radial(r)) * r ** (-self.degree)


@dataclass(frozen=True)
class KernelSpec:
    """A kernel K(s, t) on R^N x R^N minus the diagonal.

    ``evaluate(s, t)`` is vectorized over leading axes of (..., N) inputs and
    returns (...,) for scalar kernels or (..., m) for vector values.  ``order``
    is the singularity order d, meaning |K(s,t)| * |s-t|**d stays bounded.
    """

    dimension: int
    value_dim: int
    order: float
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    profile: ConvolutionProfile | None = None
    finite_on_diagonal: bool = False
    name: str = "custom"

    def __call__(self, s, t):
        return self.evaluate(np.asarray(s, float), np.asarray(t, float))


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel sampled against a measure pair.

    Rows follow the support of nu (the output variable s), columns the
    support of mu (the input variable t).  ``entries`` has shape
    (len(nu), len(mu)) for scalar kernels and (len(nu), len(mu), m) for
    vector values; complex dtype encodes complex scalar kernels.
    """

    entries: np.ndarray
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    value_dim: int
    diagonal_policy: float | None = None

    def __post_init__(self):
        e = np.asarray(self.entries)
        if e.shape[0] != len(self.nu) or e.shape[1] != len(self.mu):
            raise ParameterError("entry shape does not match the supports")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)


# -- catalog --------------------------------------------------------------


def _coords_diff(s, t):
    """t - s with broadcasting, final axis the coordinate axis."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    return t - s


def make_hilbert() -> KernelSpec:
    """K(s, t) = 1 / (pi (s - t)) on R; scalar, order 1."""

    def evaluate(s, t):
        x = _coords_diff(s, t)[..., 0]
        with np.errstate(divide="ignore"):
            return -1.0 / (np.pi * x)

    return KernelSpec(1, 1, 1.0, evaluate, profile=None, name="hilbert")


def make_cauchy() -> KernelSpec:
    """K1(z) = 1/z = conj(z)/|z|^2 on R^2, stored as a real pair; order 1."""

    profile = ConvolutionProfile(
        radial=lambda r: 1.0 / r,
        spherical=lambda th: np.stack([th[..., 0], -th[..., 1]], axis=-1),
        degree=1.0,
    )

    def evaluate(s, t):
        x = _coords_diff(s, t)
        r2 = np.sum(x**2, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.stack([x[..., 0] / r2, -x[..., 1] / r2], axis=-1)

    return KernelSpec(2, 2, 1.0, evaluate, profile=profile, name="cauchy")


def make_riesz_generalized(alpha: float, dimension: int) -> KernelSpec:
    """K1(x) = x / |x|**(alpha+1) on R^N; vector-valued, order alpha."""
    if alpha <= 0:
        raise ParameterError("alpha must be positive")
    if dimension < 1:
        raise ParameterError("dimension must be at least 1")

    profile = ConvolutionProfile(
        radial=lambda r: r ** (-float(alpha)),
        spherical=lambda th: th,
        degree=1.0,
    )

    def evaluate(s, t):
        x = _coords_diff(s, t)
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return x * (r ** (-(alpha + 1.0)))[..., None]

    return KernelSpec(
        dimension,
        dimension,
        float(alpha),
        evaluate,
        profile=profile,
        name=f"riesz(alpha={alpha},N={dimension})",
    )


def make_ahlfors_beurling() -> KernelSpec:
    """K1(z) = 1/z^2 = conj(z)^2/|z|^4 on R^2; order 2."""

    def _sph(th):
        a, b = th[..., 0], th[..., 1]
        return np.stack([a * a - b * b, -2.0 * a * b], axis=-1)

    profile = ConvolutionProfile(
        radial=lambda r: r ** (-2.0), spherical=_sph, degree=2.0
    )

    def evaluate(s, t):
        x = _coords_diff(s, t)
        a, b = x[..., 0], x[..., 1]
        r4 = (a * a + b * b) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.stack([(a * a - b * b) / r4, -2.0 * a * b / r4], axis=-1)

    return KernelSpec(2, 2, 2.0, evaluate, profile=profile, name="ahlfors_beurling")


def kernel_from_name(spec: str) -> KernelSpec:
    """Parse 'hilbert', 'cauchy', 'ahlfors_beurling' or 'riesz:alpha=A,N=D'."""
    name, _, arg_str = spec.partition(":")
    args = {}
    if arg_str:
        for item in arg_str.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ParameterError(f"malformed kernel argument {item!r}")
            try:
                args[key.strip().lower()] = float(val)
            except ValueError as exc:
                raise ParameterError(
                    f"kernel argument {key.strip()!r} must be numeric, got {val!r}"
                ) from exc
    if name == "hilbert":
        return make_hilbert()
    if name == "cauchy":
        return make_cauchy()
    if name == "ahlfors_beurling":
        return make_ahlfors_beurling()
    if name == "riesz":
        try:
            return make_riesz_generalized(args["alpha"], int(args["n"]))
        except KeyError as exc:
            raise ParameterError("riesz kernel needs alpha=...,N=...") from exc
    raise ParameterError(f"unknown kernel {name!r}")


# -- diagnostics ----------------------------------------------------------


@dataclass(frozen=True)
class OrderReport:
    sup_value: float
    argmax_pair: tuple
    flagged: list
    cap: float

    @property
    def ok(self) -> bool:
        return not self.flagged


def order_check(kernel: KernelSpec, pairs, cap: float = 1e6) -> OrderReport:
    """Empirical sup of |K(s,t)| |s-t|**order over sample pairs.

    ``pairs`` is a (k, 2, N) array of (s, t) samples.  Pairs whose scaled
    magnitude exceeds ``cap`` are flagged; a growing sup along shrinking
    distances is the symptom of a misdeclared order.
    """
    pairs = np.asarray(pairs, dtype=float)
    if pairs.ndim == 2:  # (k, 2) in dimension 1
        pairs = pairs[:, :, None]
    s, t = pairs[:, 0, :], pairs[:, 1, :]
    dist = np.linalg.norm(t - s, axis=-1)
    if np.any(dist == 0):
        raise ParameterError("order_check needs non-coincident sample pairs")
    vals = np.asarray(kernel.evaluate(s, t))
    mags = np.abs(vals) if vals.ndim == 1 else np.linalg.norm(vals, axis=-1)
    scaled = mags * dist**kernel.order
    k = int(np.argmax(scaled))
    flagged = [
        (tuple(s[i]), tuple(t[i]), float(scaled[i]))
        for i in np.nonzero(scaled > cap)[0]
    ]
    return OrderReport(float(scaled[k]), (tuple(s[k]), tuple(t[k])), flagged, cap)


# -- discretization -------------------------------------------------------


def _multiplier_values(multiplier, s, t):
    """Evaluate a multiplier object or callable on broadcast (s, t) grids."""
    if callable(multiplier):
        return np.asarray(multiplier(s, t))
    raise ParameterError("multiplier must be callable as multiplier(s, t)")


def _multiplier_vanishes(multiplier) -> bool:
    return bool(getattr(multiplier, "vanishes_at_zero", False))


def materialize(
    kernel: KernelSpec,
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    multiplier=None,
    diagonal_policy: float | None = None,
) -> KernelMatrix:
    """Sample ``multiplier * K`` on supp(nu) x supp(mu).

    Coincident point pairs are only legal when the kernel is finite on the
    diagonal, the multiplier vanishes there, or ``diagonal_policy`` supplies
    an explicit value; otherwise the offending pairs are reported.

    When both the kernel and the multiplier are vector-valued (matching m),
    the entries are their pointwise inner products (scalar kernel matrix).
    """
    if kernel.dimension != mu.dimension or kernel.dimension != nu.dimension:
        raise ParameterError("kernel and measures must share a dimension")
    s = nu.points[:, None, :]  # rows: output variable
    t = mu.points[None, :, :]  # cols: input variable
    dist = np.linalg.norm(t - s, axis=-1)
    coincident = dist == 0.0

    mult_vals = None
    if multiplier is not None:
        mult_vals = _multiplier_values(multiplier, s, t)

    covered = (
        kernel.finite_on_diagonal
        or (multiplier is not None and _multiplier_vanishes(multiplier))
        or diagonal_policy is not None
    )
    if np.any(coincident) and not covered:
        idx = np.argwhere(coincident)[:10]
        pairs = [(tuple(nu.points[i]), tuple(mu.points[j])) for i, j in idx]
        raise DiagonalSingularityError(
            f"{int(coincident.sum())} coincident point pair(s) under a "
            "singular kernel; supply a vanishing multiplier or a diagonal "
            f"policy (first offenders: {pairs})",
            pairs=pairs,
        )

    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(kernel.evaluate(s, t))

    if mult_vals is not None:
        if mult_vals.ndim == vals.ndim and kernel.value_dim > 1:
            # vector multiplier paired with vector kernel: contract
            with np.errstate(invalid="ignore"):
                out = np.sum(mult_vals * vals, axis=-1)
            value_dim = 1
        else:
            if np.iscomplexobj(mult_vals) and vals.ndim > mult_vals.ndim:
                raise ParameterError(
                    "complex multipliers pair with scalar kernels only"
                )
            with np.errstate(invalid="ignore"):
                out = (
                    mult_vals[..., None] * vals
                    if vals.ndim > mult_vals.ndim
                    else mult_vals * vals
                )
            value_dim = kernel.value_dim
    else:
        out = vals
        value_dim = kernel.value_dim

    if np.any(coincident):
        fill = 0.0
        if diagonal_policy is not None and not (
            kernel.finite_on_diagonal
            or (multiplier is not None and _multiplier_vanishes(multiplier))
        ):
            fill = diagonal_policy
        if not kernel.finite_on_diagonal:
            out = np.array(out)
            out[coincident] = fill
    bad = ~np.isfinite(out)
    if np.iscomplexobj(out):
        bad = ~np.isfinite(out.real) | ~np.isfinite(out.imag)
    if np.any(bad):
        raise DiagonalSingularityError(
            "kernel produced non-finite entries away from coincident pairs"
        )
    return KernelMatrix(out, mu, nu, value_dim, diagonal_policy)


def clamp(kernel: KernelSpec, level: float) -> KernelSpec:
    """Pointwise min(K, level) for scalar nonnegative kernels.

    The clamp of a kernel that blows up on the diagonal is finite everywhere
    (the diagonal value is the level itself), so clamped kernels materialize
    without a policy.  level = inf returns the kernel unchanged.
    """
    if kernel.value_dim != 1:
        raise ParameterError("clamp supports scalar kernels only")
    if not level >= 0:
        raise ParameterError("clamp level must be nonnegative")
    if np.isinf(level):
        return kernel

    base = kernel.evaluate

    def evaluate(s, t):
        x = _coords_diff(s, t)
        dist = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(base(s, t), dtype=float)
        vals = np.where(dist == 0, level, vals)
        return np.minimum(vals, level)

    return replace(
        kernel,
        evaluate=evaluate,
        finite_on_diagonal=True,
        name=f"clamp({kernel.name},{level})",
    )
