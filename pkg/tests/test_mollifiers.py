"""Multiplier profiles, certified Schur bounds, and moment analysis."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from siolab import mollifiers
from siolab.errors import (
    NormalizationError,
    ParameterError,
    UnreliableEstimateError,
)


class TestSmoothStep:
    def test_endpoint_values(self):
        assert mollifiers.smooth_step(-1.0) == 0.0
        assert mollifiers.smooth_step(0.0) == 0.0
        assert mollifiers.smooth_step(1.0) == 1.0
        assert mollifiers.smooth_step(2.0) == 1.0
        assert mollifiers.smooth_step(0.5) == pytest.approx(0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(-5, 5), st.floats(-5, 5))
    def test_monotone_and_bounded(self, a, b):
        lo, hi = min(a, b), max(a, b)
        va, vb = mollifiers.smooth_step(lo), mollifiers.smooth_step(hi)
        assert 0.0 <= va <= vb <= 1.0


class TestGaussian:
    def test_profile_formula(self):
        m = mollifiers.gaussian_mollifier()
        x = np.array([[0.5], [1.0], [-2.0]])
        expected = 1.0 - np.exp(-0.5 * x[:, 0] ** 2)
        assert np.allclose(m.profile(x), expected)

    def test_certified_bound_is_two(self):
        # 1 - m transforms to the standard Gaussian density of unit L1 mass
        sb = mollifiers.schur_bound(mollifiers.gaussian_mollifier())
        assert sb.bound == pytest.approx(2.0, abs=1e-9)
        assert sb.error_estimate < 1e-9

    def test_two_dimensional_bound_is_two(self):
        sb = mollifiers.schur_bound(mollifiers.gaussian_mollifier(dimension=2))
        assert sb.bound == pytest.approx(2.0, abs=1e-6)

    def test_power_bound_by_product_rule(self):
        cubed = mollifiers.multiplier_power(mollifiers.gaussian_mollifier(), 3)
        sb = mollifiers.schur_bound(cubed)
        assert sb.bound == pytest.approx(8.0, abs=1e-8)

    def test_power_validation(self):
        with pytest.raises(ParameterError):
            mollifiers.multiplier_power(mollifiers.gaussian_mollifier(), 0)


class TestComplexShift:
    def test_profile_formula(self):
        m = mollifiers.complex_shift_mollifier()
        s = np.array([[0.5], [-1.0], [3.0]])
        vals = m.profile(s)
        expected = s[:, 0] / (s[:, 0] - 1j)
        assert np.allclose(vals, expected)
        # 1 - m(s) = 1 / (1 + i s), the transform of a one-sided exponential
        assert np.allclose(1.0 - vals, 1.0 / (1.0 + 1j * s[:, 0]))

    def test_certified_bound_near_two(self):
        sb = mollifiers.schur_bound(mollifiers.complex_shift_mollifier())
        assert sb.bound == pytest.approx(2.0, abs=1e-3)
        assert sb.error_estimate < 1e-3


class TestAnnulus:
    def test_plateau_structure(self):
        m = mollifiers.smooth_annulus_mollifier(0.25)
        vals = m.profile(np.array([[0.0], [0.74], [1.0], [2.0]]))
        assert vals[0] == 0.0
        assert vals[1] == 0.0  # inside the vanishing ball |x| <= 1 - delta
        assert vals[2] == 1.0
        assert vals[3] == 1.0
        assert m.vanishing_radius == pytest.approx(0.75)

    def test_delta_validation(self):
        for bad in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ParameterError):
                mollifiers.smooth_annulus_mollifier(bad)

    def test_certified_bound_frozen(self):
        # independently reproduced by direct quadrature of the transform;
        # the value is stable across grid refinement well beyond the error bar
        sb = mollifiers.schur_bound(mollifiers.smooth_annulus_mollifier(0.1))
        assert sb.bound == pytest.approx(3.3609386705560524, abs=1e-6)
        assert sb.error_estimate < 0.01

    def test_unreliable_grid_raises(self):
        with pytest.raises(UnreliableEstimateError):
            mollifiers.schur_bound(
                mollifiers.smooth_annulus_mollifier(0.1),
                half_width=24.0,
                points=256,
            )


class TestConstantOne:
    def test_bound_is_one(self):
        sb = mollifiers.schur_bound(mollifiers.constant_one_mollifier())
        assert sb.bound == pytest.approx(1.0, abs=1e-12)


class TestFromName:
    @pytest.mark.parametrize(
        "spec, expected_name",
        [
            ("gaussian", "gaussian"),
            ("complex_shift", "complex_shift"),
            ("annulus:delta=0.2", "annulus"),
            ("one", "one"),
        ],
    )
    def test_known_names(self, spec, expected_name):
        m = mollifiers.mollifier_from_name(spec)
        assert expected_name in m.name

    def test_power_spec(self):
        m = mollifiers.mollifier_from_name("power:base=gaussian,k=2")
        sb = mollifiers.schur_bound(m)
        assert sb.bound == pytest.approx(4.0, abs=1e-8)

    def test_unknown_name(self):
        with pytest.raises(ParameterError):
            mollifiers.mollifier_from_name("mystery")
        with pytest.raises(ParameterError):
            mollifiers.mollifier_from_name("annulus:delta")


class TestSobolevBound:
    def test_gaussian_against_quadrature_oracle(self):
        # oracle: 1 + C(1, k) ||(1 + |x|^k) rho||_2 with rho the standard
        # Gaussian density, both factors computed by adaptive quadrature
        k = 3
        c_nk = np.sqrt(2.0 * quad(lambda r: 1.0 / (1.0 + r**k) ** 2, 0, np.inf)[0])
        rho = lambda x: np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi)
        weighted = np.sqrt(
            quad(lambda x: ((1 + abs(x) ** k) * rho(x)) ** 2, -np.inf, np.inf)[0]
        )
        oracle = 1.0 + c_nk * weighted
        sb = mollifiers.sobolev_bound(mollifiers.gaussian_mollifier(), k)
        assert sb.bound == pytest.approx(oracle, rel=1e-6)

    def test_dominates_direct_transform_bound(self):
        m = mollifiers.gaussian_mollifier()
        direct = mollifiers.schur_bound(m)
        sobolev = mollifiers.sobolev_bound(m, 3)
        assert sobolev.bound >= direct.bound - 1e-12

    def test_smoothness_must_exceed_half_dimension(self):
        with pytest.raises(ParameterError):
            mollifiers.sobolev_weight_constant(2, 1)


class TestScale:
    def test_scaled_multiplier_evaluates_profile_of_difference(self):
        m = mollifiers.gaussian_mollifier()
        sm = mollifiers.scale(m, 0.5)
        s = np.array([[0.0], [1.0]])
        t = np.array([[0.25], [0.5]])
        expected = m.profile((t - s) / 0.5)
        assert np.allclose(sm(s, t), expected)
        assert sm.vanishes_at_zero

    def test_eps_validation(self):
        with pytest.raises(ParameterError):
            mollifiers.scale(mollifiers.gaussian_mollifier(), 0.0)

    def test_constant_one_does_not_vanish(self):
        sm = mollifiers.scale(mollifiers.constant_one_mollifier(), 1.0)
        assert not sm.vanishes_at_zero


class TestWienerScaleInvariance:
    def test_dilation_leaves_norm_unchanged(self):
        # ||inverse transform of f(./eps)||_1 is independent of eps
        m = mollifiers.smooth_annulus_mollifier(0.1)
        estimates = []
        for eps in (0.5, 2.0):
            est, err = mollifiers.wiener_norm(
                lambda x, e=eps: 1.0 - m.profile(x / e),
                dimension=1,
                half_width=24.0,
                points=2**17,
            )
            estimates.append((est, err))
        gap = abs(estimates[0][0] - estimates[1][0])
        assert gap <= estimates[0][1] + estimates[1][1]


class TestMomentOrder:
    @staticmethod
    def _grid(L=12.0, M=4096):
        dx = 2.0 * L / M
        return -L + dx * (np.arange(M) + 0.5), dx

    def test_gaussian_density_order_two(self):
        # oracle: first moment 0, second moment 1 (standard Gaussian)
        x, dx = self._grid()
        rho = np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi)
        rep = mollifiers.moment_order(x, rho, dx, 6)
        assert rep.order == 2
        assert rep.moments[(1,)] == pytest.approx(0.0, abs=1e-12)
        assert rep.moments[(2,)] == pytest.approx(1.0, rel=1e-10)
        assert rep.fitted_slope == pytest.approx(2.0, abs=0.05)

    def test_one_sided_exponential_order_one(self):
        # oracle: first moment 1 (mean of the unit exponential)
        x, dx = self._grid()
        rho = np.where(x >= 0, np.exp(-np.clip(x, 0, None)), 0.0)
        rep = mollifiers.moment_order(x, rho, dx, 6)
        assert rep.order == 1
        assert rep.moments[(1,)] == pytest.approx(1.0, rel=1e-4)
        assert rep.fitted_slope == pytest.approx(1.0, abs=0.05)

    def test_three_vanishing_moments(self):
        # rho = (3 - x^2) phi(x) / 2 has vanishing moments 1..3 and fourth
        # moment -3 (phi the standard Gaussian): order 4 under a cap of 5,
        # capped at 3 when max_order = 3
        x, dx = self._grid()
        rho = 0.5 * (3.0 - x**2) * np.exp(-0.5 * x**2) / np.sqrt(2 * np.pi)
        capped = mollifiers.moment_order(x, rho, dx, 3)
        assert capped.order == 3
        full = mollifiers.moment_order(x, rho, dx, 5)
        assert full.order == 4
        assert full.moments[(4,)] == pytest.approx(-3.0, rel=1e-10)
        assert full.fitted_slope == pytest.approx(4.0, abs=0.05)

    def test_unnormalized_density_rejected(self):
        x, dx = self._grid()
        rho = np.exp(-0.5 * x**2)  # mass sqrt(2 pi) != 1
        with pytest.raises(NormalizationError):
            mollifiers.moment_order(x, rho, dx, 4)

    def test_two_dimensional_moments(self):
        L, M = 8.0, 128
        dx = 2.0 * L / M
        axis = -L + dx * (np.arange(M) + 0.5)
        X, Y = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        rho = np.exp(-0.5 * (pts[:, 0] ** 2 + pts[:, 1] ** 2)) / (2 * np.pi)
        rep = mollifiers.moment_order(pts, rho, dx**2, 4)
        assert rep.order == 2
        assert rep.moments[(1, 0)] == pytest.approx(0.0, abs=1e-10)
        assert rep.moments[(0, 1)] == pytest.approx(0.0, abs=1e-10)
