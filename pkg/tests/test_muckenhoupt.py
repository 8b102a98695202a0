"""Growth constants of Muckenhoupt type and the lower-bound experiment."""

import numpy as np
import pytest

from conftest import random_measure
from siolab import kernels, measure, muckenhoupt
from siolab.errors import (
    CommonAtomsError,
    ParameterError,
    ProfileBoundError,
    UsageError,
)


def disk_measure(seed, n=300, radius=0.25, center=(0.0, 0.0)):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, 2))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    rr = radius * np.sqrt(rng.random(n))
    return measure.from_points(
        np.asarray(center) + raw * rr[:, None], np.full(n, 1.0 / n)
    )


class TestBallValue:
    def test_manual_oracle(self):
        # mu has mass 3 and nu mass 5 inside the ball of diameter 2 around 0
        mu = measure.from_points([[0.0], [0.9], [1.5]], [1.0, 2.0, 7.0])
        nu = measure.from_points([[-0.5], [0.2], [4.0]], [2.0, 3.0, 9.0])
        v = muckenhoupt.ball_value(mu, nu, [0.0], 2.0, p=2.0, alpha=1.0)
        assert v == pytest.approx((2.0 * 2.0) ** -1.0 * np.sqrt(3.0) * np.sqrt(5.0))

    def test_point_mass_pair(self):
        mu = measure.from_points([[0.0]], [1.0], atomic=True)
        for alpha in (0.5, 1.0, 2.0):
            v = muckenhoupt.ball_value(mu, mu, [0.0], 1.0, p=2.0, alpha=alpha)
            assert v == pytest.approx(2.0**-alpha, rel=1e-14)

    def test_parameter_validation(self):
        m = measure.from_points([[0.0]], [1.0])
        with pytest.raises(ParameterError):
            muckenhoupt.ball_value(m, m, [0.0], 0.0, 2.0, 1.0)
        with pytest.raises(ParameterError):
            muckenhoupt.ball_value(m, m, [0.0], 1.0, 2.0, 0.0)


class TestApAlphaConstant:
    LEBESGUE_RADII = [0.25 * 2.0 ** (k / 2.0) for k in range(7)]

    def test_lebesgue_half_constant(self):
        m = measure.lebesgue_grid(0.0, 1.0, 2.0**-8)
        rep = muckenhoupt.ap_alpha_constant(
            m, m, 2.0, 1.0, radii=self.LEBESGUE_RADII
        )
        # continuum value 1/2: interior balls of diameter r carry mass r
        assert rep.constant == pytest.approx(0.5, rel=0.05)
        assert rep.constant == pytest.approx(0.5027087272498111, rel=1e-12)

    def test_witness_reproduces_constant(self):
        m = measure.lebesgue_grid(0.0, 1.0, 2.0**-8)
        rep = muckenhoupt.ap_alpha_constant(m, m, 2.0, 1.0, radii=self.LEBESGUE_RADII)
        center, r = rep.witness_ball
        again = muckenhoupt.ball_value(m, m, np.asarray(center), r, 2.0, 1.0)
        assert again == pytest.approx(rep.constant, rel=1e-14)

    def test_point_mass_scan(self):
        mu = measure.from_points([[0.0]], [1.0], atomic=True)
        for alpha in (0.5, 1.0, 2.0):
            rep = muckenhoupt.ap_alpha_constant(mu, mu, 2.0, alpha, radii=[1.0])
            assert rep.constant == pytest.approx(2.0**-alpha, rel=1e-14)

    def test_p_independence_for_equal_measures(self):
        # mu = nu makes the two mass factors combine to a full power of one
        m = measure.lebesgue_grid(0.0, 1.0, 2.0**-7)
        radii = self.LEBESGUE_RADII
        base = muckenhoupt.ap_alpha_constant(m, m, 2.0, 1.0, radii=radii).constant
        for p in (1.5, 3.0, 7.0):
            c = muckenhoupt.ap_alpha_constant(m, m, p, 1.0, radii=radii).constant
            assert abs(c - base) <= 1e-12 * base

    def test_dilation_scaling_law(self):
        # dilating points by c and weights by c^N scales the constant by
        # c^(N - alpha), exactly
        rng = np.random.default_rng(50)
        mu = random_measure(rng, 15)
        nu = random_measure(rng, 12)
        radii = [0.1, 0.2, 0.4, 0.8]
        c, alpha = 3.7, 1.25
        base = muckenhoupt.ap_alpha_constant(mu, nu, 2.0, alpha, radii=radii).constant
        mu_c = measure.from_points(mu.points * c, mu.weights * c)
        nu_c = measure.from_points(nu.points * c, nu.weights * c)
        scaled = muckenhoupt.ap_alpha_constant(
            mu_c, nu_c, 2.0, alpha, radii=[r * c for r in radii]
        ).constant
        assert scaled == pytest.approx(c ** (1.0 - alpha) * base, rel=1e-12)

    def test_monotone_in_added_mass(self):
        rng = np.random.default_rng(51)
        mu = random_measure(rng, 20)
        nu = random_measure(rng, 20)
        extra = random_measure(rng, 10)
        radii = [0.1, 0.3, 0.9]
        small = muckenhoupt.ap_alpha_constant(mu, nu, 2.0, 1.0, radii=radii).constant
        big = muckenhoupt.ap_alpha_constant(
            measure.merge(mu, extra), nu, 2.0, 1.0, radii=radii
        ).constant
        assert big >= small - 1e-15

    def test_empty_side_gives_zero(self):
        mu = measure.from_points([[0.0]], [1.0])
        empty = measure.from_points(np.empty((0, 1)), [])
        rep = muckenhoupt.ap_alpha_constant(mu, empty, 2.0, 1.0, radii=[1.0])
        assert rep.constant == 0.0

    def test_both_empty_rejected(self):
        empty = measure.from_points(np.empty((0, 1)), [])
        with pytest.raises(UsageError):
            muckenhoupt.ap_alpha_constant(empty, empty, 2.0, 1.0, radii=[1.0])

    def test_default_radii_need_two_points(self):
        mu = measure.from_points([[0.0]], [1.0])
        with pytest.raises(UsageError):
            muckenhoupt.ap_alpha_constant(mu, mu, 2.0, 1.0)


class TestHomogeneity:
    def test_exact_homogeneous_maps(self):
        rep = muckenhoupt.homogeneity_check(lambda x: x, order=1.0, dimension=2)
        assert rep.max_deviation <= 1e-12
        rep0 = muckenhoupt.homogeneity_check(
            lambda x: np.ones(x.shape[:-1]), order=0.0, dimension=2
        )
        assert rep0.max_deviation <= 1e-12

    def test_misdeclared_order_detected(self):
        norm = lambda x: x / np.linalg.norm(x, axis=-1, keepdims=True)
        rep = muckenhoupt.homogeneity_check(norm, order=1.0, dimension=2)
        assert rep.max_deviation > 1.0


class TestNecessityExperiment:
    def test_cauchy_disk_pointwise_and_chain(self):
        mu = disk_measure(60, n=250)
        nu = disk_measure(61, n=250)
        rep = muckenhoupt.necessity_experiment(
            kernels.make_cauchy(), mu, nu, p=2.0, eps_list=[0.25], seed=1
        )
        assert rep.sphere_infimum == pytest.approx(1.0, rel=1e-12)
        assert rep.c_prime == pytest.approx(1.0, rel=1e-12)
        assert rep.pointwise_ok
        assert rep.chain_ok
        checked = [b for b in rep.balls if b.checked]
        assert checked
        for ball in checked:
            # Cauchy contraction telescopes to exactly eps^-1 on the plateau
            assert ball.bound_target == pytest.approx(4.0, rel=1e-12)
            assert ball.min_entry >= ball.bound_target * (1 - 1e-9)

    def test_riesz_equality_case(self):
        mu = disk_measure(62, n=200, radius=0.3)
        nu = disk_measure(63, n=200, radius=0.3)
        k = kernels.make_riesz_generalized(1.0, 2)
        rep = muckenhoupt.necessity_experiment(
            k, mu, nu, p=2.0, eps_list=[0.3, 0.15], seed=2
        )
        assert rep.pointwise_ok
        assert rep.chain_ok
        assert rep.degree == 1.0 and rep.alpha == 1.0

    def test_alpha_below_degree_rejected(self):
        mu = disk_measure(64, n=50)
        nu = disk_measure(65, n=50)
        with pytest.raises(ParameterError, match="at least the degree"):
            muckenhoupt.necessity_experiment(
                kernels.make_ahlfors_beurling(), mu, nu,
                p=2.0, eps_list=[0.25], alpha=0.5,
            )

    def test_profile_lower_bound_enforced(self):
        # a capped radial factor eventually falls below r^-(d+alpha)
        capped = kernels.KernelSpec(
            dimension=2,
            value_dim=2,
            order=1.0,
            evaluate=kernels.make_cauchy().evaluate,
            profile=kernels.ConvolutionProfile(
                radial=lambda r: np.minimum(1.0 / r, 100.0) / r,
                spherical=kernels.make_cauchy().profile.spherical,
                degree=1.0,
            ),
            name="capped",
        )
        mu = disk_measure(66, n=50)
        nu = disk_measure(67, n=50)
        with pytest.raises(ProfileBoundError):
            muckenhoupt.necessity_experiment(
                capped, mu, nu, p=2.0, eps_list=[0.25]
            )

    def test_kernel_without_profile_rejected(self):
        mu = measure.from_points([[0.0]], [1.0])
        nu = measure.from_points([[0.5]], [1.0])
        with pytest.raises(ParameterError, match="factorization"):
            muckenhoupt.necessity_experiment(
                kernels.make_hilbert(), mu, nu, p=2.0, eps_list=[0.25]
            )

    def test_shared_atoms_rejected(self):
        atom = measure.from_points([[0.1, 0.1]], [0.5], atomic=True)
        mu = measure.merge(disk_measure(68, n=40), atom)
        nu = measure.merge(disk_measure(69, n=40), atom)
        with pytest.raises(CommonAtomsError):
            muckenhoupt.necessity_experiment(
                kernels.make_cauchy(), mu, nu, p=2.0, eps_list=[0.25]
            )

    def test_window_multiplier_plateau_and_support(self):
        k = kernels.make_cauchy()
        mult = muckenhoupt.HomogeneousWindowMultiplier(k.profile, eps=1.0)
        s = np.zeros((3, 2))
        t = np.array([[1.0, 0.0], [2.5, 0.0], [3.5, 0.0]])
        vals = mult(s, t)
        # plateau: components equal the lifted spherical factor itself
        assert np.allclose(vals[0], [1.0, 0.0])
        # transition region: strictly between plateau and zero
        assert 0 < np.linalg.norm(vals[1]) < 2.5
        # beyond three scales: identically zero
        assert np.allclose(vals[2], 0.0)
