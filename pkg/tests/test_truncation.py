"""Hard vs smooth truncations, sectoriality, and domination multipliers."""

import numpy as np
import pytest

from conftest import random_measure
from siolab import kernels, measure, mollifiers, truncation
from siolab.errors import (
    CommonAtomsError,
    NotSectorializableError,
    ParameterError,
)


class TestTruncate:
    def test_zero_inside_closed_ball(self):
        k = truncation.truncate(kernels.make_hilbert(), 1.0)
        assert float(k.evaluate([0.0], [0.5])) == 0.0
        assert float(k.evaluate([0.0], [1.0])) == 0.0  # boundary belongs to zero
        assert float(k.evaluate([0.0], [1.5])) == pytest.approx(
            -2.0 / (3.0 * np.pi)
        )

    def test_matches_base_kernel_outside(self):
        base = kernels.make_cauchy()
        k = truncation.truncate(base, 0.5)
        s = np.array([[0.0, 0.0]])
        t = np.array([[1.0, 1.0]])
        assert np.array_equal(k.evaluate(s, t), base.evaluate(s, t))

    def test_materializes_on_coincident_supports(self):
        m = measure.from_points([[0.0], [1.0]], [1, 1])
        km = kernels.materialize(truncation.truncate(kernels.make_hilbert(), 0.5), m, m)
        assert km.entries[0, 0] == 0.0

    def test_eps_validation(self):
        with pytest.raises(ParameterError):
            truncation.truncate(kernels.make_hilbert(), 0.0)


class TestPlateauBump:
    def test_plateau_and_support(self):
        u = np.array([0.0, 0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 2.0])
        v = truncation.plateau_bump(u)
        assert v[0] == 0.0 and v[1] == 0.0
        assert v[3] == 1.0 and v[4] == 1.0 and v[5] == 1.0
        assert v[7] == 0.0 and v[8] == 0.0
        assert np.all((v >= 0.0) & (v <= 1.0))


class TestSectoriality:
    def test_two_axes_give_diagonal_direction(self):
        rep = truncation.sectoriality_check([[1.0, 0.0], [0.0, 1.0]])
        assert rep.kappa_achieved == pytest.approx(np.sqrt(0.5), rel=1e-12)
        assert np.allclose(np.abs(rep.x0), np.sqrt(0.5), atol=1e-9)
        assert np.linalg.norm(rep.x0) == pytest.approx(1.0, rel=1e-12)

    def test_opposite_signs_cannot_be_sectorial(self):
        rep = truncation.sectoriality_check([[1.0], [-1.0]])
        assert rep.kappa_achieved == pytest.approx(-1.0)
        assert not rep.meets_target or rep.target <= -1.0

    def test_single_direction_is_perfect(self):
        rep = truncation.sectoriality_check([[0.0, 2.0]])
        assert rep.kappa_achieved == pytest.approx(1.0, rel=1e-12)

    def test_explicit_direction_evaluated(self):
        rep = truncation.sectoriality_check(
            [[1.0, 0.0], [0.0, 1.0]], x0=[1.0, 0.0], kappa=0.5
        )
        assert rep.kappa_achieved == pytest.approx(0.0, abs=1e-12)
        assert not rep.meets_target
        assert len(rep.offending_samples) == 1

    def test_zero_samples_skipped(self):
        rep = truncation.sectoriality_check([[0.0, 0.0], [1.0, 0.0]])
        assert rep.skipped_zero == 1
        assert rep.kappa_achieved == pytest.approx(1.0)

    def test_all_zero_rejected(self):
        with pytest.raises(ParameterError):
            truncation.sectoriality_check([[0.0, 0.0]])

    def test_three_dimensional_search_beats_random_directions(self):
        rng = np.random.default_rng(40)
        # samples in a cone around e3: a sectorial family
        raw = rng.normal(size=(12, 3))
        raw[:, 2] = np.abs(raw[:, 2]) + 1.0
        rep = truncation.sectoriality_check(raw)
        # oracle: dense random direction search gives a lower bound on the max
        units = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        dirs = rng.normal(size=(20000, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        random_best = np.max(np.min(units @ dirs.T, axis=0))
        assert rep.kappa_achieved >= random_best - 1e-3
        assert rep.kappa_achieved > 0


class TestSectorialMultiplier:
    def test_cauchy_domination_is_exact_on_plateau(self):
        k = kernels.make_cauchy()
        M = truncation.build_sectorial_multiplier(k.profile, r=1.0, dimension=2)
        rng = np.random.default_rng(41)
        # pairs with |s - t| in the plateau [0.9, 1.0]
        s = rng.normal(size=(200, 2))
        radii = rng.uniform(0.9, 1.0, 200)
        angles = rng.uniform(0, 2 * np.pi, 200)
        t = s + radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
        mk = np.sum(M(s, t) * k.evaluate(s, t), axis=-1)
        kk = np.linalg.norm(k.evaluate(s, t), axis=-1)
        # |B| = 1 on the circle, so M K = |K| exactly there
        assert np.allclose(mk, kk, rtol=1e-10)

    def test_vanishes_near_the_diagonal(self):
        k = kernels.make_cauchy()
        M = truncation.build_sectorial_multiplier(k.profile, r=1.0, dimension=2)
        s = np.array([[0.0, 0.0]])
        t = np.array([[0.1, 0.1]])  # |s - t| = 0.14 << 0.8
        assert np.allclose(M(s, t), 0.0)
        assert M.vanishes_at_zero

    def test_vanishing_spherical_profile_refused(self):
        spherical = lambda th: th[..., 0]  # vanishes at theta = (0, +-1)
        with pytest.raises(NotSectorializableError):
            truncation.build_sectorial_multiplier(spherical, r=1.0, dimension=2)

    def test_profile_requires_dimension(self):
        k = kernels.make_cauchy()
        with pytest.raises(ParameterError):
            truncation.build_sectorial_multiplier(k.profile, r=1.0)


class TestCompareTruncations:
    @staticmethod
    def _interleaved_1d(h=2.0**-6):
        mu = measure.lebesgue_grid(0.0, 1.0, h)
        nu = measure.lebesgue_grid(h / 2.0, 1.0, h)
        return mu, nu

    def test_triangle_inequality_and_split(self):
        mu, nu = self._interleaved_1d()
        rows = truncation.compare_truncations(
            kernels.make_hilbert(), mu, nu, eps_list=[0.05, 0.2, 1.0]
        )
        for row in rows:
            assert row.norm_truncated <= (
                row.norm_smooth + row.norm_psi_part + 1e-9
            )
            assert row.norm_psi_part >= 0

    def test_scalar_kernel_reports_no_sector_data(self):
        mu, nu = self._interleaved_1d()
        (row,) = truncation.compare_truncations(
            kernels.make_hilbert(), mu, nu, eps_list=[0.1]
        )
        assert np.isnan(row.kappa)

    def test_vector_kernel_domination_margin(self):
        h = 2.0**-4
        mu = measure.lebesgue_grid([0.0, 0.0], 1.0, h, dimension=2)
        nu = measure.lebesgue_grid([h / 2, h / 2], 1.0, h, dimension=2)
        (row,) = truncation.compare_truncations(
            kernels.make_cauchy(), mu, nu, eps_list=[0.3]
        )
        assert row.annulus_pairs > 0
        assert row.kappa >= 1.0 - 1e-9
        assert row.domination_margin >= -1e-12

    def test_no_annulus_pairs_gives_infinite_margin(self):
        mu = measure.from_points([[0.0, 0.0]], [1.0])
        nu = measure.from_points([[3.0, 4.0]], [1.0])
        (row,) = truncation.compare_truncations(
            kernels.make_cauchy(), mu, nu, eps_list=[0.1]
        )
        assert row.annulus_pairs == 0
        assert np.isinf(row.domination_margin)

    def test_small_eps_matches_untruncated_norm(self):
        # below the minimum support distance the hard truncation is the
        # whole kernel and the smooth one agrees on every populated pair
        mu, nu = self._interleaved_1d(h=2.0**-4)
        (row,) = truncation.compare_truncations(
            kernels.make_hilbert(), mu, nu, eps_list=[2.0**-6]
        )
        assert row.norm_truncated == pytest.approx(row.norm_smooth, rel=1e-9)
        assert row.norm_psi_part <= 1e-12

    def test_common_atoms_rejected(self):
        m = measure.from_points([[0.5], [0.25]], [1, 1], atomic=True)
        with pytest.raises(CommonAtomsError):
            truncation.compare_truncations(
                kernels.make_hilbert(), m, m, eps_list=[0.1]
            )

    def test_delta_validation(self):
        mu, nu = self._interleaved_1d()
        with pytest.raises(ParameterError):
            truncation.compare_truncations(
                kernels.make_hilbert(), mu, nu, delta=1.5
            )
