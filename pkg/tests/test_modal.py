import math

import numpy as np
import pytest

from visco_inverse import (
    ExponentialKernel,
    OperatorSpec,
    SampledKernel,
    TimeGrid,
    ZeroKernel,
    build_spectral_model,
    comparison_defect,
    comparison_defect_scan,
    comparison_exponential,
    solve_w,
    solve_z,
)
from oracles import modal_oracle_exponential_kernel

PI = math.pi


@pytest.fixture(scope="module")
def model():
    return build_spectral_model(OperatorSpec(PI), 16)


@pytest.fixture(scope="module")
def grid():
    return TimeGrid.from_step(1.0, 1e-3)


class TestMemoryless:
    def test_plain_exponential_solution(self, model, grid):
        traj = solve_z(model.mode(3), ZeroKernel(), grid)
        exact = np.exp(3j * grid.nodes)
        assert np.max(np.abs(traj.z.values - exact)) < 5e-6
        assert np.max(np.abs(np.abs(traj.z.values) - 1.0)) < 1e-10

    def test_w_is_plain_sine(self, model, grid):
        traj = solve_w(model.mode(2), ZeroKernel(), grid)
        assert np.max(np.abs(traj.z.values - np.sin(2 * grid.nodes))) < 5e-6

    def test_imaginary_branch_grows_like_cosh(self, grid):
        # mu_1 = -1 makes lambda = i; the two signed trajectories are the
        # real exponentials e^(-t) and e^(t)
        model = build_spectral_model(OperatorSpec(PI, -2.0), 1)
        zp = solve_z(model.mode(1), ZeroKernel(), grid)
        zm = solve_z(model.mode(-1), ZeroKernel(), grid)
        assert np.max(np.abs(zp.z.values - np.exp(-grid.nodes))) < 1e-6
        assert np.max(np.abs(zm.z.values - np.exp(grid.nodes))) < 1e-6


@pytest.fixture(scope="module")
def j0_model():
    return build_spectral_model(OperatorSpec(PI, -1.0), 2)


class TestZeroBranch:
    def test_z_closed_form(self, j0_model, grid):
        for n, sign in ((1, 1.0), (-1, -1.0)):
            traj = solve_z(j0_model.mode(n), ExponentialKernel(1.0, 1.0), grid)
            np.testing.assert_array_equal(traj.z.values, 1.0 + 1j * sign * grid.nodes)

    def test_w_closed_form(self, j0_model, grid):
        traj = solve_w(j0_model.mode(1), ExponentialKernel(1.0, 1.0), grid)
        np.testing.assert_array_equal(traj.z.values.real, grid.nodes)

    def test_comparison_matches_z_exactly(self, j0_model, grid):
        cmp_sig = comparison_exponential(j0_model.mode(1), ZeroKernel(), grid)
        traj = solve_z(j0_model.mode(1), ZeroKernel(), grid)
        np.testing.assert_array_equal(cmp_sig.values, traj.z.values)

    def test_defect_rejected(self, j0_model, grid):
        with pytest.raises(ValueError):
            comparison_defect(j0_model.mode(1), ZeroKernel(), grid)


class TestAgainstAugmentedOracle:
    def test_memory_trajectory(self, model):
        g = TimeGrid.from_step(1.0, 1e-4)
        kernel = ExponentialKernel(0.5, 1.0)
        traj = solve_z(model.mode(2), kernel, g)
        exact = modal_oracle_exponential_kernel(2.0, 0.5, 1.0, g)
        assert np.max(np.abs(traj.z.values - exact)) < 1e-7

    def test_second_order_refinement(self, model):
        kernel = ExponentialKernel(0.5, 1.0)
        errs = []
        for dt in (4e-3, 2e-3, 1e-3):
            g = TimeGrid.from_step(1.0, dt)
            traj = solve_z(model.mode(2), kernel, g)
            exact = modal_oracle_exponential_kernel(2.0, 0.5, 1.0, g)
            errs.append(np.max(np.abs(traj.z.values - exact)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.15)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.15)

    def test_initial_data(self, model, grid):
        kernel = ExponentialKernel(1.0, 1.0)
        z = solve_z(model.mode(4), kernel, grid)
        assert z.z.values[0] == 1.0
        assert z.z_prime.values[0] == 4j
        w = solve_w(model.mode(4), kernel, grid)
        assert w.z.values[0] == 0.0
        assert w.z_prime.values[0] == 4.0


class TestStructuralIdentities:
    def test_w_matches_z_difference_exactly(self, model, grid):
        kernel = ExponentialKernel(1.0, 1.0)
        zp = solve_z(model.mode(5), kernel, grid)
        zm = solve_z(model.mode(-5), kernel, grid)
        w = solve_w(model.mode(5), kernel, grid)
        gap = w.z.values - (zp.z.values - zm.z.values) / 2j
        assert np.max(np.abs(gap)) < 1e-14

    def test_conjugation_symmetry(self, model, grid):
        kernel = ExponentialKernel(0.8, 0.5)
        zp = solve_z(model.mode(6), kernel, grid)
        zm = solve_z(model.mode(-6), kernel, grid)
        assert np.max(np.abs(zm.z.values - np.conj(zp.z.values))) < 1e-14

    def test_w_is_real_for_real_data(self, model, grid):
        w = solve_w(model.mode(3), ExponentialKernel(1.0, 1.0), grid)
        assert np.max(np.abs(w.z.values.imag)) < 1e-10

    def test_exponential_recursion_equals_stored_history(self, model):
        # the O(1) history recursion must reproduce the naive trapezoid sum
        g = TimeGrid.from_step(1.0, 1e-2)
        kernel = ExponentialKernel(0.7, 1.3)
        sampled = SampledKernel(kernel.sample(g), m0=kernel.at_zero())
        fast = solve_z(model.mode(5), kernel, g)
        slow = solve_z(model.mode(5), sampled, g)
        assert np.max(np.abs(fast.z.values - slow.z.values)) < 1e-13

    def test_polynomial_kernel_goes_through_stored_history(self, model):
        from visco_inverse import PolynomialKernel

        g = TimeGrid.from_step(1.0, 1e-2)
        poly = PolynomialKernel((1.0, -0.5))
        sampled = SampledKernel(poly.sample(g), m0=poly.at_zero())
        a = solve_z(model.mode(4), poly, g)
        b = solve_z(model.mode(4), sampled, g)
        np.testing.assert_array_equal(a.z.values, b.z.values)


class TestComparison:
    def test_memoryless_comparison(self, model, grid):
        cmp_sig = comparison_exponential(model.mode(3), ZeroKernel(), grid)
        np.testing.assert_allclose(cmp_sig.values, np.exp(3j * grid.nodes), atol=1e-12)

    def test_growth_rate_is_half_m0(self, model, grid):
        cmp_sig = comparison_exponential(model.mode(2), ExponentialKernel(0.8, 3.0), grid)
        np.testing.assert_allclose(
            cmp_sig.values, np.exp((0.4 + 2j) * grid.nodes), atol=1e-12
        )

    def test_sampled_kernel_without_m0_rejected(self, model, grid):
        kernel = SampledKernel(np.ones(grid.steps + 1))
        with pytest.raises(ValueError):
            comparison_exponential(model.mode(2), kernel, grid)

    def test_zero_memory_defect_vanishes(self, model, grid):
        assert comparison_defect(model.mode(2), ZeroKernel(), grid) < 1e-9

    def test_defect_bounded_over_modes(self):
        model = build_spectral_model(OperatorSpec(PI), 24)
        g = TimeGrid.from_step(2 * PI + 0.5, 2e-4)
        defects = comparison_defect_scan(model, ExponentialKernel(1.0, 1.0), g, range(8, 25), chunk=8)
        # no growth trend: later values stay within a factor two of n = 8
        assert defects[1:].max() <= 2.0 * defects[0]

    def test_scan_matches_single_mode(self, model):
        g = TimeGrid.from_step(1.0, 1e-3)
        kernel = ExponentialKernel(1.0, 1.0)
        scan = comparison_defect_scan(model, kernel, g, [4, 7])
        assert scan[0] == pytest.approx(comparison_defect(model.mode(4), kernel, g), rel=1e-12)
        assert scan[1] == pytest.approx(comparison_defect(model.mode(7), kernel, g), rel=1e-12)

    def test_scan_rejects_zero_branch(self, grid):
        model = build_spectral_model(OperatorSpec(PI, -1.0), 2)
        with pytest.raises(ValueError):
            comparison_defect_scan(model, ZeroKernel(), grid, [1, 2])
