import math

import numpy as np
import pytest

from aggdiff import density, fv, kernels


@pytest.fixture(scope="module")
def gauss():
    return kernels.gaussian()


@pytest.fixture()
def zero_kernel():
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return kernels.InteractionKernel(z, z, z, l1_norm=0.0, concave_radius=None)


def state_from(values, dx=0.1, x_left=None):
    values = np.asarray(values, dtype=float)
    if x_left is None:
        x_left = -0.5 * dx * values.size
    return fv.FvState(0.0, density.GridDensity(x_left, dx, values))


class TestMinmod:
    def test_all_positive_takes_smallest(self):
        assert fv.minmod(1.0, 2.0, 3.0) == 1.0

    def test_all_negative_takes_largest(self):
        assert fv.minmod(-1.0, -2.0, -3.0) == -1.0

    def test_mixed_signs_zero(self):
        assert fv.minmod(-1.0, 2.0, 3.0) == 0.0

    def test_vectorized(self):
        got = fv.minmod(
            np.array([1.0, -1.0, -1.0, 0.0]),
            np.array([2.0, -2.0, 2.0, 5.0]),
            np.array([3.0, -3.0, 3.0, 2.0]),
        )
        np.testing.assert_array_equal(got, [1.0, -1.0, 0.0, 0.0])


class TestLimitedSlope:
    def test_linear_data_recovers_slope(self):
        dx = 0.1
        x = np.arange(8) * dx
        st = state_from(3.0 * x, dx=dx, x_left=-0.05)
        for i in range(1, 7):
            assert fv.limited_slope(st, i) == pytest.approx(3.0, abs=1e-12)

    def test_local_max_flattens(self):
        st = state_from([0.0, 1.0, 0.0])
        assert fv.limited_slope(st, 1) == 0.0

    def test_boundary_cells_use_zero_slope(self):
        st = state_from([1.0, 2.0, 3.0, 4.0])
        assert fv.limited_slope(st, 0) == 0.0
        assert fv.limited_slope(st, 3) == 0.0


class TestEdgeVelocity:
    def test_zero_state(self, gauss):
        st = state_from(np.zeros(10))
        for i in range(9):
            assert fv.edge_velocity(st, gauss, 0.5, i) == 0.0

    def test_diffusive_downhill(self, zero_kernel):
        # no interaction, increasing profile: velocity points down-gradient
        st = state_from([0.0, 1.0, 2.0, 3.0])
        for i in range(3):
            v = fv.edge_velocity(st, zero_kernel, 0.5, i)
            assert v == pytest.approx(-0.5 / 0.1, abs=1e-13)

    def test_single_occupied_cell_kernel_difference(self, gauss):
        dx = 0.1
        vals = np.zeros(9)
        vals[4] = 2.0
        st = state_from(vals, dx=dx)
        centers = st.density.centers
        for i in (5, 6, 7):
            expected = 2.0 * (gauss(centers[i + 1] - centers[4]) - gauss(centers[i] - centers[4]))
            assert fv.edge_velocity(st, gauss, 0.0, i) == pytest.approx(expected, abs=1e-14)
            assert expected < 0.0  # attraction pulls right-lying mass leftward


class TestNumericalFlux:
    def test_zero_state(self, gauss):
        st = state_from(np.zeros(10))
        assert fv.numerical_flux(st, gauss, 0.5, 4) == 0.0

    def test_flat_state_flux_is_velocity_times_value(self, gauss):
        st = state_from(np.full(20, 0.7), dx=0.05)
        for i in (3, 9, 15):
            u = fv.edge_velocity(st, gauss, 0.0, i)
            assert fv.numerical_flux(st, gauss, 0.0, i) == pytest.approx(0.7 * u, abs=1e-14)

    def test_upwind_pairing_uses_downwind_cell_for_negative_velocity(self, gauss):
        rng = np.random.default_rng(3)
        st = state_from(rng.uniform(0.2, 1.0, size=16), dx=0.05)
        dx = st.density.dx
        rho = st.density.cell_avg
        for i in range(1, 14):
            u = fv.edge_velocity(st, gauss, 0.3, i)
            if u > 0:
                expected = u * (rho[i] + 0.5 * dx * fv.limited_slope(st, i))
            else:
                expected = u * (rho[i + 1] - 0.5 * dx * fv.limited_slope(st, i + 1))
            assert fv.numerical_flux(st, gauss, 0.3, i) == pytest.approx(expected, rel=1e-12)

    def test_reconstruction_stays_nonnegative(self, gauss):
        rng = np.random.default_rng(17)
        for _ in range(20):
            vals = rng.uniform(0.0, 2.0, size=30)
            vals[rng.uniform(size=30) < 0.3] = 0.0
            st = state_from(vals, dx=0.05)
            dx = st.density.dx
            for i in range(30):
                s = fv.limited_slope(st, i)
                assert vals[i] + 0.5 * dx * s >= -1e-14
                assert vals[i] - 0.5 * dx * s >= -1e-14


class TestRhs:
    def test_zero_state(self, gauss):
        st = state_from(np.zeros(12))
        np.testing.assert_array_equal(fv.rhs(st, gauss, 0.5), np.zeros(12))

    def test_mass_conservation_on_random_states(self, gauss):
        rng = np.random.default_rng(23)
        for _ in range(10):
            st = state_from(rng.uniform(0.0, 3.0, size=50), dx=0.02)
            out = fv.rhs(st, gauss, 0.7)
            total = out.sum() * st.density.dx
            # telescoping fluxes cancel exactly up to float roundoff at the
            # scale of the individual entries
            assert abs(total) < 50 * 1e-15 * np.abs(out).max() * st.density.dx

    def test_even_symmetry(self, gauss):
        rho0 = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.01)
        out = fv.rhs(fv.FvState(0.0, rho0), gauss, 0.5)
        np.testing.assert_allclose(out, out[::-1], rtol=0, atol=1e-11)


class TestSspStep:
    def test_zero_state_unchanged(self, gauss):
        st = state_from(np.zeros(10))
        cfg = fv.FvConfig(epsilon=0.5, t_end=1.0)
        out = fv.ssp_rk3_step(st, gauss, cfg, 1e-3)
        np.testing.assert_array_equal(out.density.cell_avg, np.zeros(10))
        assert out.time == pytest.approx(1e-3)

    def test_mass_preserved(self, gauss):
        rho0 = density.build_initial(density.UniformBox(0.5), (-2.0, 2.0), 0.01)
        cfg = fv.FvConfig(epsilon=2.0, t_end=1.0)
        out = fv.ssp_rk3_step(fv.FvState(0.0, rho0), gauss, cfg, 1e-5)
        assert density.mass(out.density) == pytest.approx(1.0, rel=1e-12)

    @staticmethod
    def _euler_reference(rho0, kernel, epsilon, dt, substeps=100):
        h = dt / substeps
        st = fv.FvState(0.0, rho0)
        vals = rho0.cell_avg.copy()
        for _ in range(substeps):
            vals = vals + h * fv.rhs(st, kernel, epsilon)
            st = fv.FvState(st.time + h, rho0.with_values(vals))
        return vals

    def test_box_step_matches_small_step_euler_oracle(self, gauss):
        rho0 = density.build_initial(density.UniformBox(0.5), (-2.0, 2.0), 0.01)
        cfg = fv.FvConfig(epsilon=2.0, t_end=1.0)
        dt = 2.5e-6  # a quarter of the stability limit, clear of limiter switching
        stepped = fv.ssp_rk3_step(fv.FvState(0.0, rho0), gauss, cfg, dt)
        ref = self._euler_reference(rho0, gauss, cfg.epsilon, dt)
        np.testing.assert_allclose(stepped.density.cell_avg, ref, rtol=0, atol=5e-5)

    def test_smooth_step_agreement_is_second_order(self, gauss):
        rho0 = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.01)
        cfg = fv.FvConfig(epsilon=0.5, t_end=1.0)
        diffs = {}
        for dt in (1e-5, 2.5e-6):
            stepped = fv.ssp_rk3_step(fv.FvState(0.0, rho0), gauss, cfg, dt)
            ref = self._euler_reference(rho0, gauss, cfg.epsilon, dt)
            diffs[dt] = np.abs(stepped.density.cell_avg - ref).max()
        assert diffs[1e-5] < 1e-9
        assert diffs[1e-5] / diffs[2.5e-6] > 8.0  # quartering dt: second order or better

    def test_rejects_unstable_dt(self, gauss):
        rho0 = density.build_initial(density.UniformBox(0.5), (-2.0, 2.0), 0.01)
        cfg = fv.FvConfig(epsilon=2.0, t_end=1.0)
        with pytest.raises(ValueError):
            fv.ssp_rk3_step(fv.FvState(0.0, rho0), gauss, cfg, 1e-2)


class TestStableDt:
    def test_no_restriction_without_velocity_or_diffusion(self):
        assert fv.stable_dt(0.0, 1.0, 0.1, 0.0, 0.4) == math.inf

    def test_advective_bound(self):
        assert fv.stable_dt(2.0, 1.0, 0.1, 0.0, 0.4) == pytest.approx(0.4 * 0.1 / 2.0)

    def test_diffusive_bound_scales_with_density_peak(self):
        base = fv.stable_dt(0.0, 1.0, 0.1, 1.0, 0.4)
        assert base == pytest.approx(0.4 * 0.01 / 2.0)
        # peaks above one tighten the bound; peaks below one do not relax it
        assert fv.stable_dt(0.0, 4.0, 0.1, 1.0, 0.4) == pytest.approx(base / 4.0)
        assert fv.stable_dt(0.0, 0.25, 0.1, 1.0, 0.4) == pytest.approx(base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            fv.FvConfig(epsilon=-0.1, t_end=1.0)
        with pytest.raises(ValueError):
            fv.FvConfig(epsilon=0.1, t_end=1.0, cfl=1.5)
        with pytest.raises(ValueError):
            fv.FvConfig(epsilon=0.1, t_end=0.0)


class TestRun:
    def test_snapshots_and_diagnostics_cadence(self, gauss):
        rho0 = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.02)
        cfg = fv.FvConfig(epsilon=0.5, t_end=0.2, snapshot_times=[0.05, 0.2])
        res = fv.run(rho0, gauss, cfg, diagnostics_dt=0.1)
        assert [s.time for s in res.snapshots] == [0.05, 0.2]
        assert [row.t for row in res.diagnostics] == [0.0, 0.1, 0.2]
        assert res.final.time == 0.2
        for row in res.diagnostics:
            assert row.mass == pytest.approx(1.0, abs=1e-11)
            assert row.dissipation >= 0.0
        for snap in res.snapshots:
            assert snap.density.cell_avg.min() >= 0.0

    def test_determinism(self, gauss):
        rho0 = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.02)
        cfg = fv.FvConfig(epsilon=0.5, t_end=0.1)
        a = fv.run(rho0, gauss, cfg)
        b = fv.run(rho0, gauss, cfg)
        assert np.array_equal(a.final.density.cell_avg, b.final.density.cell_avg)
        assert a.n_steps == b.n_steps

    def test_symmetry_preserved(self, gauss):
        rho0 = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.01)
        res = fv.run(rho0, gauss, fv.FvConfig(epsilon=0.5, t_end=0.25))
        vals = res.final.density.cell_avg
        assert np.abs(vals - vals[::-1]).max() < 1e-10

    def test_boundary_leak_aborts(self, gauss):
        rho0 = density.build_initial(density.UniformBox(1.0), (-1.2, 1.2), 0.02)
        with pytest.raises(fv.FvAbort):
            fv.run(rho0, gauss, fv.FvConfig(epsilon=2.0, t_end=5.0))

    def test_non_finite_aborts(self, gauss):
        vals = np.full(100, 0.5)
        vals[50] = math.nan
        bad = density.GridDensity(-1.0, 0.02, vals)
        with pytest.raises(fv.FvAbort):
            fv.run(bad, gauss, fv.FvConfig(epsilon=0.5, t_end=0.1))

    def test_reference_populates_w2_column(self, gauss):
        rho0 = density.build_initial(density.Parabola(9 / 8, 9 / 4), (-2.0, 2.0), 0.02)
        cfg = fv.FvConfig(epsilon=0.5, t_end=0.05)
        res = fv.run(rho0, gauss, cfg, reference=rho0, diagnostics_dt=0.05)
        assert res.diagnostics[0].w2_to_ref == pytest.approx(0.0, abs=1e-14)
        assert res.diagnostics[-1].w2_to_ref > 0.0

    def test_grid_refinement_first_order_or_better(self, gauss):
        # halving dx should cut the transport error against a fine reference
        # by at least a factor of about two
        spec = density.Parabola(21 / 8, 49 / 4)
        sols = {}
        for dx in (0.1, 0.05, 0.025, 0.0125):
            rho0 = density.build_initial(spec, (-6.0, 6.0), dx)
            sols[dx] = fv.run(rho0, gauss, fv.FvConfig(epsilon=2.0, t_end=2.0)).final.density
        ref = sols[0.0125]
        err = {dx: density.wasserstein_p(sols[dx], ref, 2) for dx in (0.1, 0.05, 0.025)}
        assert err[0.1] / err[0.05] > 1.8
        assert err[0.05] / err[0.025] > 1.8
