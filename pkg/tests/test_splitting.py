import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_field, random_state
from oracles import naive_eval, naive_rhs, naive_split_step, wave_average_quadrature, naive_dft
from zaksplit.errors import CFLError, GridMismatchError, NumericBlowupError
from zaksplit.experiments import random_state as smooth_random_state
from zaksplit.spectral import (
    Grid,
    SpectralField,
    abs_squared,
    evaluate_nodes,
    pair_norm,
    sobolev_norm,
)
from zaksplit.splitting import (
    DEFAULT_CFL_CONSTANT,
    CFLWarning,
    StepperConfig,
    ZakharovState,
    cfl_check,
    flow_free,
    integrate_splitting,
    iterate_splitting,
    lie_trotter_step,
    make_initial_w,
    semidiscrete_rhs,
    steps_to_reach,
    v_post,
    v_pre,
    w_coefficients,
    wave_rotation,
)


class TestCFL:
    def test_below_limit(self):
        status = cfl_check(Grid(1, 2**8), StepperConfig(9.5e-5, 2 * math.pi - 1e-9))
        assert status.satisfied
        assert status.ratio == pytest.approx(6.22592, abs=1e-5)

    def test_above_limit(self):
        with pytest.warns(CFLWarning):
            status = cfl_check(Grid(1, 2**8), StepperConfig(9.7e-5))
        assert not status.satisfied
        assert status.ratio == pytest.approx(6.356992, abs=1e-6)

    def test_enforced_raises(self):
        with pytest.raises(CFLError) as info:
            cfl_check(Grid(1, 2**8), StepperConfig(9.7e-5, enforce_cfl=True))
        assert info.value.ratio > info.value.limit

    def test_tiny_step(self):
        assert cfl_check(Grid(3, 2**10), StepperConfig(1e-12)).satisfied

    def test_equality_counts_as_satisfied(self):
        K = 4
        tau = 2.0 / K**2
        assert cfl_check(Grid(1, K), StepperConfig(tau, 2.0)).satisfied

    def test_dimension_enters(self):
        assert cfl_check(Grid(2, 4), StepperConfig(0.1, 5.0), warn=False).ratio == pytest.approx(3.2)

    @pytest.mark.parametrize("c", [0.0, 2 * math.pi, 7.0])
    def test_constant_range(self, c):
        with pytest.raises(ValueError):
            StepperConfig(1e-3, c)

    def test_default_constant_just_below_two_pi(self):
        assert DEFAULT_CFL_CONSTANT < 2 * math.pi
        assert 2 * math.pi - DEFAULT_CFL_CONSTANT < 1e-15


class TestFreeFlow:
    def test_zero_time(self, rng):
        s = random_state(Grid(1, 8), rng)
        np.testing.assert_array_equal(flow_free(s, 0.0).psi.coeffs, s.psi.coeffs)

    def test_mode_phase(self):
        g = Grid(1, 8)
        s = ZakharovState(SpectralField.single_mode(g, 3), *[SpectralField.zeros(g)] * 2, 0.0)
        out = flow_free(s, 0.37)
        assert out.psi.coefficient(3) == pytest.approx(np.exp(-0.37j * 9), abs=1e-15)
        assert sobolev_norm(out.psi, 0) == pytest.approx(1.0)
        assert out.time == pytest.approx(0.37)

    def test_group_property(self, rng):
        s = random_state(Grid(2, 4), rng)
        back = flow_free(flow_free(s, 0.81), -0.81)
        np.testing.assert_allclose(back.psi.coeffs, s.psi.coeffs, atol=1e-13)
        assert back.u is s.u

    def test_isometry(self, rng):
        s = random_state(Grid(1, 16), rng)
        assert sobolev_norm(flow_free(s, 2.3).psi, 0) == pytest.approx(sobolev_norm(s.psi, 0), rel=1e-14)


class TestAverages:
    def test_v_pre_trivial_cases(self):
        g = Grid(1, 8)
        z = SpectralField.zeros(g)
        s = ZakharovState(SpectralField.constant(g, 1.5), z, z, 0.0)
        assert np.abs(v_pre(s, 0.01).coeffs).max() < 1e-15
        s = ZakharovState(z, SpectralField.constant(g, 0.7), z, 0.0)
        np.testing.assert_allclose(v_pre(s, 0.01).coeffs, SpectralField.constant(g, 0.7).coeffs)

    @pytest.mark.parametrize("tau", [1e-3, 0.05])
    def test_v_pre_matches_quadrature(self, rng, tau):
        K = 8
        s = random_state(Grid(1, K), rng)
        rho = naive_dft([abs(z) ** 2 for z in naive_eval(s.psi.coeffs, K)], K)
        oracle = wave_average_quadrature(s.u.coeffs, s.udot.coeffs, rho, K, tau)
        np.testing.assert_allclose(v_pre(s, tau).coeffs, oracle, rtol=0, atol=1e-10)

    def test_v_post_trivial_cases(self):
        g = Grid(1, 8)
        z = SpectralField.zeros(g)
        assert np.abs(v_post(ZakharovState.zeros(g), z, 0.1).coeffs).max() == 0
        s = ZakharovState(z, SpectralField.constant(g, -2.0), z, 0.0)
        np.testing.assert_allclose(v_post(s, z, 0.1).coeffs, SpectralField.constant(g, -2.0).coeffs)

    @pytest.mark.parametrize("d,K,tau", [(1, 8, 1e-3), (1, 16, 0.02), (2, 4, 0.05)])
    def test_pre_post_identity(self, rng, d, K, tau):
        s = random_state(Grid(d, K), rng)
        s1 = lie_trotter_step(s, StepperConfig(tau))
        np.testing.assert_allclose(v_post(s1, s.psi, tau).coeffs, v_pre(s, tau).coeffs, atol=1e-12)


class TestStep:
    def test_zero_state(self):
        g = Grid(1, 8)
        out = lie_trotter_step(ZakharovState.zeros(g), StepperConfig(0.01))
        assert not out.psi.coeffs.any() and not out.u.coeffs.any() and not out.udot.coeffs.any()
        assert out.time == pytest.approx(0.01)

    def test_constant_psi_is_fixed_point(self):
        g = Grid(1, 8)
        z = SpectralField.zeros(g)
        s = ZakharovState(SpectralField.constant(g, 0.4 - 0.3j), z, z, 0.0)
        out = lie_trotter_step(s, StepperConfig(0.01))
        np.testing.assert_allclose(out.psi.coeffs, s.psi.coeffs, atol=1e-15)
        assert np.abs(out.u.coeffs).max() < 1e-15
        assert np.abs(out.udot.coeffs).max() < 1e-15

    def test_matches_straight_line_oracle(self):
        K, tau = 8, 1e-3
        s = make_initial_w(Grid(1, K))
        out = lie_trotter_step(s, StepperConfig(tau))
        psi, u, udot = naive_split_step(s.psi.coeffs, s.u.coeffs, s.udot.coeffs, K, tau)
        np.testing.assert_allclose(out.psi.coeffs, psi, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.u.coeffs, u, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.udot.coeffs, udot, rtol=0, atol=1e-12)

    def test_random_matches_oracle_several_steps(self, rng):
        K, tau = 8, 0.05
        s = random_state(Grid(1, K), rng)
        psi, u, udot = s.psi.coeffs, s.u.coeffs, s.udot.coeffs
        for _ in range(5):
            psi, u, udot = naive_split_step(psi, u, udot, K, tau)
        out = integrate_splitting(s, StepperConfig(tau), 5)
        np.testing.assert_allclose(out.psi.coeffs, psi, atol=1e-12)
        np.testing.assert_allclose(out.u.coeffs, u, atol=1e-12)

    def test_kick_preserves_node_moduli(self):
        g = Grid(1, 16)
        tau = 0.01
        s = make_initial_w(g)
        out = lie_trotter_step(s, StepperConfig(tau))
        kicked = flow_free(out, -tau).psi
        np.testing.assert_allclose(
            np.abs(evaluate_nodes(kicked)), np.abs(evaluate_nodes(s.psi)), rtol=0, atol=1e-12
        )
        assert np.abs(evaluate_nodes(v_pre(s, tau)).imag).max() < 1e-12

    def test_real_wave_fields_stay_real(self):
        g = Grid(1, 32)
        s = make_initial_w(g)
        for st_ in iterate_splitting(s, StepperConfig(5e-3)):
            assert np.abs(evaluate_nodes(st_.u).imag).max() < 1e-8
            assert np.abs(evaluate_nodes(st_.udot).imag).max() < 1e-8
            if st_.time >= 0.5 - 1e-12:
                break

    def test_warns_on_violation(self, rng):
        s = random_state(Grid(1, 8), rng, scale=1e-3)
        with pytest.warns(CFLWarning):
            lie_trotter_step(s, StepperConfig(0.2))

    def test_enforced_violation(self, rng):
        s = random_state(Grid(1, 8), rng)
        with pytest.raises(CFLError):
            lie_trotter_step(s, StepperConfig(0.2, enforce_cfl=True))

    def test_blowup_reported_with_step(self):
        g = Grid(1, 4)
        z = SpectralField.zeros(g)
        s = ZakharovState(SpectralField.constant(g, 1e200), z, z, 0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(NumericBlowupError) as info:
                lie_trotter_step(s, StepperConfig(0.1), step_index=7)
        assert info.value.step == 7

    def test_iterate_reports_step_index(self):
        g = Grid(1, 4)
        s = ZakharovState(SpectralField.constant(g, 1e154), *[SpectralField.zeros(g)] * 2, 0.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(NumericBlowupError) as info:
                integrate_splitting(s, StepperConfig(0.1), 10)
        assert 1 <= info.value.step <= 10

    def test_steps_to_reach(self):
        assert steps_to_reach(0.5, 1e-3) == 500
        with pytest.raises(ValueError):
            steps_to_reach(0.5, 0.3)


class TestWaveRotation:
    def test_zero_time(self, rng):
        g = Grid(1, 8)
        u, ud = random_field(g, rng), random_field(g, rng)
        a, b = wave_rotation(u, ud, 0.0)
        np.testing.assert_array_equal(a.coeffs, u.coeffs)
        np.testing.assert_array_equal(b.coeffs, ud.coeffs)

    def test_zero_mode_free_particle(self):
        g = Grid(1, 8)
        a, b = wave_rotation(SpectralField.constant(g, 2.0), SpectralField.constant(g, 3.0), 0.5)
        assert a.coefficient(0) == pytest.approx(3.5)
        assert b.coefficient(0) == pytest.approx(3.0)

    def test_energy_preserved(self, rng):
        g = Grid(1, 16)
        u, ud = random_field(g, rng), random_field(g, rng)
        a, b = wave_rotation(u, ud, 0.731)
        w2 = g.omega_sq
        nz = w2 > 0
        e0 = (w2 * abs(u.coeffs) ** 2 + abs(ud.coeffs) ** 2)[nz]
        e1 = (w2 * abs(a.coeffs) ** 2 + abs(b.coeffs) ** 2)[nz]
        np.testing.assert_allclose(e1, e0, rtol=1e-13)

    def test_grid_mismatch(self):
        with pytest.raises(GridMismatchError):
            wave_rotation(SpectralField.zeros(Grid(1, 4)), SpectralField.zeros(Grid(1, 8)), 0.1)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), s=st.floats(0, 4), t=st.floats(-3, 3))
    def test_almost_norm_preserving(self, seed, s, t):
        rng = np.random.default_rng(seed)
        g = Grid(1, 16)
        u, ud = random_field(g, rng, decay=2), random_field(g, rng, decay=1)
        a, b = wave_rotation(u, ud, t)
        assert pair_norm(a, b, s) <= (1 + abs(t)) * pair_norm(u, ud, s) * (1 + 1e-12)


def _rotation_minus_one_constant(K, tau, s=1.0):
    """sup over pairs of |||(R-1)(v,vdot)|||_s / (tau |||(v,vdot)|||_{s+1}), mode by mode."""
    best = 0.0
    for j in range(-K, K):
        w, wt = abs(j), max(abs(j), 1)
        sc = 1.0 if w == 0 else math.sin(tau * w) / (tau * w)
        m = np.array([[math.cos(tau * w) - 1, tau * sc], [-w * math.sin(tau * w), math.cos(tau * w) - 1]])
        left = np.diag([wt ** (s + 1), wt**s])
        right = np.diag([wt ** -(s + 2), wt ** -(s + 1)])
        best = max(best, np.linalg.norm(left @ m @ right, 2) / tau)
    return best


class TestRotationMinusOne:
    def test_constant_stable_under_doubling(self):
        cs = [_rotation_minus_one_constant(K, 6.0 / K**2) for K in (16, 32, 64, 128)]
        for a, b in zip(cs, cs[1:]):
            assert abs(b - a) / a < 0.05
        assert max(cs) < 2.0

    def test_random_pairs_respect_constant(self, rng):
        K = 32
        tau = 6.0 / K**2
        c = _rotation_minus_one_constant(K, tau)
        g = Grid(1, K)
        for _ in range(20):
            u, ud = random_field(g, rng, decay=2), random_field(g, rng, decay=1)
            a, b = wave_rotation(u, ud, tau)
            lhs = pair_norm(a - u, b - ud, 1.0)
            assert lhs <= c * tau * pair_norm(u, ud, 2.0) * (1 + 1e-12)


class TestRhs:
    def test_zero(self):
        d = semidiscrete_rhs(ZakharovState.zeros(Grid(1, 8)))
        assert not (d.psi.coeffs.any() or d.u.coeffs.any() or d.udot.coeffs.any())

    def test_single_wave_mode(self):
        g = Grid(1, 8)
        z = SpectralField.zeros(g)
        d = semidiscrete_rhs(ZakharovState(z, SpectralField.single_mode(g, 3), z, 0.0))
        np.testing.assert_allclose(d.udot.coeffs, -9 * SpectralField.single_mode(g, 3).coeffs)
        assert not d.psi.coeffs.any() and not d.u.coeffs.any()

    def test_matches_node_oracle(self, rng):
        K = 8
        s = random_state(Grid(1, K), rng)
        d = semidiscrete_rhs(s)
        dpsi, du, dudot = naive_rhs(s.psi.coeffs, s.u.coeffs, s.udot.coeffs, K)
        np.testing.assert_allclose(d.psi.coeffs, dpsi, atol=1e-12)
        np.testing.assert_allclose(d.u.coeffs, du, atol=1e-12)
        np.testing.assert_allclose(d.udot.coeffs, dudot, atol=1e-12)


class TestInitialData:
    def test_zero_mode_is_two(self):
        s = make_initial_w(Grid(1, 16))
        for f in (s.psi, s.u, s.udot):
            assert f.coefficient(0) == 2.0

    def test_symmetric_real(self):
        s = make_initial_w(Grid(1, 16))
        for f in (s.psi, s.u, s.udot):
            c = f.coeffs
            assert np.all(c.imag == 0)
            np.testing.assert_array_equal(c[1:], c[1:][::-1])
            assert np.abs(evaluate_nodes(f).imag).max() < 1e-13

    def test_coefficient_law(self):
        g = Grid(1, 8)
        assert w_coefficients(g, 3.0)[g.index_of(4)] == pytest.approx(2 / 4**3.51)

    def test_sobolev_threshold(self):
        # w_5 lies in H^s only for s < 5.01: below the threshold the norm settles, above it grows
        below, above = [], []
        for K in (2**6, 2**7, 2**8, 2**9, 2**10):
            psi = make_initial_w(Grid(1, K)).psi
            below.append(sobolev_norm(psi, 4.5))
            above.append(sobolev_norm(psi, 5.5))
        assert abs(below[-1] - below[-2]) / below[-1] < 1e-3
        assert all(b > 1.3 * a for a, b in zip(above, above[1:]))

    def test_two_dimensional(self):
        s = make_initial_w(Grid(2, 8))
        assert s.psi.coefficient((3, 4)) == pytest.approx(2 / 5**5.51)


def test_smooth_small_data_norm_bounded():
    g = Grid(1, 32)
    s0 = smooth_random_state(g, np.random.default_rng(1), amplitude=0.1)

    def norm(st_):
        return sobolev_norm(st_.psi, 3) + pair_norm(st_.u, st_.udot, 1)

    n0 = norm(s0)
    worst = 1.0
    for st_ in iterate_splitting(s0, StepperConfig(5e-3, enforce_cfl=True)):
        worst = max(worst, norm(st_) / n0)
        if st_.time >= 0.5 - 1e-12:
            break
    assert worst <= 2.0


def test_abs_squared_real_at_nodes(rng):
    s = random_state(Grid(1, 16), rng)
    assert np.abs(evaluate_nodes(abs_squared(s.psi)).imag).max() < 1e-14
