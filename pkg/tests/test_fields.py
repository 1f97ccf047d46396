import math

import numpy as np
import pytest
from scipy.integrate import quad

from bohmlab.errors import BothZeroError, DomainError, ModeError, ZeroAmplitudeError
from bohmlab.fields import (
    AliceFirst,
    BobFirst,
    BranchWeights,
    SpinAxis,
    WaveguideModel,
    backflow_predicate,
    chi_spinor,
    conditional_velocity,
    convective_velocity,
    grad_log_amp,
    initial_density,
    log_amp_gradients,
    mixed_velocity,
    particle1_conditional_velocity,
    pauli_current_numeric,
    scenario_velocity,
    singlet_current2_closed,
    singlet_density,
    singlet_state,
    waveguide_amp,
    waveguide_g0,
    waveguide_phase,
    weights,
    z_marginal_cdf,
)

TRUNC = WaveguideModel(z_mode="truncated_gaussian")
CONSTK = WaveguideModel(conv_mode="constant_k", k2=1.0)


class TestInitialDensity:
    def test_vanishes_behind_wall(self, model):
        assert initial_density(model, (0.3, -0.2, -0.5)) == 0.0
        assert initial_density(model, (0.0, 0.0, 0.0)) == 0.0

    def test_z_marginal_mean(self, model):
        # quadrature of z * (4/sqrt(pi)) z^2 e^{-z^2}
        mean, _ = quad(lambda z: z * (4 / math.sqrt(math.pi)) * z**2 * math.exp(-(z**2)), 0, 12)
        assert mean == pytest.approx(2 / math.sqrt(math.pi), abs=1e-10)
        # and the density actually factorizes into that marginal
        num, _ = quad(
            lambda z: z * initial_density(model, (0.2, -0.1, z)), 0, 12
        )
        den, _ = quad(lambda z: initial_density(model, (0.2, -0.1, z)), 0, 12)
        assert num / den == pytest.approx(2 / math.sqrt(math.pi), abs=1e-9)

    def test_x_marginal_variance(self, model):
        var_num, _ = quad(
            lambda x: x**2 * initial_density(model, (x, 0.0, 1.0)), -10, 10
        )
        var_den, _ = quad(lambda x: initial_density(model, (x, 0.0, 1.0)), -10, 10)
        assert var_num / var_den == pytest.approx(1 / (2 * model.omega), abs=1e-9)

    @pytest.mark.parametrize("m", [WaveguideModel(), TRUNC, WaveguideModel(omega=2.5)])
    def test_normalized(self, m):
        # rho separates as zprofile(z) * transverse(x) * transverse(y)
        z_int, _ = quad(lambda z: initial_density(m, (0.0, 0.0, z)), 0, 14)
        x_rel, _ = quad(
            lambda x: initial_density(m, (x, 0.0, 1.0)) / initial_density(m, (0.0, 0.0, 1.0)),
            -12,
            12,
        )
        # z_int carries the transverse peak twice; each x_rel divides one out
        assert z_int * x_rel**2 == pytest.approx(1.0, abs=1e-8)

    def test_cdf_matches_pdf(self, model):
        for z in (0.4, 1.0, 2.3):
            num, _ = quad(lambda u: (4 / math.sqrt(math.pi)) * u**2 * math.exp(-(u**2)), 0, z)
            assert z_marginal_cdf(model, z) == pytest.approx(num, abs=1e-12)


class TestLogAmpGradients:
    def test_on_axis_radial_gradient_vanishes(self, model):
        d_rho, _ = log_amp_gradients(model, 0.0, 1.0, 0.7)
        assert d_rho == 0.0

    def test_truncated_gaussian_at_unit_z(self):
        _, d_z = log_amp_gradients(TRUNC, 0.0, 1.0, 0.0)
        assert d_z == -1.0

    def test_half_oscillator_stationary_point(self, model):
        _, d_z = log_amp_gradients(model, 0.0, 1.0, 0.0)
        assert d_z == 0.0

    def test_wall_domain_error(self, model):
        with pytest.raises(DomainError):
            log_amp_gradients(model, 0.5, 0.0, 1.0)

    def test_matches_finite_difference_of_amp(self, model, rng):
        amp = waveguide_amp(model)
        h = 1e-6
        for _ in range(20):
            x = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3)])
            t = rng.uniform(0, 4)
            g = grad_log_amp(model, x, t)
            for i in range(3):
                dx = np.zeros(3)
                dx[i] = h
                fd = (amp.value(x + dx, t) - amp.value(x - dx, t)) / (2 * h * amp.value(x, t))
                assert g[i] == pytest.approx(fd, abs=5e-8)


class TestConvectiveVelocity:
    def test_zero_at_release(self, model):
        assert np.all(convective_velocity(model, (1, 1, 3), 0.0) == 0.0)

    def test_dispersive_value(self, model):
        assert convective_velocity(model, (0, 0, 2.0), 1.0)[2] == pytest.approx(1.0)

    def test_constant_k_everywhere(self):
        v = convective_velocity(CONSTK, (5, -3, 0.1), 17.0)
        assert np.allclose(v, [0, 0, 1.0])


class TestConditionalVelocity:
    def test_longitudinal_on_axis_is_convective(self, model):
        v = conditional_velocity(model, SpinAxis.z(), +1, (0, 0, 1.5), 0.8)
        assert np.allclose(v, convective_velocity(model, (0, 0, 1.5), 0.8))

    def test_longitudinal_angular_speed_is_omega(self, rng):
        m = WaveguideModel(omega=1.7)
        for _ in range(50):
            x = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.3, 3)])
            if math.hypot(x[0], x[1]) < 1e-3:
                continue
            t = rng.uniform(0, 5)
            s = rng.choice([-1, 1])
            v = conditional_velocity(m, SpinAxis.z(), int(s), x, t) - convective_velocity(m, x, t)
            rho = math.hypot(x[0], x[1])
            # azimuthal: v = s*omega*(-y, x, 0); radial component exactly zero
            assert abs(v[:2] @ x[:2]) < 1e-12 * rho
            assert np.linalg.norm(v[:2]) / rho == pytest.approx(m.omega, abs=1e-12)
            assert v[2] == 0.0

    def test_transverse_null_point(self, model):
        # t=0, z=1 has d_z log|G| = 0 and y=0 kills the axial spin term
        v = conditional_velocity(model, SpinAxis.x(), +1, (0.7, 0.0, 1.0), 0.0)
        assert np.allclose(v, 0.0, atol=1e-15)

    def test_transverse_mirror_symmetry(self, model, rng):
        for _ in range(1000):
            x = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.2, 4)])
            t = rng.uniform(0, 6)
            s = int(rng.choice([-1, 1]))
            v = conditional_velocity(model, SpinAxis.x(), s, x, t)
            xm = np.array([x[0], -x[1], x[2]])
            vm = conditional_velocity(model, SpinAxis.x(), -s, xm, t)
            assert vm[2] == pytest.approx(v[2], abs=1e-12)
            assert vm[1] == pytest.approx(-v[1], abs=1e-12)
            assert v[0] == vm[0] == 0.0


class TestWeights:
    def test_direct_substitution(self):
        w = weights(3.0, 1.0)
        assert (w.w_plus, w.w_minus) == (0.75, 0.25)

    def test_kronecker_collapse(self):
        w = weights(0.42, 0.0)
        assert (w.w_plus, w.w_minus) == (1.0, 0.0)

    def test_equal_branches(self):
        w = weights(0.3, 0.3)
        assert (w.w_plus, w.w_minus) == (0.5, 0.5)

    def test_both_zero(self):
        with pytest.raises(BothZeroError):
            weights(0.0, 0.0)

    def test_invariants(self, rng):
        for _ in range(200):
            w = weights(rng.uniform(0, 5), rng.uniform(1e-12, 5))
            assert w.w_plus >= 0 and w.w_minus >= 0
            assert w.w_plus + w.w_minus == pytest.approx(1.0, abs=1e-12)


class TestMixedVelocity:
    def test_pure_plus_branch(self):
        v = mixed_velocity(BranchWeights(1.0, 0.0), (1, 2, 3), (9, 9, 9))
        assert np.allclose(v, [1, 2, 3])

    def test_equal_weights_cancel_spin_terms(self, model):
        x, t = (0.4, -1.1, 2.0), 1.3
        v_plus = conditional_velocity(model, SpinAxis.x(), -1, x, t)
        v_minus = conditional_velocity(model, SpinAxis.x(), +1, x, t)
        v = mixed_velocity(BranchWeights(0.5, 0.5), v_plus, v_minus)
        assert np.allclose(v, convective_velocity(model, x, t), atol=1e-15)

    def test_identical_branches(self):
        v = mixed_velocity(BranchWeights(0.5, 0.5), (2, 0, 1), (2, 0, 1))
        assert np.allclose(v, [2, 0, 1])


class TestScenarioVelocity:
    def test_bob_first_is_convective(self, model, rng):
        for _ in range(25):
            x = np.array([rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 4)])
            t = rng.uniform(0, 8)
            v = scenario_velocity(model, BobFirst(), x, t)
            assert np.array_equal(v, convective_velocity(model, x, t))
            assert v[0] == v[1] == 0.0

    def test_alice_first_longitudinal_on_axis(self, model):
        v = scenario_velocity(model, AliceFirst(SpinAxis.z(), +1), (0, 0, 2.0), 0.0)
        assert np.allclose(v, 0.0)

    def test_alice_first_carries_anticorrelated_spin(self, model):
        x, t = (0.5, 1.0, 2.0), 0.7
        v = scenario_velocity(model, AliceFirst(SpinAxis.x(), +1), x, t)
        assert np.allclose(v, conditional_velocity(model, SpinAxis.x(), -1, x, t))

    def test_transverse_outcome_mirror(self, model):
        # outcome flip plus y reflection leaves the axial component unchanged
        for y in (0.8, -0.3):
            v1 = scenario_velocity(model, AliceFirst(SpinAxis.x(), +1), (0.2, y, 1.4), 0.9)
            v2 = scenario_velocity(model, AliceFirst(SpinAxis.x(), -1), (0.2, -y, 1.4), 0.9)
            assert v2[2] == pytest.approx(v1[2], abs=1e-14)

    def test_unresolved_outcome_rejected(self, model):
        with pytest.raises(ValueError):
            scenario_velocity(model, AliceFirst(SpinAxis.x()), (0, 0, 1), 0.0)


class TestParticle1Velocity:
    def test_plane_wave_uniform_amplitude(self):
        k = np.array([0.3, -0.4, 1.1])
        v = particle1_conditional_velocity(
            lambda x, t: 1.0, lambda x, t: float(k @ np.asarray(x)), SpinAxis.z(), +1,
            (0.2, 0.5, -0.3), 0.0,
        )
        assert np.allclose(v, k, atol=1e-9)

    def test_spin_term_sign_opposite_to_particle2(self, model):
        amp = waveguide_amp(model)
        phase = waveguide_phase(model)
        x, t, s = np.array([0.3, -0.4, 1.7]), 0.6, +1
        v1 = particle1_conditional_velocity(amp.value, phase.value, SpinAxis.x(), s, x, t)
        spin1 = v1 - convective_velocity(model, x, t)
        # released-particle branch for outcome s carries spin -s
        v2 = conditional_velocity(model, SpinAxis.x(), -s, x, t)
        spin2 = v2 - convective_velocity(model, x, t)
        assert np.allclose(spin1, -spin2, atol=1e-7)

    def test_linear_in_s(self, model):
        amp = waveguide_amp(model)
        phase = waveguide_phase(model)
        x, t = np.array([0.1, 0.9, 2.2]), 1.1
        vp = particle1_conditional_velocity(amp.value, phase.value, SpinAxis.x(), +1, x, t)
        vm = particle1_conditional_velocity(amp.value, phase.value, SpinAxis.x(), -1, x, t)
        conv = convective_velocity(model, x, t)
        assert np.allclose(vp - conv, -(vm - conv), atol=1e-12)

    def test_zero_amplitude(self):
        with pytest.raises(ZeroAmplitudeError):
            particle1_conditional_velocity(
                lambda x, t: 0.0, lambda x, t: 0.0, SpinAxis.z(), +1, (0, 0, 0), 0.0
            )


class TestBackflowPredicate:
    def test_on_axis_false(self):
        assert not backflow_predicate(CONSTK, +1, (0.0, 0.0, 1.0), 0.5)

    def test_strong_modulation_true(self):
        # s=+1, sin(phi)=+1, omega*rho/k2 = 2: condition value -2 < -1
        assert backflow_predicate(CONSTK, +1, (0.0, 2.0, 1.0), 0.5)

    def test_sign_flip_of_sin_phi(self):
        assert not backflow_predicate(CONSTK, +1, (0.0, -2.0, 1.0), 0.5)

    def test_wrong_mode_rejected(self, model):
        with pytest.raises(ModeError):
            backflow_predicate(model, +1, (0.0, 2.0, 1.0), 0.5)

    def test_marks_negative_axial_velocity(self, rng):
        for _ in range(200):
            x = np.array([rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(0.2, 3)])
            t = rng.uniform(0, 4)
            s = int(rng.choice([-1, 1]))
            vz = scenario_velocity(CONSTK, AliceFirst(SpinAxis.x(), s), x, t)[2]
            assert backflow_predicate(CONSTK, s, x, t) == (vz < 0.0)


class TestSpinors:
    def test_eigenvectors(self, rng):
        sigma = [
            np.array([[0, 1], [1, 0]], dtype=complex),
            np.array([[0, -1j], [1j, 0]], dtype=complex),
            np.array([[1, 0], [0, -1]], dtype=complex),
        ]
        for _ in range(25):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            n_sigma = sum(u[i] * sigma[i] for i in range(3))
            for s in (+1, -1):
                chi = chi_spinor(SpinAxis(u), s)
                assert np.allclose(n_sigma @ chi, s * chi, atol=1e-12)
                assert np.vdot(chi, chi) == pytest.approx(1.0, abs=1e-12)


class TestPauliCurrentNumeric:
    def test_plane_wave_convective_only(self):
        k = 1.0
        chi = chi_spinor(SpinAxis.z(), +1)

        def psi(x):
            return np.exp(1j * k * x[2]) * chi

        j = pauli_current_numeric(psi, (0.2, -0.4, 0.9), 1e-4)
        assert np.allclose(j, [0, 0, k], atol=1e-6)

    def test_real_gaussian_spin_flux_only(self):
        a = np.array([0.8, 1.1, 0.6])
        chi = chi_spinor(SpinAxis.z(), +1)

        def psi(x):
            x = np.asarray(x)
            return math.exp(-float(a @ x**2)) * chi

        x0 = np.array([0.25, -0.3, 0.45])
        j = pauli_current_numeric(psi, x0, 1e-4)
        # J = (1/2) curl(rho z_hat) = (1/2) (d_y rho, -d_x rho, 0)
        rho = math.exp(-2 * float(a @ x0**2))
        expected = 0.5 * np.array([-4 * a[1] * x0[1] * rho, 4 * a[0] * x0[0] * rho, 0.0])
        assert np.allclose(j, expected, atol=1e-6)

    def test_singlet_matches_closed_form(self, model, rng):
        amp, phase = waveguide_amp(model), waveguide_phase(model)
        g0 = waveguide_g0(model)
        for _ in range(20):
            u = rng.normal(size=3)
            axis = SpinAxis(u / np.linalg.norm(u))
            c1, c2 = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)
            fp = lambda x, t: 0.9 * np.exp(-np.sum((np.asarray(x) - c1) ** 2) + 0.3j * np.asarray(x)[0])
            fm = lambda x, t: 0.7 * np.exp(-np.sum((np.asarray(x) - c2) ** 2) - 0.2j * np.asarray(x)[2])
            x1 = rng.uniform(-0.5, 0.5, 3)
            x2 = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(1.0, 3.0)])
            t = rng.uniform(0.2, 2.5)
            psi = singlet_state(fp, fm, g0, axis)
            j_num = pauli_current_numeric(lambda p: psi(x1, p, t), x2, 1e-4)
            j_closed = singlet_current2_closed(fp, fm, amp, phase, axis, x1, x2, t)
            assert np.linalg.norm(j_num - j_closed) <= 1e-5 * np.linalg.norm(j_closed)


class TestSingletClosedForms:
    def test_density_trivial(self):
        one = lambda x, t: 1.0
        assert singlet_density(one, one, one, (0, 0, 0), (0, 0, 0), 0.0) == 1.0

    def test_density_single_branch(self):
        fp = lambda x, t: 0.6
        fm = lambda x, t: 0.0
        g0 = lambda x, t: 0.5
        assert singlet_density(fp, fm, g0, 0, 0, 0.0) == pytest.approx(0.5**2 * 0.6**2 / 2)

    def test_density_normalized_product_domain(self, model):
        # separable normalized branches: rho integrates to 1 over (x1, x2);
        # the 6D integral factorizes into 1D quadratures
        def gauss1d(u, c):
            return (1 / math.pi) ** 0.25 * math.exp(-0.5 * (u - c) ** 2)

        # |g0|^2 at t=0 equals the initial density: z part times two x parts
        z_only, _ = quad(lambda z: (4 / math.sqrt(math.pi)) * z**2 * math.exp(-(z**2)), 0, 12)
        g_int_x, _ = quad(lambda x: math.exp(-model.omega * x**2), -10, 10)
        g_norm = z_only * (model.omega / math.pi) * g_int_x**2
        f_norm, _ = quad(lambda u: gauss1d(u, 0.0) ** 2, -12, 12)
        # branch norms are f_norm^3 each (shifted centers do not change them)
        total = g_norm * 0.5 * (f_norm**3 + f_norm**3)
        assert g_norm == pytest.approx(1.0, abs=1e-9)
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_single_branch_current(self, model):
        amp, phase = waveguide_amp(model), waveguide_phase(model)
        fp = lambda x, t: 0.8
        fm = lambda x, t: 0.0
        x2, t = np.array([0.3, 0.2, 1.5]), 0.9
        j = singlet_current2_closed(fp, fm, amp, phase, SpinAxis.x(), (0, 0, 0), x2, t)
        v_branch = conditional_velocity(model, SpinAxis.x(), -1, x2, t)
        rho = singlet_density(fp, fm, waveguide_g0(model), (0, 0, 0), x2, t)
        assert np.allclose(j / rho, v_branch, atol=1e-12)

    def test_equal_branches_convective_only(self, model):
        amp, phase = waveguide_amp(model), waveguide_phase(model)
        f = lambda x, t: 0.5
        x2, t = np.array([0.7, -0.2, 2.2]), 1.4
        j = singlet_current2_closed(f, f, amp, phase, SpinAxis.x(), (0, 0, 0), x2, t)
        rho = singlet_density(f, f, waveguide_g0(model), (0, 0, 0), x2, t)
        assert np.allclose(j / rho, convective_velocity(model, x2, t), atol=1e-12)

    def test_velocity_identity_at_random_configs(self, model, rng):
        amp, phase = waveguide_amp(model), waveguide_phase(model)
        g0 = waveguide_g0(model)
        for _ in range(100):
            u = rng.normal(size=3)
            axis = SpinAxis(u / np.linalg.norm(u))
            ap, am = rng.uniform(0.2, 1.5, 2)
            fp = lambda x, t: ap
            fm = lambda x, t: am
            x2 = np.array([rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 3)])
            t = rng.uniform(0, 4)
            j = singlet_current2_closed(fp, fm, amp, phase, axis, (0, 0, 0), x2, t)
            rho = singlet_density(fp, fm, g0, (0, 0, 0), x2, t)
            w = weights(ap**2, am**2)
            v = mixed_velocity(
                w,
                conditional_velocity(model, axis, -1, x2, t),
                conditional_velocity(model, axis, +1, x2, t),
            )
            assert np.linalg.norm(j / rho - v) < 1e-10


class TestWaveguideAmp:
    @pytest.mark.parametrize("t", [0.0, 2.0])
    @pytest.mark.parametrize("m", [WaveguideModel(), TRUNC])
    def test_normalized_at_all_times(self, m, t):
        # amp^2 factorizes as lon(z, t)^2 * (w/pi) e^{-w rho^2}
        amp = waveguide_amp(m)
        # the on-axis line integral carries the transverse peak (w/pi) once
        z_int, _ = quad(lambda z: amp.value((0.0, 0.0, z), t) ** 2, 0, 40)
        x_int, _ = quad(lambda x: math.exp(-m.omega * x**2), -12, 12)
        assert z_int * x_int**2 == pytest.approx(1.0, abs=1e-8)

    def test_vanishes_behind_wall(self, model):
        amp = waveguide_amp(model)
        assert amp.value((0.1, 0.1, -0.3), 1.0) == 0.0
