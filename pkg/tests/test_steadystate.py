import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from kerrssh.errors import (ConfigError, ConvergenceTimeout, DegenerateCubicError, PoleError,
                            PreconditionError)
from kerrssh.model import detunings, mean_field_rhs
from kerrssh.steadystate import (CubicReduction, SteadyState, build_cubic_reduction,
                                 complete_from_driven, detect_jumps, evolve_to_steady,
                                 hysteresis_sweep, initial_state, linear_response, loop_area,
                                 newton_refine, solve_cubic, stability_check)

from conftest import chain


def bare_cubic(u, delta_tilde):
    return CubicReduction(complex(delta_tilde), 0j, 0j, 0j, 0j, u)


def positive_real_roots(coeffs):
    r = np.roots(coeffs)
    return np.sort(r[(np.abs(r.imag) < 1e-9 * np.abs(r).max()) & (r.real > 0)].real)


class TestSolveCubic:
    def test_linear_limit(self):
        roots = solve_cubic(bare_cubic(0.0, -3 - 0.1j), 2.0)
        assert len(roots) == 1
        assert roots[0].x == pytest.approx(4.0 / 9.01, rel=1e-14)

    def test_three_roots_match_generic_root_finder(self):
        roots = solve_cubic(bare_cubic(-1.0, -3 - 0.1j), 1.0)
        # numpy.roots([4, -12, 9.01, -1]) = 0.13375176, 1.00334453, 1.86290371
        np.testing.assert_allclose([r.x for r in roots],
                                   [0.13375176, 1.00334453, 1.86290371], rtol=1e-7)
        np.testing.assert_allclose([r.x for r in roots],
                                   positive_real_roots([4, -12, 9.01, -1]), rtol=1e-12)
        assert [r.tag for r in roots] == ["candidate-stable", "unstable", "candidate-stable"]

    @pytest.mark.parametrize("e2", [0.001, 10.0])
    def test_single_root_outside_window(self, e2):
        assert len(solve_cubic(bare_cubic(-1.0, -3 - 0.1j), np.sqrt(e2))) == 1

    def test_undriven(self):
        assert [r.x for r in solve_cubic(bare_cubic(-1.0, -3 - 0.1j), 0.0)] == [0.0]

    def test_degenerate(self):
        with pytest.raises(DegenerateCubicError):
            solve_cubic(bare_cubic(0.0, 0.0), 1.0)

    def test_negative_drive(self):
        with pytest.raises(ConfigError):
            solve_cubic(bare_cubic(-1.0, 1.0), -1.0)

    @given(st.floats(-3, -0.05), st.floats(-10, 10), st.floats(0.01, 2), st.floats(0.01, 5))
    def test_roots_are_roots(self, u, re_d, im_d, rabi):
        red = bare_cubic(u, complex(re_d, -im_d))
        c = red.coefficients(rabi)
        for root in solve_cubic(red, rabi):
            p = ((c[0] * root.x + c[1]) * root.x + c[2]) * root.x + c[3]
            assert abs(p) <= 1e-9 * max(abs(c[3]), 1.0)

    @given(st.floats(-3, -0.05), st.floats(-10, 10), st.floats(0.01, 2), st.floats(0.01, 5))
    def test_root_count_follows_discriminant(self, u, re_d, im_d, rabi):
        red = bare_cubic(u, complex(re_d, -im_d))
        a, b, c, d = red.coefficients(rabi)
        disc = 18 * a * b * c * d - 4 * b ** 3 * d + b * b * c * c - 4 * a * c ** 3 - 27 * a * a * d * d
        scale = max(abs(18 * a * b * c * d), abs(4 * b ** 3 * d), (b * c) ** 2,
                    abs(4 * a * c ** 3), abs(27 * (a * d) ** 2))
        assume(abs(disc) > 1e-6 * scale)  # away from folds
        n = len(solve_cubic(red, rabi))
        assert n == (3 if disc > 0 else 1)
        assert n == positive_real_roots([a, b, c, d]).size


class TestCubicReduction:
    def test_decoupled_cavity(self):
        cfg = chain(omega_a=2.0, kerr_u=-1.0, g=1e-300, kappa=0.3)
        red = build_cubic_reduction(cfg)
        assert abs(red.chi1) < 1e-200 and abs(red.chi2) < 1e-200
        assert red.response == pytest.approx(2.0 - 0.3j)

    def test_needs_six_symmetric_modes(self):
        with pytest.raises(PreconditionError):
            build_cubic_reduction(chain(n_b=8))
        with pytest.raises(PreconditionError, match="a-detunings"):
            build_cubic_reduction(chain(omega_a=[1, 2, 3, 4, 5, 6, 7]))

    def test_edge_pole(self):
        cfg = chain(omega_a=[0.0, 1, 1, 1, 1, 1, 0.0], kappa=0.0, gamma=0.0)
        with pytest.raises(PoleError) as info:
            build_cubic_reduction(cfg)
        assert info.value.culprit == "Delta_a0"

    def test_chi1_pole(self):
        base = chain(omega_b=1.0, omega_a=1.5, gamma=0.0, kappa=0.0)
        eff_a1 = build_cubic_reduction(base).eff_delta_a1.real
        ob = [1.0, 1.0 / eff_a1, 1.0, 1.0, 1.0 / eff_a1, 1.0]
        with pytest.raises(PoleError) as info:
            build_cubic_reduction(base.replace(omega_b=ob))
        assert "Delta_b2" in info.value.culprit

    def test_agrees_with_full_newton(self, monostable):
        red = build_cubic_reduction(monostable)
        (root,) = solve_cubic(red, red.rabi)
        ss = initial_state(monostable)
        assert ss.x == pytest.approx(root.x, rel=1e-6)
        assert ss.is_symmetric()

    def test_amplitude_is_a_steady_state(self, monostable):
        red = build_cubic_reduction(monostable)
        (root,) = solve_cubic(red, red.rabi)
        z = complete_from_driven(monostable, np.full(2, red.amplitude(root.x)))
        assert np.abs(mean_field_rhs(monostable, None, z)).max() < 1e-10


class TestEvolve:
    def test_undriven_relaxes_to_zero(self, rng):
        cfg = chain(kerr_u=-1.0)
        z0 = rng.normal(size=13) + 1j * rng.normal(size=13)
        ss = evolve_to_steady(cfg, z0)
        assert np.abs(ss.flat).max() < 1e-6

    def test_linear_chain_matches_direct_solve(self):
        cfg = chain(drive_amp=[0.5, 0.2])
        ss = evolve_to_steady(cfg, tol=1e-11)
        np.testing.assert_allclose(ss.flat, linear_response(cfg), atol=1e-9)

    def test_bistable_chain_has_two_attractors(self, bistable):
        red = build_cubic_reduction(bistable)
        roots = solve_cubic(red, 1.0)
        assert len(roots) == 3
        low = evolve_to_steady(bistable, np.zeros(13))
        high = evolve_to_steady(bistable, complete_from_driven(bistable, np.full(2, 1.5 + 0j)))
        assert low.x == pytest.approx(roots[0].x, rel=1e-6)
        assert high.x == pytest.approx(roots[2].x, rel=1e-6)

    def test_needs_losses(self):
        with pytest.raises(PreconditionError):
            evolve_to_steady(chain(gamma=0.0))

    def test_timeout_carries_state(self):
        with pytest.raises(ConvergenceTimeout) as info:
            evolve_to_steady(chain(drive_amp=1.0), t_max=1.0)
        assert info.value.state is not None

    def test_refinement_keeps_x(self, monostable):
        relaxed = evolve_to_steady(monostable)
        refined = newton_refine(monostable, relaxed.flat)
        assert refined.x == pytest.approx(relaxed.x, rel=1e-6)


class TestNewton:
    def test_exact_state_is_fixed(self, monostable):
        ss = initial_state(monostable)
        again = newton_refine(monostable, ss.flat)
        assert again.iterations <= 1
        np.testing.assert_allclose(again.flat, ss.flat, atol=1e-12)

    def test_linear_case_from_any_guess(self, rng):
        cfg = chain(drive_amp=[0.3, 0.8], omega_a=rng.normal(size=7))
        guess = 10 * (rng.normal(size=13) + 1j * rng.normal(size=13))
        ss = newton_refine(cfg, guess)
        np.testing.assert_allclose(ss.flat, linear_response(cfg), atol=1e-10)

    def test_tail_of_history_decreases(self, monostable):
        relaxed = evolve_to_steady(monostable, tol=1e-3)
        ss = newton_refine(monostable, relaxed.flat)
        tail = ss.history[-3:]
        assert all(b < a for a, b in zip(tail, tail[1:]))

    def test_rejects_non_finite_guess(self, monostable):
        with pytest.raises(ConfigError):
            newton_refine(monostable, np.full(13, np.nan))

    @given(st.floats(0.0, 1.5), st.sampled_from(["low", "high"]))
    def test_residual_within_tolerance(self, rabi, branch):
        cfg = chain(omega_b=3.0, omega_a=3.0, kerr_u=-1.0, g=0.2, drive_amp=rabi)
        ss = initial_state(cfg, branch)
        assert np.abs(mean_field_rhs(cfg, None, ss.flat)).max() <= 1e-10 * max(1.0, rabi)


class TestStability:
    def test_undriven_rates(self):
        cfg = chain(gamma=0.1, kappa=0.25, g=1e-9)
        ok, eig = stability_check(cfg, None, np.zeros(13))
        assert ok
        np.testing.assert_allclose(np.sort(eig.real),
                                   np.sort(np.repeat([-0.25] * 7 + [-0.1] * 6, 2)), atol=1e-8)

    def test_lossless_chain_is_marginal_and_unstable(self):
        ok, eig = stability_check(chain(gamma=0.0, kappa=0.0), None, np.zeros(13))
        assert not ok
        assert np.abs(eig.real).max() < 1e-12

    def test_middle_root_unstable_outer_stable(self, bistable):
        red = build_cubic_reduction(bistable)
        verdicts = []
        for root in solve_cubic(red, 1.0):
            z = complete_from_driven(bistable, np.full(2, red.amplitude(root.x)))
            verdicts.append(stability_check(bistable, None, newton_refine(bistable, z))[0])
        assert verdicts == [True, False, True]


class TestSweep:
    def test_linear_branches_identical(self):
        cfg = chain(drive_amp=0.0, kerr_u=0.0)
        fwd, bwd = hysteresis_sweep(cfg, "rabi", 0.0, 2.0, 21, "both")
        np.testing.assert_allclose(fwd.x, bwd.x[::-1], rtol=1e-9, atol=1e-15)
        assert fwd.jumps == [] and bwd.jumps == []

    def test_bistable_loop(self, bistable):
        fwd, bwd = hysteresis_sweep(bistable, "rabi", np.sqrt(0.001), np.sqrt(10.0), 60, "both")
        assert len(fwd.jumps) == 1 and len(bwd.jumps) == 1
        assert fwd.jumps[0] != len(fwd.grid) - bwd.jumps[0]
        assert loop_area(fwd, bwd) > 0
        assert fwd.stable.all() and bwd.stable.all()

    def test_monostable_sweep_has_no_jumps(self, monostable):
        res = hysteresis_sweep(monostable, "rabi", 0.0, 1.0, 30, "forward")
        assert res.jumps == []
        assert np.all(np.diff(res.x) > 0)

    def test_arguments(self, monostable):
        with pytest.raises(ConfigError):
            hysteresis_sweep(monostable, "rabi", 0.0, 1.0, 1)
        with pytest.raises(ConfigError):
            hysteresis_sweep(monostable, "rabi", 1.0, 0.0, 5)
        with pytest.raises(ConfigError):
            hysteresis_sweep(monostable, "volts", 0.0, 1.0, 5)


class TestJumpDetection:
    def test_step(self):
        assert detect_jumps([0, 0.1, 0.2, 0.3, 5.0, 5.1, 5.2]) == [4]

    def test_smooth(self):
        assert detect_jumps(np.linspace(0, 1, 50) ** 2) == []

    def test_steepening_before_fold_not_flagged(self):
        x = [0, 0.1, 0.2, 0.3, 0.45, 0.8, 5.0, 5.1, 5.2, 5.3]
        assert detect_jumps(x) == [6]


def test_steady_state_flat_round_trip(rng):
    z = rng.normal(size=13) + 1j * rng.normal(size=13)
    ss = SteadyState.from_flat(z, 0.0)
    np.testing.assert_array_equal(ss.flat, z)
    assert ss.x == abs(z[4]) ** 2
    assert list(detunings(chain()).flat()[:3]) == [1.5, 1.0, 1.5]
