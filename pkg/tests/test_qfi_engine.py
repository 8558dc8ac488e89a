import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaussqfi.errors import ConvergenceFailure, InvalidParameter, InvalidState, NonOptimalPhases
from gaussqfi.gaussian_state import (
    IDENTITY,
    ChannelConfig,
    GaussianState,
    ProductStateParams,
    interferometer_output,
    state_derivative,
)
from gaussqfi.qfi_engine import (
    delta_phi_bound,
    fidelity_gaussian,
    j_dsdv,
    j_dsv,
    j_ratio,
    optimal_phases,
    phase_conditions,
    precision_report,
    qfi_closed_form,
    qfi_dsdv,
    qfi_dsv,
    qfi_fidelity_limit,
    qfi_general,
    qfi_interferometer,
    violated_conditions,
)
from gaussqfi.sampling import random_optimal_params, random_params


def dsv_general(n_bar, eta, phi=0.3):
    return qfi_interferometer(ProductStateParams.dsv(n_bar=n_bar), ChannelConfig.symmetric(eta, phi))


def coherent(alpha):
    return GaussianState(np.array([alpha, 0, np.conj(alpha), 0], dtype=complex), IDENTITY)


class TestGeneralFormula:
    def test_dsv_half_loss(self):
        assert dsv_general(2.0, 0.5).i_total == pytest.approx(4 / 3, rel=1e-9)

    def test_dsv_lossless_is_regularised(self):
        b = dsv_general(2.0, 1.0)
        assert b.regularized
        assert b.i_total == pytest.approx(8.0, rel=1e-9)

    @pytest.mark.parametrize("r", [3.0, 4.0, 5.0])
    def test_lossless_strong_squeezing(self, r):
        p = ProductStateParams.dsdv(math.sqrt(10), r)
        b = qfi_interferometer(p, ChannelConfig.symmetric(1.0, 0.3))
        assert b.regularized
        assert b.i_total == pytest.approx(qfi_dsdv(math.sqrt(10), r, 1.0), rel=1e-4)

    @pytest.mark.parametrize("eta", [0.0, 0.4, 1.0])
    def test_vacuum(self, eta):
        assert qfi_interferometer(ProductStateParams(), ChannelConfig.symmetric(eta, 1.1)).i_total == 0.0

    def test_breakdown_sums(self, rng):
        for _ in range(30):
            b = qfi_interferometer(random_params(rng), ChannelConfig.symmetric(rng.uniform(0.1, 1), 0.5))
            assert b.i_total == pytest.approx(b.i_matrix_part + b.i_displacement_part, abs=1e-10)
            assert b.i_matrix_part >= -1e-10 and b.i_displacement_part >= -1e-10
            assert abs(b.tau_term) < 1e-12

    def test_breakdown_zero_parts(self):
        cfg = ChannelConfig.symmetric(0.7, 0.2)
        no_squeeze = qfi_interferometer(ProductStateParams(alpha_abs_a=1.2, alpha_abs_b=0.4, beta_b=1.0), cfg)
        assert no_squeeze.i_matrix_part == 0.0
        no_disp = qfi_interferometer(ProductStateParams(r_a=0.6, r_b=0.3, theta_b=2.0), cfg)
        assert no_disp.i_displacement_part == 0.0

    @pytest.mark.parametrize("eta", [0.3, 0.8, 1.0])
    def test_phi_invariance(self, rng, eta):
        p = random_params(rng)
        vals = [qfi_interferometer(p, ChannelConfig.symmetric(eta, phi)).i_total for phi in (0, 0.7, math.pi, 2.1)]
        assert max(vals) - min(vals) <= 1e-10 * max(vals)

    def test_singular_sigma(self):
        with pytest.raises(InvalidState, match="singular"):
            qfi_general(np.zeros((4, 4)), np.zeros((4, 4)), np.zeros(4), np.zeros(4))

    def test_shape_check(self):
        with pytest.raises(InvalidParameter):
            qfi_general(IDENTITY, IDENTITY, np.zeros(3), np.zeros(4))

    def test_printed_tau_variant_agrees_on_pipeline(self, rng):
        p = random_params(rng)
        cfg = ChannelConfig.symmetric(0.6, 0.3)
        a = qfi_interferometer(p, cfg).i_total
        b = qfi_interferometer(p, cfg, tau_denominator="printed").i_total
        assert a == pytest.approx(b, rel=1e-12)

    def test_mixed_states_match_fidelity_limit(self, rng):
        for _ in range(20):
            p = random_params(rng, 1.2, 1.5)
            cfg = ChannelConfig(rng.uniform(0.2, 0.95), rng.uniform(0.2, 0.95), rng.uniform(0, 6))
            g = qfi_interferometer(p, cfg).i_total
            assert qfi_fidelity_limit(p, cfg) == pytest.approx(g, rel=1e-6)


class TestFidelity:
    def test_self_fidelity(self, rng):
        for _ in range(20):
            s = interferometer_output(random_params(rng), ChannelConfig(*rng.uniform(0, 1, 2), phi=1.0))
            assert fidelity_gaussian(s, s) == pytest.approx(1.0, abs=1e-9)

    def test_partially_pure_self_fidelity(self):
        # one symplectic eigenvalue equal to one, the other above
        p = optimal_phases(ProductStateParams(alpha_abs_a=1, alpha_abs_b=1, r_a=0.0, r_b=1.5))
        s = interferometer_output(p, ChannelConfig.symmetric(0.6, 0.4))
        assert fidelity_gaussian(s, s) == pytest.approx(1.0, abs=1e-9)

    def test_coherent_states(self):
        a, b = 0.3 + 0.4j, -0.2 + 1.1j
        assert fidelity_gaussian(coherent(a), coherent(b)) == pytest.approx(math.exp(-abs(a - b) ** 2), rel=1e-13)

    def test_symmetry_and_range(self, rng):
        for _ in range(20):
            cfg = ChannelConfig.symmetric(rng.uniform(0, 1), 0.2)
            s1 = interferometer_output(random_params(rng), cfg)
            s2 = interferometer_output(random_params(rng), cfg)
            f = fidelity_gaussian(s1, s2)
            assert 0 <= f <= 1 + 1e-9
            assert f == pytest.approx(fidelity_gaussian(s2, s1), rel=1e-9, abs=1e-15)


class TestFidelityLimit:
    def test_dsv_lossless(self):
        assert qfi_fidelity_limit(ProductStateParams.dsv(n_bar=2.0), ChannelConfig()) == pytest.approx(8.0, rel=1e-6)

    def test_vacuum(self):
        assert qfi_fidelity_limit(ProductStateParams(), ChannelConfig.symmetric(0.5)) == pytest.approx(0.0, abs=1e-9)

    def test_dsdv(self):
        p = ProductStateParams.dsdv(math.sqrt(10), 1.0)
        got = qfi_fidelity_limit(p, ChannelConfig.symmetric(0.9, 0.2))
        assert got == pytest.approx(qfi_dsdv(math.sqrt(10), 1.0, 0.9), rel=1e-6)

    @pytest.mark.parametrize("eps", [1e-7, 0.05, -1e-3])
    def test_epsilon_range(self, eps):
        with pytest.raises(InvalidParameter):
            qfi_fidelity_limit(ProductStateParams(), ChannelConfig(), epsilon=eps)

    def test_non_convergence_carries_estimates(self):
        # a huge step on a strongly squeezed state breaks the quadratic expansion
        with pytest.raises(ConvergenceFailure) as info:
            qfi_fidelity_limit(ProductStateParams.dsv(5.0), ChannelConfig(), epsilon=1e-2)
        assert len(info.value.estimates) == 2


class TestPhases:
    def test_dsv_representative_accepted(self):
        p = ProductStateParams(r_a=0.5, r_b=0.5, theta_b=math.pi)
        assert violated_conditions(p) == []

    def test_optimal_phases_satisfy_conditions(self, rng):
        p = optimal_phases(random_params(rng))
        c1, c2, c3 = phase_conditions(p)
        assert (c1, c2, c3) == (-1.0, 1.0, 1.0)

    def test_random_optimal_family(self, rng):
        for _ in range(50):
            assert violated_conditions(random_optimal_params(rng)) == []

    def test_optimal_beats_random_phases(self, rng):
        base = random_params(rng, 1.2, 1.5)
        cfg = ChannelConfig.symmetric(0.8, 0.3)
        best = qfi_interferometer(optimal_phases(base), cfg).i_total
        for _ in range(100):
            other = random_params(rng, 0, 0)
            trial = ProductStateParams(
                omega_a=other.omega_a, alpha_abs_a=base.alpha_abs_a, beta_a=other.beta_a, r_a=base.r_a,
                theta_a=other.theta_a, omega_b=other.omega_b, alpha_abs_b=base.alpha_abs_b,
                beta_b=other.beta_b, r_b=base.r_b, theta_b=other.theta_b,
            )
            assert qfi_interferometer(trial, cfg).i_total <= best * (1 + 1e-10)


class TestClosedForm:
    @pytest.mark.parametrize("r", [0.2, 0.9, 1.7])
    def test_lossless_dsv(self, r):
        n = 2 * math.sinh(r) ** 2
        p = ProductStateParams(r_a=r, r_b=r, theta_b=math.pi)
        assert qfi_closed_form(p, 1.0) == pytest.approx(n * (n + 2), rel=1e-12)

    def test_coherent_only(self):
        p = optimal_phases(ProductStateParams(alpha_abs_a=1.3, alpha_abs_b=0.4))
        assert qfi_closed_form(p, 0.6) == pytest.approx(0.6 * (1.3**2 + 0.4**2), rel=1e-13)

    def test_half_loss_dsv(self):
        assert qfi_closed_form(ProductStateParams.dsv(n_bar=2.0), 0.5) == pytest.approx(4 / 3, rel=1e-12)

    def test_rejects_non_optimal(self):
        with pytest.raises(NonOptimalPhases, match="theta_a - theta_b"):
            qfi_closed_form(ProductStateParams(r_a=0.5, r_b=0.5), 0.5)

    def test_matches_general_on_random_optimal(self, rng):
        for _ in range(100):
            p = random_optimal_params(rng)
            eta = rng.uniform(0, 1)
            g = qfi_interferometer(p, ChannelConfig.symmetric(eta, rng.uniform(0, 6))).i_total
            c = qfi_closed_form(p, eta)
            assert c == pytest.approx(g, rel=1e-9, abs=1e-12)

    def test_route_agreement_grid(self):
        for ra, rb, eta in itertools.product(np.linspace(0, 1.5, 5), np.linspace(0, 1.5, 5), (0.3, 0.6, 0.9)):
            p = optimal_phases(ProductStateParams(alpha_abs_a=1, alpha_abs_b=1, r_a=ra, r_b=rb))
            cfg = ChannelConfig.symmetric(eta, 0.4)
            c = qfi_closed_form(p, eta)
            assert qfi_interferometer(p, cfg).i_total == pytest.approx(c, rel=1e-6)
            assert qfi_fidelity_limit(p, cfg) == pytest.approx(c, rel=1e-6)


class TestSpecialCases:
    def test_dsv_values(self):
        assert qfi_dsv(2.0, 1.0) == 8.0
        assert qfi_dsv(5.0, 0.0) == 0.0
        assert qfi_dsv(2.0, 0.5) == pytest.approx(4 / 3, rel=1e-15)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0, 1e4), st.floats(0, 1))
    def test_dsv_matches_closed_form(self, n, eta):
        p = ProductStateParams.dsv(n_bar=n)
        assert qfi_dsv(n, eta) == pytest.approx(qfi_closed_form(p, eta), rel=1e-12, abs=1e-200)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1e3), st.floats(0, 1), st.floats(0, 1))
    def test_dsv_monotone_in_eta(self, n, e1, e2):
        lo, hi = sorted((e1, e2))
        assert qfi_dsv(n, lo) <= qfi_dsv(n, hi) * (1 + 1e-14)

    @pytest.mark.parametrize("eta", [0.3, 0.6, 0.9, 0.99])
    def test_j_dsv_saturates(self, eta):
        ns = np.logspace(-1, 5, 200)
        js = [j_dsv(n, eta) for n in ns]
        assert all(b >= a * (1 - 1e-12) for a, b in zip(js, js[1:]))
        assert max(js) <= math.sqrt(1 / (1 - eta))

    @pytest.mark.parametrize("r", np.linspace(0, 3, 13))
    @pytest.mark.parametrize("eta", [0.0, 0.5, 1.0])
    def test_dsdv_without_displacement(self, r, eta):
        assert qfi_dsdv(0.0, r, eta) == pytest.approx(qfi_dsv(2 * math.sinh(r) ** 2, eta), rel=1e-12, abs=1e-300)

    def test_dsdv_examples(self):
        assert qfi_dsdv(math.sqrt(10), 0.0, 0.7) == pytest.approx(14.0, rel=1e-14)
        assert j_dsdv(1.7, 0.0, 0.4) == pytest.approx(1.0, rel=1e-14)

    def test_dsdv_matches_closed_form(self, rng):
        for _ in range(50):
            a, r, eta = rng.uniform(0, 3), rng.uniform(0, 2), rng.uniform(0, 1)
            assert qfi_dsdv(a, r, eta) == pytest.approx(qfi_closed_form(ProductStateParams.dsdv(a, r), eta), rel=1e-12)

    def test_negative_inputs(self):
        with pytest.raises(InvalidParameter):
            qfi_dsv(-1, 0.5)
        with pytest.raises(InvalidParameter):
            qfi_dsdv(1, -0.1, 0.5)


class TestPrecisionReport:
    def test_dsv_lossless(self):
        rep = precision_report(ProductStateParams.dsv(n_bar=2.0), ChannelConfig())
        assert rep.route == "closed_form"
        assert rep.j_ratio == pytest.approx(2.0, rel=1e-12)
        assert rep.delta_phi_bound == pytest.approx(1 / math.sqrt(8), rel=1e-12)

    def test_dsv_saturation(self):
        rep = precision_report(ProductStateParams.dsv(n_bar=1e4), ChannelConfig.symmetric(0.9))
        assert rep.j_ratio == pytest.approx(math.sqrt(10), rel=1e-2)

    @pytest.mark.parametrize("eta", [0.1, 0.5, 1.0])
    def test_coherent_gives_unit_gain(self, eta):
        rep = precision_report(ProductStateParams(alpha_abs_a=1.1, beta_a=0.3), ChannelConfig.symmetric(eta))
        assert rep.j_ratio == pytest.approx(1.0, rel=1e-10)

    def test_asymmetric_uses_general(self):
        rep = precision_report(ProductStateParams.dsv(n_bar=2.0), ChannelConfig(0.5, 0.9))
        assert rep.route == "general"
        assert rep.j_ratio == pytest.approx(math.sqrt(rep.qfi / (0.7 * rep.n_bar)), rel=1e-14)

    def test_zero_qfi_flags(self):
        rep = precision_report(ProductStateParams.dsv(n_bar=2.0), ChannelConfig.symmetric(0.0))
        assert rep.qfi == 0.0 and math.isinf(rep.delta_phi_bound)
        assert "ZERO_QFI" in rep.flags and "J_UNDEFINED" in rep.flags

    def test_helpers(self):
        assert delta_phi_bound(4.0) == 0.5
        assert math.isinf(delta_phi_bound(0.0))
        assert math.isnan(j_ratio(1.0, 0.0, 3.0))
