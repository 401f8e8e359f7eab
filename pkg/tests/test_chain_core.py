import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maplab.chain_core import (StochasticKernel, check_reversible,
                               interpolation_bound, l2_operator_norm,
                               solve_stationary, spectral_gap_report)
from maplab.errors import NonIrreducible, NotStochastic, ZeroMassState
from maplab.fixtures import TWO_STATE_P

from conftest import random_kernel


class TestSolveStationary:
    def test_two_state_oracle(self):
        # pi P = pi solved by hand: pi = (2/5, 3/5)
        pi = solve_stationary(TWO_STATE_P)
        np.testing.assert_allclose(pi, [0.4, 0.6], atol=1e-12)

    def test_identity_multiple_classes(self):
        with pytest.raises(NonIrreducible):
            solve_stationary(np.eye(3))

    def test_not_stochastic_row_sum(self):
        with pytest.raises(NotStochastic):
            solve_stationary(np.array([[0.5, 0.4], [0.2, 0.8]]))

    def test_negative_entry(self):
        with pytest.raises(NotStochastic):
            solve_stationary(np.array([[1.1, -0.1], [0.2, 0.8]]))

    def test_absorbing_state_reachable(self):
        # one closed class {1}; transient state 0 gets pi = 0
        P = np.array([[0.5, 0.5], [0.0, 1.0]])
        pi = solve_stationary(P)
        np.testing.assert_allclose(pi, [0.0, 1.0], atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 10 ** 6))
    def test_random_positive_kernels(self, n, seed):
        P = random_kernel(np.random.default_rng(seed), n)
        pi = solve_stationary(P)
        assert pi.min() > 0
        np.testing.assert_allclose(pi @ P, pi, atol=1e-10)
        assert abs(pi.sum() - 1.0) < 1e-12


class TestKernel:
    def test_projector_rows(self, two_state):
        Pi = two_state.kernel.projector
        np.testing.assert_allclose(Pi, np.tile([0.4, 0.6], (2, 1)))

    def test_supplied_pi_mismatch(self):
        with pytest.raises(NotStochastic):
            StochasticKernel(states=("a", "b"), P=TWO_STATE_P,
                             pi=np.array([0.5, 0.5]))

    def test_immutable(self, two_state):
        with pytest.raises(ValueError):
            two_state.kernel.P[0, 0] = 0.0


class TestL2Norm:
    def test_identity_minus_projector(self):
        # ||I - Pi||_2 = 1 for any nontrivial pi
        kernel = StochasticKernel(states=(0, 1), P=TWO_STATE_P)
        norm = l2_operator_norm(np.eye(2) - kernel.projector, kernel.pi)
        assert abs(norm - 1.0) < 1e-12

    def test_uniform_pi_reduces_to_spectral_norm(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(4, 4))
        pi = np.full(4, 0.25)
        assert abs(l2_operator_norm(A, pi) - np.linalg.norm(A, 2)) < 1e-12

    def test_zero_mass_state_raises(self):
        pi = np.array([0.0, 1.0])
        with pytest.raises(ZeroMassState):
            l2_operator_norm(np.array([[1.0, 0.0], [0.0, 1.0]]), pi)

    def test_zero_mass_state_ignored_when_inactive(self):
        pi = np.array([0.0, 1.0])
        A = np.array([[0.0, 0.0], [0.0, 3.0]])
        assert abs(l2_operator_norm(A, pi) - 3.0) < 1e-12

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_submultiplicative(self, seed):
        rng = np.random.default_rng(seed)
        P = random_kernel(rng, 4)
        pi = solve_stationary(P)
        A = rng.normal(size=(4, 4))
        B = rng.normal(size=(4, 4))
        lhs = l2_operator_norm(A @ B, pi)
        rhs = l2_operator_norm(A, pi) * l2_operator_norm(B, pi)
        assert lhs <= rhs * (1 + 1e-10)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_kernel_contraction(self, seed):
        # ||P||_{L2(pi)} <= 1 for every stochastic kernel
        P = random_kernel(np.random.default_rng(seed), 5)
        pi = solve_stationary(P)
        assert l2_operator_norm(P, pi) <= 1.0 + 1e-10


class TestReversibility:
    def test_two_state_reversible(self, two_state):
        # every 2-state chain satisfies detailed balance
        assert check_reversible(two_state.kernel)

    def test_three_state_cycle_not_reversible(self):
        P = np.array([[0.0, 0.9, 0.1],
                      [0.1, 0.0, 0.9],
                      [0.9, 0.1, 0.0]])
        assert not check_reversible(StochasticKernel(states=(0, 1, 2), P=P))

    def test_reversible_second_eigenvalue_equals_gap_norm(self):
        # reversible: ||P - Pi||_2 equals the second-largest |eigenvalue|
        from maplab.fixtures import birth_death_5
        kernel = birth_death_5().kernel
        assert check_reversible(kernel)
        eigs = np.sort(np.abs(np.linalg.eigvals(kernel.P)))[::-1]
        norm = l2_operator_norm(kernel.P - kernel.projector, kernel.pi)
        assert abs(norm - eigs[1]) < 1e-10


class TestInterpolationBound:
    def test_endpoints(self):
        assert interpolation_bound(0.3, 0.7, 1.0) == pytest.approx(0.3)
        assert interpolation_bound(0.3, 0.7, 0.0) == pytest.approx(0.7)

    def test_invalid_alpha(self):
        with pytest.raises(ValueError):
            interpolation_bound(0.5, 0.5, 1.5)

    def test_negative_norm(self):
        with pytest.raises(ValueError):
            interpolation_bound(-0.1, 0.5, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(1e-6, 10.0), st.floats(1e-6, 10.0), st.floats(0.0, 1.0))
    def test_dominated_by_geometric_mean(self, a, b, alpha):
        val = interpolation_bound(a, b, alpha)
        assert val <= a ** alpha * b ** (1 - alpha) + 1e-12
        assert val >= 0

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-3, 0.99), st.floats(0.0, 1.0))
    def test_contractive_inputs_stay_contractive(self, r, alpha):
        assert interpolation_bound(r, r, alpha) <= r ** min(alpha, 1 - alpha) * 2


class TestSpectralGapReport:
    def test_two_state_exact_powers(self, two_state):
        # P - Pi has the single eigenvalue 0.5; by symmetry the L2 norm of
        # (P - Pi)^t is exactly 0.5^t, and P^t - Pi = (P - Pi)^t
        table = spectral_gap_report(two_state.kernel, 11)
        for t in range(1, 12):
            expected = 1.0 if t == 1 else 0.5 ** (t - 1)
            assert abs(table.bound(t) - expected) < 1e-10

    def test_two_state_fitted_rate(self, two_state):
        table = spectral_gap_report(two_state.kernel, 11)
        assert abs(table.eps - np.log(2.0)) < 1e-6
        assert table.gap_present

    def test_iid_rows_zero_for_t_ge_2(self):
        from maplab.fixtures import iid_rademacher
        table = spectral_gap_report(iid_rademacher().kernel, 6)
        for t in range(2, 7):
            assert table.bound(t) == pytest.approx(0.0, abs=1e-14)
        assert table.eps == np.inf and table.C == 0.0

    def test_periodic_chain_vacuous(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        table = spectral_gap_report(StochasticKernel(states=(0, 1), P=P), 6)
        assert not table.gap_present
        assert np.all(table.bounds >= 1.0 - 1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_power_identity(self, seed):
        # P^n - Pi = (P - Pi)^n, so the bound table is submultiplicative
        P = random_kernel(np.random.default_rng(seed), 4)
        kernel = StochasticKernel(states=tuple(range(4)), P=P)
        Pi = kernel.projector
        Pn = np.linalg.matrix_power(P, 5)
        Dn = np.linalg.matrix_power(P - Pi, 5)
        np.testing.assert_allclose(Pn - Pi, Dn, atol=1e-12)

    def test_monotone_after_t2(self, two_state):
        table = spectral_gap_report(two_state.kernel, 10)
        diffs = np.diff(table.bounds[1:])
        assert (diffs <= 1e-12).all()
