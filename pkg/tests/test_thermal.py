import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from attlab.errors import UsageError
from attlab.fock import FockDistribution, TruncatedDensityMatrix, fock_dm, thermal_state, trace_distance
from attlab.thermal import (
    MasterEqFactors,
    kraus_bs,
    kraus_me,
    kraus_me_terms,
    lindblad_integrate,
    output_cutoff,
    p_distribution,
    p_eigenvalue,
    p_eigenvalue_series,
    thermal_apply,
    thermal_dyad_action,
    thermal_dyad_series,
)

from test_fock import random_dm


class TestEigenvalues:
    def test_identity_gives_thermal(self):
        assert p_eigenvalue(1.5, 4, 1.0, 3) == pytest.approx(1.5**3 / 2.5**4, rel=1e-14)

    def test_full_loss_gives_fock(self):
        assert p_eigenvalue(1.5, 4, 0.0, 4) == 1.0
        assert p_eigenvalue(1.5, 4, 0.0, 3) == 0.0

    def test_series_oracle(self):
        for l in range(0, 60, 3):
            assert p_eigenvalue(2, 5, 0.35, l) == pytest.approx(p_eigenvalue_series(2, 5, 0.35, l), abs=1e-10)

    def test_log_branch_matches_series(self):
        for l in (30, 45, 60):
            assert p_eigenvalue(1, 25, 0.6, l) == pytest.approx(p_eigenvalue_series(1, 25, 0.6, l), abs=1e-12)

    def test_pure_loss_is_binomial(self):
        n, lam = 7, 0.3
        for l in range(n + 1):
            ref = math.comb(n, l) * (1 - lam) ** l * lam ** (n - l)
            assert p_eigenvalue(0.0, n, lam, l) == pytest.approx(ref, abs=1e-14)

    @given(st.floats(0.01, 4), st.integers(0, 60), st.floats(0.0, 1.0))
    def test_mean(self, N, n, lam):
        p = p_distribution(N, n, lam)
        mean = math.fsum(p.indices * p.weights)
        assert mean == pytest.approx(lam * N + (1 - lam) * n, abs=1e-9)
        assert p.total() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_lambda(self):
        with pytest.raises(UsageError):
            p_eigenvalue(1, 1, 1.5, 0)


class TestDyads:
    def test_single_photon_coherence(self):
        f = thermal_dyad_action(1, 0, 0.3, 0, l_max=3)
        assert f[0] == pytest.approx(math.sqrt(0.3), abs=1e-15)
        assert all(abs(f[l]) < 1e-15 for l in (1, 2, 3))

    def test_trace_preservation(self):
        assert math.fsum(thermal_dyad_action(3, 3, 0.6, 1).values()) == pytest.approx(1.0, abs=1e-12)

    def test_against_series(self):
        worst = 0.0
        for n in range(6):
            for i in range(6):
                f = thermal_dyad_action(n, i, 0.4, 1.3, l_max=5)
                for l in range(max(i - n, 0), 6):
                    worst = max(worst, abs(f[l] - thermal_dyad_series(n, i, l, 0.4, 1.3)))
        assert worst < 1e-10

    def test_support(self):
        assert min(thermal_dyad_action(1, 4, 0.5, 1.0)) == 3

    def test_diagonal_reduces_to_p(self):
        f = thermal_dyad_action(4, 4, 0.3, 2.0, l_max=10)
        for l in range(11):
            assert f[l] == pytest.approx(p_eigenvalue(2.0, 4, 0.7, l), abs=1e-14)


class TestKraus:
    def test_pure_loss_has_only_k0(self):
        terms = kraus_me_terms(0.4, 0.0, 2, 3)
        assert all(t.prefactor == 0 for t in terms if t.k > 0)

    def test_completeness(self):
        for ks in (kraus_me(0.4, 1.5, 12), kraus_bs(0.4, 1.5, 12)):
            assert np.max(np.abs(ks.completeness() - 1)) < 1e-8

    def test_matrices_consistent(self):
        ks = kraus_me(0.5, 0.5, 4)
        M = ks.matrices()
        s = np.einsum("tai,taj->ij", M, M)
        assert np.allclose(s, np.eye(4), atol=1e-8)

    def test_representations_agree_on_random_state(self):
        rho = random_dm(np.random.default_rng(11), 12)
        lam, nu = 0.4, 1.5
        d = output_cutoff(nu, lam, 11)
        a = kraus_me(lam, nu, 12, deficit_tol=1e-12).apply(rho, d)
        b = kraus_bs(lam, nu, 12, deficit_tol=1e-12).apply(rho, d)
        c = thermal_apply(rho, lam, nu, d)
        assert trace_distance(a, b) < 1e-9
        assert trace_distance(a, c) < 1e-9

    def test_term_amplitude_matches_vectorized(self):
        terms = {(t.k, t.m): t for t in kraus_me_terms(0.3, 0.7, 3, 4)}
        ks = kraus_me(0.3, 0.7, 5, k_max=3)
        for (k, m), t in terms.items():
            row = [r for r, s in enumerate(ks.shifts) if s == k - m and ks.amps[r, m] != 0]
            vals = [t.amplitude(n) for n in range(5)]
            assert any(np.allclose(ks.amps[r], vals, atol=1e-14) for r in row)


class TestLindblad:
    def test_fixed_point(self):
        out = lindblad_integrate(fock_dm(2, 40), 1.0, 30.0)
        tau = thermal_state(1.0, 40).weights
        assert np.abs(out.diagonal() - tau / tau.sum()).sum() < 1e-8

    def test_matches_closed_form(self):
        lam, nu, n = 0.5, 1.0, 3
        d = output_cutoff(nu, lam, n)
        out = lindblad_integrate(fock_dm(n, d), nu, -math.log(lam)).diagonal()
        ref = [p_eigenvalue(nu, n, 1 - lam, l) for l in range(d)]
        assert np.abs(out - ref).sum() < 1e-8

    def test_semigroup(self):
        rho = random_dm(np.random.default_rng(5), 6).resized(30)
        two = lindblad_integrate(lindblad_integrate(rho, 0.5, 0.3), 0.5, 0.4)
        one = lindblad_integrate(rho, 0.5, 0.7)
        assert trace_distance(one, two) < 1e-8

    def test_zero_time(self):
        rho = fock_dm(1, 3)
        assert lindblad_integrate(rho, 1.0, 0.0) is rho


def test_master_eq_factors():
    f = MasterEqFactors.at(1.2, 0.8)
    lam = math.exp(-0.8)
    assert f.F == pytest.approx((2.2 - 1.2 * lam) / math.sqrt(lam))
    assert f.E - f.G == pytest.approx(1 / f.f)
    with pytest.raises(UsageError):
        MasterEqFactors.at(1.0, 0.0)
