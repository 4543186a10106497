import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from attlab.errors import InvalidStateError, ShapeError
from attlab.fock import (
    FockDistribution,
    MomentSummary,
    TruncatedDensityMatrix,
    bosonic_entropy_g as g,
    distance_to_fock,
    fidelity_pure,
    fock_distance_bound,
    fock_dm,
    moments,
    parity_expectation,
    point_mass,
    pure_dm,
    shannon_entropy,
    shift,
    thermal_state,
    trace_distance,
)


def random_dm(rng, d, rank=None):
    rank = rank or d
    a = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    m = a @ a.conj().T
    return TruncatedDensityMatrix(m / np.trace(m).real)


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / abs(np.diag(r)))


def psi_eps(eps, n):
    v = np.zeros(n + 2)
    v[n], v[n + 1] = math.sqrt(1 - eps), math.sqrt(eps)
    return v


class TestThermal:
    def test_vacuum(self):
        assert thermal_state(0, 8).weights.tolist() == [1.0] + [0.0] * 7

    def test_first_weights(self):
        w = thermal_state(1, 32).weights
        assert w[0] == pytest.approx(0.5, abs=1e-15)
        assert w[1] == pytest.approx(0.25, abs=1e-15)

    def test_tail_recorded(self):
        p = thermal_state(2, 64)
        assert p.total() == pytest.approx(1 - (2 / 3) ** 64, abs=1e-12)
        assert p.tail_mass == pytest.approx((2 / 3) ** 64, rel=1e-12)

    def test_moments(self):
        m = moments(thermal_state(1.5, 400))
        assert m.mean_photon == pytest.approx(1.5, abs=1e-10)
        assert m.photon_variance == pytest.approx(1.5 * 2.5, abs=1e-9)

    def test_rejects_negative_nu(self):
        with pytest.raises(ValueError):
            thermal_state(-0.1, 4)


class TestEntropy:
    def test_point_mass(self):
        assert shannon_entropy(point_mass(4)) == 0.0

    def test_fair_coin(self):
        assert shannon_entropy(FockDistribution(np.array([0.5, 0.5]))) == 1.0

    def test_thermal_equals_g(self):
        assert shannon_entropy(thermal_state(1, 200)) == pytest.approx(2.0, abs=1e-12)

    def test_g_values(self):
        assert g(0) == 0.0
        assert g(1) == 2.0
        # mpmath, 40 digits
        assert g(0.5) == pytest.approx(1.3774437510817343, abs=1e-14)

    def test_g_rejects_negative(self):
        with pytest.raises(ValueError):
            g(-1e-3)

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=12), st.integers(-50, 50))
    def test_shift_invariance(self, w, k):
        w = np.array(w)
        if w.sum() == 0:
            return
        p = FockDistribution(w / w.sum())
        assert shannon_entropy(shift(p, k)) == shannon_entropy(p)

    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidStateError):
            FockDistribution(np.array([1.1, -0.1]))


class TestDistances:
    def test_self(self):
        rho = random_dm(np.random.default_rng(1), 5)
        assert trace_distance(rho, rho) == pytest.approx(0, abs=1e-12)

    def test_orthogonal(self):
        assert trace_distance(fock_dm(0, 2), fock_dm(1, 2)) == pytest.approx(2.0)

    def test_psi_eps_distance(self):
        rho = pure_dm(psi_eps(0.09, 3))
        assert trace_distance(rho, fock_dm(3, 5)) == pytest.approx(0.6, abs=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            trace_distance(fock_dm(0, 2), fock_dm(0, 3))

    @given(st.integers(0, 10_000), st.integers(2, 8))
    def test_triangle_inequality(self, seed, d):
        rng = np.random.default_rng(seed)
        a, b, c = (random_dm(rng, d) for _ in range(3))
        assert trace_distance(a, c) <= trace_distance(a, b) + trace_distance(b, c) + 1e-10

    @given(st.integers(0, 10_000), st.integers(2, 8))
    def test_unitary_invariance(self, seed, d):
        rng = np.random.default_rng(seed)
        a, b = random_dm(rng, d), random_dm(rng, d)
        u = random_unitary(rng, d)
        ua = TruncatedDensityMatrix(u @ a.entries @ u.conj().T)
        ub = TruncatedDensityMatrix(u @ b.entries @ u.conj().T)
        assert trace_distance(ua, ub) == pytest.approx(trace_distance(a, b), abs=1e-10)

    @given(st.integers(0, 10_000), st.integers(2, 8))
    def test_fidelity_sandwich(self, seed, d):
        rng = np.random.default_rng(seed)
        psi = rng.normal(size=d) + 1j * rng.normal(size=d)
        psi /= np.linalg.norm(psi)
        rho = random_dm(rng, d, rank=2)
        F = fidelity_pure(psi, rho)
        half = 0.5 * trace_distance(pure_dm(psi), rho)
        assert 1 - F <= half + 1e-10
        assert half <= math.sqrt(max(1 - F * F, 0)) + 1e-10


class TestFockBound:
    def test_fock_itself(self):
        assert fock_distance_bound(MomentSummary(3.0, 0.0, 9.0), 3) == 0.0

    def test_tight_on_psi_eps(self):
        rho = pure_dm(psi_eps(0.09, 3))
        assert fock_distance_bound(moments(rho), 3) == pytest.approx(0.6, abs=1e-12)
        assert distance_to_fock(rho, 3) == pytest.approx(0.6, abs=1e-12)

    def test_thermal_vs_vacuum(self):
        p = thermal_state(1, 200)
        exact = distance_to_fock(p.to_matrix(), 0)
        assert exact == pytest.approx(1.0, abs=1e-12)
        assert fock_distance_bound(moments(p), 0) >= exact

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.integers(0, 9))
    def test_bound_dominates(self, w, n):
        w = np.array(w)
        if w.sum() == 0:
            return
        p = FockDistribution(w / w.sum())
        assert fock_distance_bound(moments(p), n) >= distance_to_fock(p.to_matrix(), n) - 1e-10


def test_parity():
    assert parity_expectation(fock_dm(2)) == 1.0
    assert parity_expectation(fock_dm(3)) == -1.0


def test_shift_point_mass():
    p = shift(point_mass(0), -3)
    assert p[-3] == 1.0 and shannon_entropy(p) == 0.0


def test_moment_summary_consistency():
    with pytest.raises(InvalidStateError):
        MomentSummary(1.0, 0.0, 2.0)


def test_negative_eigenvalue_is_an_error():
    with pytest.raises(InvalidStateError):
        TruncatedDensityMatrix(np.diag([1.2, -0.2])).eigenvalues()
