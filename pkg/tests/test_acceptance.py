"""The twelve acceptance criteria, one test each; a PASS/FAIL line per criterion is printed at the end."""

import contextlib
import io
import math
import time
from itertools import product

import mpmath
import numpy as np
import pytest
from scipy.stats import binom

from attlab import protocol as proto
from attlab.asymptotics import entropy_gap, limit_distributions, shifted_convergence
from attlab.beamsplitter import ChannelSpec, attenuator_apply, bs_coefficients, bs_unitary_dense
from attlab.capacities import (
    capacity_lower_bounds,
    cea_pure_loss,
    coherent_info_fock_env,
    mutual_info_half_check,
)
from attlab.cli import main
from attlab.fock import (
    FockDistribution,
    bosonic_entropy_g as g,
    distance_to_fock,
    fock_dm,
    moments,
    shannon_entropy,
    thermal_state,
)
from attlab.protocol import Sigma0, TriggerPlan
from attlab.thermal import kraus_bs, kraus_me, lindblad_integrate, output_cutoff, p_eigenvalue

CRITERIA = [
    ("test_c01_channel_oracles", "1  channel oracles agree (closed form, two Kraus sets, Lindblad)"),
    ("test_c02_beam_splitter_unitarity", "2  beam-splitter unitarity and dense-exponential oracle"),
    ("test_c03_symmetric_point", "3  symmetric-point identities"),
    ("test_c04_limit_identities", "4  limit-distribution identities and convergence"),
    ("test_c05_entropy_gap_positive", "5  entropy gap positive at c = N + 2"),
    ("test_c06_fock_distance_bound_k_triggers", "6  k-trigger distance bound, zero violations"),
    ("test_c07_two_trigger_bound", "7  two-trigger sqrt(lam) bound, zero violations"),
    ("test_c08_single_trigger_ratio", "8  single-trigger rate / pure-loss C_ea >= 41"),
    ("test_c09_one_trigger_limit", "9  one-trigger limit distance vs Bessel oracle"),
    ("test_c10_moment_identities", "10 moment identities and no-go variance floor"),
    ("test_c11_icoh_above_constant", "11 coherent information above 5.133e-6"),
    ("test_c12_determinism", "12 byte-identical command output"),
]

LAMS_GRID = (0.2, 0.3, 0.5)


def normalized_moments(s0):
    d = s0.distribution()
    return moments(FockDistribution(d.weights / d.weights.sum()))


def test_c01_channel_oracles():
    start = time.perf_counter()
    worst = 0.0
    for lam, nu in product((0.2, 0.5, 0.8), (0.0, 1.0, 3.0)):
        d = output_cutoff(nu, lam, 8)
        km = kraus_me(lam, nu, d)
        kb = kraus_bs(lam, nu, d, deficit_tol=1e-11)
        for n in range(9):
            routes = [
                np.array([p_eigenvalue(nu, n, 1 - lam, l) for l in range(d)]),
                km.apply(fock_dm(n, d), d).diagonal(),
                kb.apply(fock_dm(n, d), d).diagonal(),
                lindblad_integrate(fock_dm(n, d), nu, -math.log(lam)).diagonal(),
            ]
            for a in range(4):
                for b in range(a + 1, 4):
                    worst = max(worst, float(np.abs(routes[a] - routes[b]).sum()))
    assert worst <= 1e-8
    assert time.perf_counter() - start < 120


def test_c02_beam_splitter_unitarity():
    for lam in np.linspace(0.05, 0.95, 10):
        for t in range(41):
            for i in range(t + 1):
                assert abs(math.fsum(bs_coefficients(i, t - i, lam) ** 2) - 1) <= 1e-9
    for lam in (0.1, 0.5, 0.9):
        for M, U in bs_unitary_dense(lam, 6).items():
            for j in range(M + 1):
                assert np.max(np.abs(U[:, j] - bs_coefficients(M - j, j, lam))) <= 1e-10


def test_c03_symmetric_point():
    for N in (0.5, 1.0, 2.0):
        for n in range(21):
            assert abs(coherent_info_fock_env(N, n, 0.5)) <= 1e-10
            assert abs(mutual_info_half_check(n, N) - g(N)) <= 1e-10


def test_c04_limit_identities():
    for N, c in ((2.0, 3.0), (0.5, 1.0), (1.0, 0.2)):
        ld = limit_distributions(N, c)
        assert abs(math.fsum(ld.q.weights) - 1) <= 1e-9
        assert abs(float(np.dot(ld.q.indices, ld.q.weights)) + c) <= 1e-9
        p0 = limit_distributions(N, 0.0).p.weights[:30]
        geometric = np.array([N**j / (N + 1) ** (j + 1) for j in range(30)])
        assert np.max(np.abs(p0 - geometric)) <= 1e-14
    d100 = shifted_convergence(2.0, 100, 3.0)[0]
    d400 = shifted_convergence(2.0, 400, 3.0)[0]
    assert d400 < d100


def test_c05_entropy_gap_positive():
    start = time.perf_counter()
    assert all(entropy_gap(N, N + 2) > 0 for N in (0.25, 0.5, 1.0, 2.0, 4.0))
    assert time.perf_counter() - start < 30


def test_c06_fock_distance_bound_k_triggers():
    violations = 0
    for s0 in (Sigma0.vacuum(), Sigma0.thermal(0.5)):
        eta_of = {n: proto.fock_distance_eta(n, s0.moments()) for n in range(5)}
        for n, k, lam in product(range(5), range(1, 6), LAMS_GRID):
            env = proto.env_after_triggers(TriggerPlan(n, lam, k, s0))
            if distance_to_fock(env, n) > eta_of[n] * lam ** (k / 2):
                violations += 1
    assert violations == 0


def test_c07_two_trigger_bound():
    start = time.perf_counter()
    violations = 0
    for s0 in (Sigma0.vacuum(), Sigma0.thermal(0.5)):
        for lam in (0.05, 0.1, 0.2, 0.5):
            env, bound, n = proto.two_trigger_env(lam, s0)
            assert 1 / lam - 1 <= n <= 1 / lam
            if distance_to_fock(env, n) > bound:
                violations += 1
    assert violations == 0
    assert time.perf_counter() - start < 300


def test_c08_single_trigger_ratio():
    lam, N, n = 0.002, 0.5, 100
    env, z = proto.single_trigger_binomial(n, lam, N)
    assert z / cea_pure_loss(lam, N) >= 41
    # second route: mixtures read off the channel output, binomial entropy from scipy
    pmf = binom.pmf(np.arange(n + 1), n, 1 - lam)
    q = FockDistribution(pmf)
    tau = thermal_state(N, 60)
    tau = FockDistribution(tau.weights / tau.weights.sum())
    h = [shannon_entropy(attenuator_apply(ChannelSpec(x, q), tau).diagonal()) for x in (lam, 1 - lam)]
    z2 = g(N) + h[0] - h[1] - shannon_entropy(q)
    assert z == pytest.approx(z2, abs=1e-9)


def test_c09_one_trigger_limit():
    for nu in (0.0, 0.5, 1.0, 2.0):
        with mpmath.workdps(40):
            ref = 2 * (1 - mpmath.exp(-(2 * nu + 1)) * mpmath.besseli(0, 2 * mpmath.sqrt(nu * (nu + 1))))
        val = proto.one_trigger_limit_distance(nu)
        assert abs(val - float(ref)) <= 1e-12
        assert val > 0


def test_c10_moment_identities():
    for s0 in (Sigma0.vacuum(), Sigma0.thermal(0.5)):
        m0 = normalized_moments(s0)
        for n, k, lam in product(range(5), range(1, 5), LAMS_GRID):
            env = proto.env_after_triggers(TriggerPlan(n, lam, k, s0))
            tr = env.trace()
            got = moments(env)
            ref = proto.env_moments(n, lam, k, m0)
            assert abs(got.mean_photon / tr - ref.mean_photon) <= 1e-9
            var = got.second_moment / tr - (got.mean_photon / tr) ** 2
            assert abs(var - ref.photon_variance) <= 1e-9
    for nu in (0.1, 0.5, 2.0):
        for n, k, lam in product(range(5), range(1, 6), LAMS_GRID):
            v = proto.no_go_variance(n, lam, k, nu)
            floor = lam ** (2 * k) * nu * (nu + 1)
            assert v >= floor > 0


def test_c11_icoh_above_constant():
    constant = 5.133e-6
    pairs = [(0.4, 20), (0.1, 10), (0.02, 40)]
    q_bounds = [capacity_lower_bounds(0.5, n, lam)[2].value_bits for lam, n in pairs]
    assert any(q > constant for q in q_bounds)


COMMANDS = [
    ["selftest"],
    ["icoh-sweep"],
    ["nbar"],
    ["entropy-gap"],
    ["prob-convergence"],
    ["protocol", "--nu", "0", "0.5", "--k", "1", "2", "3"],
    ["protocol", "--delta-t", "0.001", "0.01", "0.1"],
    ["appendix-b"],
    ["appendix-c"],
    ["fiber", "--length", "0", "15", "100"],
]


def _capture(argv):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv + ["--jobs", "1"])
    return code, buf.getvalue()


def test_c12_determinism():
    for argv in COMMANDS:
        first = _capture(argv)
        second = _capture(argv)
        assert first[0] == 0
        assert first == second, argv


if __name__ == "__main__":
    for name, title in CRITERIA:
        try:
            globals()[name]()
            status = "PASS"
        except AssertionError:
            status = "FAIL"
        print(f"{status:7s} {title}")
