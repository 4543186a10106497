"""Fast invariant suite behind ``attlab selftest``; each check yields one row."""

import math

import numpy as np
from scipy.special import i0e

from attlab import protocol as proto
from attlab.asymptotics import entropy_gap, limit_distributions
from attlab.beamsplitter import bs_coefficients, bs_unitary_dense
from attlab.capacities import cea_pure_loss, coherent_info_fock_env, mutual_info_half_check
from attlab.fock import bosonic_entropy_g as g, fock_dm, moments
from attlab.thermal import kraus_bs, kraus_me, lindblad_integrate, output_cutoff, p_eigenvalue


def _bs_unitarity():
    return max(
        abs(float(np.sum(bs_coefficients(i, t - i, lam) ** 2)) - 1)
        for lam in (0.13, 0.5, 0.77)
        for t in range(41)
        for i in range(t + 1)
    )


def _bs_dense():
    worst = 0.0
    for lam in (0.3, 0.8):
        blocks = bs_unitary_dense(lam, 7)
        for M, U in blocks.items():
            for j in range(M + 1):
                # column for |M-j, j>, rows |M-m, m>
                worst = max(worst, float(np.max(np.abs(U[:, j] - bs_coefficients(M - j, j, lam)))))
    return worst


def _channel_routes():
    worst = 0.0
    for lam, nu in ((0.5, 1.0), (0.2, 0.0)):
        d = output_cutoff(nu, lam, 4)
        km = kraus_me(lam, nu, d)
        kb = kraus_bs(lam, nu, d, deficit_tol=1e-11)
        for n in (0, 4):
            ref = np.array([p_eigenvalue(nu, n, 1 - lam, l) for l in range(d)])
            routes = (
                km.apply(fock_dm(n, d), d).diagonal(),
                kb.apply(fock_dm(n, d), d).diagonal(),
                lindblad_integrate(fock_dm(n, d), nu, -math.log(lam)).diagonal(),
            )
            worst = max(worst, *(float(np.abs(r - ref).sum()) for r in routes))
    return worst


def _symmetric_point():
    worst = 0.0
    for N in (0.5, 1.0, 2.0):
        for n in (0, 5, 20):
            worst = max(worst, abs(coherent_info_fock_env(N, n, 0.5)))
            mutual_info_half_check(n, N)
    return worst


def _limit_identities():
    ld = limit_distributions(2.0, 3.0)
    mean_q = float(np.dot(ld.q.indices, ld.q.weights))
    return max(abs(math.fsum(ld.q.weights) - 1), abs(mean_q + 3.0))


def _gap_min():
    return min(entropy_gap(N, N + 2) for N in (0.25, 0.5, 1.0, 2.0, 4.0))


def _protocol_grid():
    # worst (exact - bound) and worst moment mismatch over a small grid
    slack, mism = -math.inf, 0.0
    for nu in (0.0, 0.5):
        s0 = proto.Sigma0.thermal(nu)
        dist = s0.distribution()
        m0 = moments(type(dist)(dist.weights / dist.weights.sum()))
        for n, k, lam in ((1, 2, 0.3), (2, 3, 0.5), (3, 1, 0.2)):
            r = proto.run_protocol(proto.TriggerPlan(n, lam, k, s0))
            slack = max(slack, r.exact_distance - r.closed_bound, r.exact_distance - r.moment_bound)
            m = moments(r.env)
            tr = r.env.trace()
            cf = proto.env_moments(n, lam, k, m0)
            mism = max(mism, abs(m.mean_photon / tr - cf.mean_photon), abs(m.second_moment / tr - cf.second_moment))
    return slack, mism


def _two_trigger():
    slack = -math.inf
    for lam in (0.1, 0.2, 0.5):
        env, bound, n = proto.two_trigger_env(lam, proto.Sigma0.vacuum())
        slack = max(slack, proto.distance_to_fock(env, n) - bound)
    return slack


def _one_trigger_bessel():
    worst = 0.0
    for nu in (0.0, 0.5, 1.0, 2.0):
        z = 2 * math.sqrt(nu * (nu + 1))
        ref = 2 * (1 - i0e(z) * math.exp(z - (2 * nu + 1)))
        worst = max(worst, abs(proto.one_trigger_limit_distance(nu) - ref))
    return worst


def run_checks():
    """Rows of (check, value, op, limit, passed); deterministic."""
    slack, mism = _protocol_grid()
    _, z = proto.single_trigger_binomial(100, 0.002, 0.5)
    raw = [
        ("bs_unitarity", _bs_unitarity(), "<=", 1e-9),
        ("bs_dense_oracle", _bs_dense(), "<=", 1e-10),
        ("channel_routes", _channel_routes(), "<=", 1e-8),
        ("symmetric_point", _symmetric_point(), "<=", 1e-10),
        ("limit_identities", _limit_identities(), "<=", 1e-9),
        ("entropy_gap_min", _gap_min(), ">", 0.0),
        ("protocol_bound_slack", slack, "<=", 0.0),
        ("protocol_moments", mism, "<=", 1e-9),
        ("two_trigger_slack", _two_trigger(), "<=", 0.0),
        ("single_trigger_ratio", z / cea_pure_loss(0.002, 0.5), ">=", 41.0),
        ("one_trigger_bessel", _one_trigger_bessel(), "<=", 1e-12),
        ("icoh_above_constant", coherent_info_fock_env(0.5, 20, 0.4), ">", 5.133e-6),
        ("g_of_zero", g(0.0), "<=", 0.0),
    ]
    ops = {"<=": lambda a, b: a <= b, ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}
    return [
        {"check": name, "value": float(v), "op": op, "limit": lim, "passed": bool(ops[op](v, lim))}
        for name, v, op, lim in raw
    ]
