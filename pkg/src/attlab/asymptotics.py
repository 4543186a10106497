"""Limit distributions of the Fock-environment eigenvalues and their special functions."""

import math
from dataclasses import dataclass

import numpy as np

from attlab.errors import CutoffError, UsageError
from attlab.fock import FockDistribution, l1_distance, shannon_entropy, shift
from attlab.thermal import p_distribution

BESSEL_MAX_Z = 700.0
LIMIT_TAIL = 1e-10


def _bessel_log_series(k, z):
    # log I_k(z) by direct series, relative stop 1e-16 twice in a row
    if z == 0:
        return 0.0 if k == 0 else -math.inf
    lead = k * math.log(z / 2) - math.lgamma(k + 1)
    q = (z / 2) ** 2
    term, total, small, m = 1.0, 1.0, 0, 0
    while small < 2:
        term *= q / ((m + 1) * (k + m + 1))
        total += term
        m += 1
        small = small + 1 if term < 1e-16 * total else 0
        if m > 100_000:
            raise CutoffError("Bessel series did not converge")
    return lead + math.log(total)


def bessel_i(k, z):
    """Modified Bessel function of the first kind I_k(z), integer k >= 0, by its power series."""
    if k < 0 or z < 0:
        raise UsageError("bessel_i needs k >= 0 and z >= 0")
    if z > BESSEL_MAX_Z:
        raise OverflowError(f"z={z} exceeds {BESSEL_MAX_Z}")
    return math.exp(_bessel_log_series(k, z))


def laguerre(k, x):
    """Laguerre polynomial L_k(x) by the three-term recurrence."""
    if k < 0:
        raise UsageError("order must be non-negative")
    mant, scale = laguerre_sequence(k, x)
    return float(mant[k] * math.exp(scale[k]))


def laguerre_direct(k, x):
    """L_k(x) = sum_m (-1)^m C(k,m) x^m / m!."""
    return math.fsum((-1) ** m * math.comb(k, m) * x**m / math.factorial(m) for m in range(k + 1))


def laguerre_sequence(kmax, x):
    """(mantissa, log-scale) pairs with L_k(x) = mantissa[k] * exp(scale[k]) for k <= kmax.

    The recurrence is rescaled whenever values get large, so high orders do
    not overflow.
    """
    mant = np.empty(kmax + 1)
    scale = np.empty(kmax + 1)
    prev, cur, s = 1.0, 1.0 - x, 0.0
    mant[0], scale[0] = 1.0, 0.0
    if kmax >= 1:
        mant[1], scale[1] = cur, 0.0
    for k in range(1, kmax):
        nxt = ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
        prev, cur = cur, nxt
        if abs(cur) > 1e200:
            prev /= 1e200
            cur /= 1e200
            s += 200 * math.log(10)
        mant[k + 1], scale[k + 1] = cur, s
    return mant, scale


@dataclass(frozen=True)
class LimitDistributions:
    N: float
    c: float
    q: FockDistribution
    p: FockDistribution
    kmax: int

    def tails(self):
        return self.q.tail_mass, self.p.tail_mass


def _q_weights(N, c, kmax):
    z = 2 * c * math.sqrt(N * (N + 1))
    half_log_ratio = 0.5 * math.log(N / (N + 1))
    ks = np.arange(-kmax, kmax + 1)
    logs = np.array([
        -c * (2 * N + 1) + k * half_log_ratio + _bessel_log_series(abs(int(k)), z) for k in ks
    ])
    return np.exp(logs)


def _p_weights(N, c, kmax):
    mant, scale = laguerre_sequence(kmax, -c / (N * (N + 1)))
    k = np.arange(kmax + 1)
    logs = k * math.log(N) - (k + 1) * math.log(N + 1) - c / (N + 1) + scale + np.log(np.abs(mant))
    return np.sign(mant) * np.exp(logs)


def limit_distributions(N, c, kmax=None, tail_tol=LIMIT_TAIL):
    """The limit laws q (on the integers) and p (on n >= 0) for parameters N, c."""
    if N <= 0 or c < 0:
        raise UsageError("need N > 0 and c >= 0")
    grow = kmax is None
    kmax = kmax or 32
    while True:
        q = _q_weights(N, c, kmax)
        p = _p_weights(N, c, kmax)
        tq = 1.0 - math.fsum(q)
        tp = 1.0 - math.fsum(p)
        if max(tq, tp) < tail_tol:
            break
        if not grow:
            raise CutoffError(f"kmax={kmax} leaves tail {max(tq, tp):.2e}")
        kmax *= 2
        if kmax > 1 << 16:
            raise CutoffError("limit distributions did not converge")
    return LimitDistributions(
        N, c,
        FockDistribution(q, -kmax, max(tq, 0.0)),
        FockDistribution(p, 0, max(tp, 0.0)),
        kmax,
    )


def entropy_gap(N, c):
    """H(q(N,c)) - H(p(N,c))."""
    ld = limit_distributions(N, c)
    return shannon_entropy(ld.q) - shannon_entropy(ld.p)


def shifted_convergence(N, n, c):
    """l1 distances of the finite-n eigenvalue laws from their limits.

    Returns (|| shift(P(N,n,c/n), -n) - q ||_1, || P(N,n,1-c/n) - p ||_1).
    """
    if n < c or n <= 0:
        raise UsageError(f"need n >= c so that c/n is a transmissivity (n={n}, c={c})")
    ld = limit_distributions(N, c)
    dq = l1_distance(shift(p_distribution(N, n, c / n), -n), ld.q)
    dp = l1_distance(p_distribution(N, n, 1 - c / n), ld.p)
    return dq, dp
