"""Capacity formulas, coherent information with Fock environments, and lower bounds."""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from attlab.errors import InvariantViolation, UsageError
from attlab.fock import FockDistribution, bosonic_entropy_g as g, shannon_entropy
from attlab.thermal import p_distribution

POSITIVITY_TOL = 1e-12
ENTROPY_TAIL = 1e-13


class BoundKind(Enum):
    EXACT = "exact_formula"
    LOWER = "lower_bound"
    UPPER = "upper_bound"


@dataclass(frozen=True)
class CapacityReport:
    value_bits: float
    kind: BoundKind
    quantity: str
    error_budget: float = 0.0


def _tail_entropy(m):
    # entropy budget for unaccounted probability mass m
    if m <= 0:
        return 0.0
    return -m * math.log2(m) if m < 1 / math.e else 1.0


def _entropy_with_budget(dist):
    return shannon_entropy(dist), _tail_entropy(dist.tail_mass)


def coherent_info_with_budget(N, n, lam):
    """(I_coh, error budget) for the Fock-environment attenuator and thermal input."""
    if n < 0:
        raise UsageError("n must be non-negative")
    h1, e1 = _entropy_with_budget(p_distribution(N, n, lam, ENTROPY_TAIL))
    h2, e2 = _entropy_with_budget(p_distribution(N, n, 1 - lam, ENTROPY_TAIL))
    return h1 - h2, e1 + e2


def coherent_info_fock_env(N, n, lam):
    """Coherent information of Phi_{lam,|n><n|} on the thermal input tau_N, in bits."""
    return coherent_info_with_budget(N, n, lam)[0]


def is_positive(x):
    return x > POSITIVITY_TOL


def cea_pure_loss(lam, N):
    """Entanglement-assisted capacity of the pure-loss channel."""
    return g(N) + g(lam * N) - g((1 - lam) * N)


def q_pure_loss(lam, N):
    """Quantum capacity of the pure-loss channel (zero for lam <= 1/2)."""
    if lam < 0.5:
        return 0.0
    return max(g(lam * N) - g((1 - lam) * N), 0.0)


def _g_clipped(x):
    if x < 0:
        if x < -1e-9:
            raise InvariantViolation(f"negative photon number {x}")
        return 0.0
    return g(x)


def c_classical_thermal(lam, nu, N):
    """Classical capacity of the thermal attenuator."""
    return g(lam * N + (1 - lam) * nu) - g((1 - lam) * nu)


def cea_thermal(lam, nu, N):
    """Entanglement-assisted capacity of the thermal attenuator."""
    Np = lam * N + (1 - lam) * nu
    D = math.sqrt(max((N + Np + 1) ** 2 - 4 * lam * N * (N + 1), 0.0))
    return (
        g(N) + g(Np)
        - _g_clipped((D + Np - N - 1) / 2)
        - _g_clipped((D - Np + N - 1) / 2)
    )


def capacity_lower_bounds(N, n, lam):
    """Lower bounds on C_ea, Q_ea and Q of Phi_{lam,|n><n|} with thermal input."""
    icoh, budget = coherent_info_with_budget(N, n, lam)
    gN = g(N)
    return (
        CapacityReport(gN + icoh, BoundKind.LOWER, "C_ea", budget),
        CapacityReport((gN + icoh) / 2, BoundKind.LOWER, "Q_ea", budget / 2),
        CapacityReport(max(icoh, 0.0), BoundKind.LOWER, "Q", budget),
    )


def _mixture(q, N, lam):
    mix = None
    for i, w in zip(q.indices, q.weights):
        if w == 0:
            continue
        p = p_distribution(N, int(i), lam, ENTROPY_TAIL)
        if mix is None:
            mix = np.zeros(len(p.weights))
        if len(p.weights) > len(mix):
            mix = np.concatenate([mix, np.zeros(len(p.weights) - len(mix))])
        mix[: len(p.weights)] += w * p.weights
    return FockDistribution(mix, 0, max(0.0, 1.0 - math.fsum(mix)))


def fock_diag_lower_bound(q, N, lam):
    """Coherent-information lower bound for the Fock-diagonal environment sum_i q_i |i><i|.

    H(sum_i q_i P(N,i,lam)) - H(sum_i q_i P(N,i,1-lam)) - H(q); for q a point
    mass at n it reduces to coherent_info_fock_env(N, n, lam).
    """
    if q.offset < 0:
        raise UsageError("environment distribution must live on n >= 0")
    return (
        shannon_entropy(_mixture(q, N, lam))
        - shannon_entropy(_mixture(q, N, 1 - lam))
        - shannon_entropy(q)
    )


def continuity_bound(eps, alpha, N0, N):
    """Uniform continuity bound on the energy-constrained quantum capacity."""
    if not 0 < eps < 1:
        raise UsageError(f"eps must lie in (0, 1), got {eps}")
    r = math.sqrt(eps)
    return 56 * r * g(4 * (alpha * N + N0) / r) + 6 * g(4 * r)


def mutual_info_half_check(n, N, tol=1e-10):
    """g(N) + I_coh at lam = 1/2, which must equal g(N)."""
    val = g(N) + coherent_info_fock_env(N, n, 0.5)
    if abs(val - g(N)) > tol:
        raise InvariantViolation(f"symmetric-point identity broken: {val} vs {g(N)}")
    return val
