"""Truncated single-mode Fock-space states, entropies, distances and moments."""

import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np

from attlab.errors import InvalidStateError, ShapeError

EIG_CLIP = 1e-12
TRACE_TOL = 1e-10
HERMITIAN_TOL = 1e-12


def tail_tolerance():
    """Tail mass above which results carry a truncation warning.

    Overridable through the ``ATTLAB_TAIL_TOL`` environment variable.
    """
    raw = os.environ.get("ATTLAB_TAIL_TOL")
    if raw is None:
        return 1e-8
    return float(raw)


class TruncationWarning(UserWarning):
    pass


def _warn_tail(tail):
    if tail > tail_tolerance():
        warnings.warn(f"truncation tail mass {tail:.3e} exceeds tolerance", TruncationWarning, stacklevel=3)


def default_cutoff(nu, n_max=0):
    """Cutoff rule for thermal-dominated states: n_max + ceil(10 (nu+1)) + 8."""
    return int(n_max + math.ceil(10 * (nu + 1)) + 8)


@dataclass(frozen=True)
class FockDistribution:
    """Probability vector over consecutive Fock indices starting at ``offset``.

    ``offset`` may be negative so that shifted distributions over the
    integers can be represented.
    """

    weights: np.ndarray
    offset: int = 0
    tail_mass: float = 0.0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1:
            raise ShapeError("weights must be one-dimensional")
        if np.any(w < -EIG_CLIP):
            raise InvalidStateError(f"negative weight {w.min():.3e}")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def indices(self):
        return np.arange(self.offset, self.offset + len(self.weights))

    def total(self):
        return float(math.fsum(self.weights))

    def __getitem__(self, k):
        j = k - self.offset
        if 0 <= j < len(self.weights):
            return float(self.weights[j])
        return 0.0

    def dense(self, dim):
        """Weights on indices 0..dim-1; requires no support below zero."""
        if self.offset < 0 and np.any(self.weights[: -self.offset] > 0):
            raise ShapeError("distribution has support below zero")
        out = np.zeros(dim)
        for k, w in zip(self.indices, self.weights):
            if 0 <= k < dim:
                out[k] = w
        return out

    def to_matrix(self, dim=None):
        """Diagonal density matrix holding this distribution."""
        if dim is None:
            dim = self.offset + len(self.weights)
        p = self.dense(dim)
        return TruncatedDensityMatrix(np.diag(p).astype(complex), tail_mass=max(0.0, 1.0 - math.fsum(p)))


def point_mass(n, offset=None):
    """Point mass at index ``n``."""
    if offset is None:
        offset = min(n, 0)
    w = np.zeros(n - offset + 1)
    w[-1] = 1.0
    return FockDistribution(w, offset)


def shift(p, k):
    """Translate a distribution by ``k`` (the displacement T_k |i> = |i+k>)."""
    return FockDistribution(p.weights, p.offset + k, p.tail_mass)


def l1_distance(p, q):
    """l1 distance between two distributions on the integers."""
    lo = min(p.offset, q.offset)
    hi = max(p.offset + len(p.weights), q.offset + len(q.weights))
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[p.offset - lo : p.offset - lo + len(p.weights)] = p.weights
    b[q.offset - lo : q.offset - lo + len(q.weights)] = q.weights
    return float(np.abs(a - b).sum())


@dataclass(frozen=True)
class TruncatedDensityMatrix:
    """Density matrix on span{|0>, ..., |d-1>} with the discarded trace recorded."""

    entries: np.ndarray
    tail_mass: float = field(default=0.0)

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"density matrix must be square, got {m.shape}")
        if np.abs(m - m.conj().T).max(initial=0.0) > max(HERMITIAN_TOL, 1e-12 * np.abs(m).max(initial=0.0)):
            raise InvalidStateError("matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)
        tail = float(self.tail_mass)
        if tail < 0:
            raise InvalidStateError("negative tail mass")
        object.__setattr__(self, "tail_mass", tail)

    @property
    def dim(self):
        return self.entries.shape[0]

    def trace(self):
        return float(np.trace(self.entries).real)

    def diagonal(self):
        return np.real(np.diag(self.entries)).copy()

    def check(self, tol=TRACE_TOL):
        """Raise if the trace bookkeeping or positivity is broken."""
        if abs(self.trace() + self.tail_mass - 1.0) > tol:
            raise InvalidStateError(f"trace {self.trace():.12f} + tail {self.tail_mass:.3e} != 1")
        ev = np.linalg.eigvalsh(self.entries)
        if ev.size and ev.min() < -EIG_CLIP * 100:
            raise InvalidStateError(f"negative eigenvalue {ev.min():.3e}")
        return self

    def eigenvalues(self):
        """Eigenvalues clipped at zero; anything below -1e-12 is an error."""
        ev = np.linalg.eigvalsh(self.entries)
        if ev.size and ev.min() < -EIG_CLIP:
            raise InvalidStateError(f"eigenvalue {ev.min():.3e} below clip threshold")
        return np.clip(ev, 0.0, None)

    def resized(self, dim):
        """Embed into (or cut down to) ``dim`` levels, moving cut mass to the tail."""
        out = np.zeros((dim, dim), dtype=complex)
        k = min(dim, self.dim)
        out[:k, :k] = self.entries[:k, :k]
        lost = float(np.real(np.trace(self.entries)) - np.real(np.trace(out)))
        return TruncatedDensityMatrix(out, self.tail_mass + max(lost, 0.0))

    def is_diagonal(self, tol=0.0):
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.abs(off).max(initial=0.0) <= tol)


def density_from_entries(m):
    """Wrap a matrix, attributing any trace deficit to truncation."""
    m = np.asarray(m, dtype=complex)
    tail = max(0.0, 1.0 - float(np.trace(m).real))
    return TruncatedDensityMatrix(m, tail)


def fock_dm(n, dim=None):
    """The projector |n><n|."""
    dim = n + 1 if dim is None else dim
    m = np.zeros((dim, dim), dtype=complex)
    m[n, n] = 1.0
    return TruncatedDensityMatrix(m)


def pure_dm(psi):
    psi = np.asarray(psi, dtype=complex)
    return density_from_entries(np.outer(psi, psi.conj()))


def as_density(state, dim=None):
    """Accept either a density matrix or a Fock distribution."""
    if isinstance(state, TruncatedDensityMatrix):
        return state if dim is None else state.resized(dim)
    if isinstance(state, FockDistribution):
        return state.to_matrix(dim)
    raise TypeError(f"unsupported state type {type(state).__name__}")


def thermal_state(nu, d):
    """Thermal law nu^n/(nu+1)^(n+1) on the first ``d`` levels."""
    if d < 1:
        raise ValueError("cutoff must be at least 1")
    if nu < 0:
        raise ValueError("mean photon number must be non-negative")
    n = np.arange(d)
    if nu == 0:
        w = (n == 0).astype(float)
        tail = 0.0
    else:
        r = nu / (nu + 1.0)
        w = np.exp(n * math.log(r)) / (nu + 1.0)
        tail = r**d
    return FockDistribution(w, 0, tail)


def thermal_cutoff_for_tail(nu, tol):
    """Smallest d with (nu/(nu+1))^d <= tol."""
    if nu == 0:
        return 1
    r = nu / (nu + 1.0)
    return max(1, int(math.ceil(math.log(tol) / math.log(r))))


def _xlog2x(p):
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


def shannon_entropy(p):
    """Shannon entropy in bits; accepts a FockDistribution or an array."""
    w = p.weights if isinstance(p, FockDistribution) else np.asarray(p, dtype=float)
    if w.size and w.min() < -EIG_CLIP:
        raise InvalidStateError(f"negative weight {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return float(max(0.0, -math.fsum(_xlog2x(w))))


def von_neumann_entropy(rho):
    return shannon_entropy(rho.eigenvalues())


def bosonic_entropy_g(nu):
    """Entropy in bits of the thermal state with mean photon number ``nu``."""
    if nu < 0:
        raise ValueError(f"g is defined for nu >= 0, got {nu}")
    if nu == 0:
        return 0.0
    return float((nu + 1) * math.log2(nu + 1) - nu * math.log2(nu))


def trace_norm(m):
    m = np.asarray(m, dtype=complex)
    return float(np.abs(np.linalg.eigvalsh(0.5 * (m + m.conj().T))).sum())


def trace_distance(rho, sigma):
    """Full trace norm ||rho - sigma||_1 (callers apply the factor 1/2)."""
    if rho.dim != sigma.dim:
        raise ShapeError(f"dimension mismatch {rho.dim} vs {sigma.dim}")
    return trace_norm(rho.entries - sigma.entries)


def fidelity_pure(psi, rho):
    """F = sqrt(<psi|rho|psi>) for a pure reference state."""
    psi = np.asarray(psi, dtype=complex)
    return float(math.sqrt(max(0.0, np.real(psi.conj() @ rho.entries @ psi))))


@dataclass(frozen=True)
class MomentSummary:
    mean_photon: float
    photon_variance: float
    second_moment: float

    def __post_init__(self):
        if abs(self.second_moment - (self.photon_variance + self.mean_photon**2)) > 1e-9 * max(1.0, self.second_moment):
            raise InvalidStateError("second moment inconsistent with mean and variance")

    @classmethod
    def from_mean_second(cls, mean, second):
        return cls(float(mean), float(max(second - mean * mean, 0.0)), float(second))

    @classmethod
    def from_mean_variance(cls, mean, var):
        return cls(float(mean), float(var), float(var + mean * mean))


def moments(state):
    """Photon-number mean, variance and second moment."""
    if isinstance(state, FockDistribution):
        k = state.indices.astype(float)
        w = state.weights
    else:
        w = state.diagonal()
        k = np.arange(len(w), dtype=float)
    mean = math.fsum(k * w)
    second = math.fsum(k * k * w)
    return MomentSummary.from_mean_variance(mean, max(second - mean * mean, 0.0))


def thermal_moments(nu):
    return MomentSummary.from_mean_variance(nu, nu * (nu + 1))


def parity_expectation(state):
    """Expectation of (-1)^(number operator)."""
    if isinstance(state, FockDistribution):
        signs = np.where(state.indices % 2 == 0, 1.0, -1.0)
        return float(math.fsum(signs * state.weights))
    d = state.diagonal()
    signs = np.where(np.arange(len(d)) % 2 == 0, 1.0, -1.0)
    return float(math.fsum(signs * d))


def parity_conjugate(rho):
    """V rho V with V = (-1)^(number operator)."""
    s = np.where(np.arange(rho.dim) % 2 == 0, 1.0, -1.0)
    return TruncatedDensityMatrix(rho.entries * np.outer(s, s), rho.tail_mass)


def fock_distance_bound(m, n):
    """Upper bound 2 sqrt(V + (mean - n)^2) on ||rho - |n><n| ||_1."""
    return 2.0 * math.sqrt(max(m.photon_variance + (m.mean_photon - n) ** 2, 0.0))


def distance_to_fock(rho, n):
    """Exact ||rho - |n><n| ||_1 on the truncated space (plus the tail)."""
    d = max(rho.dim, n + 1)
    r = rho.resized(d)
    return trace_norm(r.entries - fock_dm(n, d).entries) + r.tail_mass
