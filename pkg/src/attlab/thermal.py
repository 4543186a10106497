"""Thermal attenuator Phi_{lam, tau_nu}: closed forms, Kraus sets and a Lindblad oracle."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from attlab.beamsplitter import bs_coefficients, coefficient_table
from attlab.errors import CutoffError, IntegratorError, UsageError
from attlab.fock import (
    FockDistribution,
    TruncatedDensityMatrix,
    as_density,
    tail_tolerance,
    thermal_state,
    trace_norm,
)

SMALL_INDEX = 40
KRAUS_DEFICIT = 1e-8
RK4_TOL = 1e-9


def _check(lam, N):
    if not 0.0 <= lam <= 1.0:
        raise UsageError(f"transmissivity must lie in [0, 1], got {lam}")
    if N < 0:
        raise UsageError(f"thermal photon number must be >= 0, got {N}")


def _p_direct(N, n, lam, l):
    terms = []
    for m in range(max(0, n - l), n + 1):
        terms.append(
            lam ** (2 * m + l - n) * (1 - lam) ** (n - m) * N ** (l + m - n) * (N + 1) ** m
            * math.comb(n, m) * math.comb(l, n - m)
        )
    return math.fsum(terms) / (1 + N * lam) ** (l + n + 1)


def _log_pow(base, e):
    # 0^0 = 1 convention, elementwise
    e = np.asarray(e, dtype=float)
    if base == 0:
        return np.where(e == 0, 0.0, -np.inf)
    return e * math.log(base)


def _p_log(N, n, lam, ls):
    ls = np.atleast_1d(np.asarray(ls))
    m = np.arange(n + 1)[None, :]
    l = ls[:, None]
    valid = m >= n - l
    with np.errstate(invalid="ignore"):
        lt = (
            _log_pow(lam, 2 * m + l - n)
            + _log_pow(1 - lam, n - m)
            + _log_pow(N, np.maximum(l + m - n, 0))
            + _log_pow(N + 1, m)
            + gammaln(n + 1) - gammaln(m + 1) - gammaln(n - m + 1)
            + gammaln(l + 1) - gammaln(n - m + 1) - gammaln(np.maximum(l - n + m, 0) + 1)
        )
    lt = np.where(valid, lt, -np.inf)
    out = logsumexp(lt, axis=1) - (l[:, 0] + n + 1) * math.log1p(N * lam)
    return np.exp(out)


def p_eigenvalue(N, n, lam, l):
    """P_l(N, n, lam): probability of |l> in Phi_{lam, |n><n|}(tau_N).

    Equivalently the l-th eigenvalue of Phi_{1-lam, tau_N}(|n><n|).
    """
    _check(lam, N)
    if n < 0 or l < 0:
        raise UsageError("Fock indices must be non-negative")
    if lam == 0.0:
        return 1.0 if l == n else 0.0
    if lam == 1.0:
        return thermal_state(N, l + 1).weights[l]
    if n + l <= SMALL_INDEX:
        return _p_direct(N, n, lam, l)
    return float(_p_log(N, n, lam, [l])[0])


def p_distribution(N, n, lam, tol=1e-13, l_max=None):
    """The full law {P_l(N, n, lam)}_l, summed until the residual mass is below ``tol``."""
    _check(lam, N)
    if lam == 0.0:
        w = np.zeros(n + 1)
        w[n] = 1.0
        return FockDistribution(w)
    if lam == 1.0:
        from attlab.fock import thermal_cutoff_for_tail

        d = thermal_cutoff_for_tail(N, tol) if l_max is None else l_max + 1
        return thermal_state(N, d)
    mean = lam * N + (1 - lam) * n
    chunk = max(64, int(2 * mean) + 64)
    weights = np.empty(0)
    while True:
        start = len(weights)
        stop = start + chunk if l_max is None else l_max + 1
        ls = np.arange(start, stop)
        small = ls + n <= SMALL_INDEX
        block = np.empty(len(ls))
        block[small] = [_p_direct(N, n, lam, int(l)) for l in ls[small]]
        if (~small).any():
            block[~small] = _p_log(N, n, lam, ls[~small])
        weights = np.concatenate([weights, block])
        residual = 1.0 - math.fsum(weights)
        if l_max is not None or (residual < tol and len(weights) > mean):
            break
        if len(weights) > 2 * mean + 64 and math.fsum(block) < tol * 1e-3:
            # what is left of the residual is rounding, not missing mass
            break
        if len(weights) > 200_000:
            raise CutoffError("P distribution did not converge")
    return FockDistribution(weights, 0, max(residual, 0.0))


def p_eigenvalue_series(N, n, lam, l, tol=1e-15, k_max=100_000):
    """Series oracle: sum_k tau_N[k] |c_{k+n-l}^{(k,n)}(lam)|^2."""
    r = N / (N + 1)
    total = []
    k = max(l - n, 0)
    weight_left = r**k
    while k < k_max:
        w = (1 - r) * r**k
        c = bs_coefficients(k, n, lam)
        total.append(w * c[k + n - l] ** 2)
        weight_left = r ** (k + 1)
        if weight_left < tol:
            break
        k += 1
    return math.fsum(total)


@dataclass(frozen=True)
class MasterEqFactors:
    """Time-dependent factors of the thermal master-equation solution, lam = exp(-t)."""

    N: float
    t: float
    E: float
    G: float
    F: float
    f: float

    @classmethod
    def at(cls, N, t):
        if t <= 0:
            raise UsageError("t must be positive")
        f = (2 * N + 1 + 1 / math.tanh(t / 2)) / 2
        F = math.cosh(t / 2) + (2 * N + 1) * math.sinh(t / 2)
        out = cls(N, t, (N + 1) / f, N / f, F, f)
        lam = math.exp(-t)
        if not math.isclose(F, (N + 1 - N * lam) / math.sqrt(lam), rel_tol=1e-10):
            raise AssertionError("F factor inconsistent")
        if not math.isclose(f, (N + 1 - N * lam) / (1 - lam), rel_tol=1e-10):
            raise AssertionError("f factor inconsistent")
        return out


def thermal_dyad_action(n, i, lam, nu, tol=1e-14, l_max=None):
    """Coefficients f_{n,i,l} with Phi_{lam,tau_nu}(|n><i|) = sum_l f_{n,i,l} |l+n-i><l|.

    Returns a dict keyed by l, starting at max(i-n, 0).
    """
    _check(lam, nu)
    mu = 1 - lam
    den = mu * nu + 1
    out = {}
    l = max(i - n, 0)
    while True:
        terms = []
        for m in range(max(i - l, 0), min(n, i) + 1):
            e_nu = l + m - i
            e_mu = 2 * m + l - i
            e_lam = (n + i - 2 * m) / 2
            lg = (
                0.5 * (gammaln(n + 1) + gammaln(i + 1) + gammaln(l + 1) + gammaln(l + n - i + 1))
                - gammaln(n - m + 1) - gammaln(i - m + 1) - gammaln(m + 1) - gammaln(l + m - i + 1)
                - (l + n + 1) * math.log(den)
            )
            val = math.exp(lg) * (nu**e_nu if e_nu else 1.0) * (nu + 1) ** m
            val *= (mu**e_mu if e_mu else 1.0) * (lam**e_lam if e_lam else 1.0)
            terms.append(val)
        out[l] = math.fsum(terms)
        if l_max is not None:
            if l >= l_max:
                break
        elif l > n + i + 4 and (nu == 0 or abs(out[l]) < tol * max(1.0, max(abs(v) for v in out.values()))):
            break
        l += 1
    return out


def thermal_dyad_series(n, i, l, lam, nu, tol=1e-16):
    """Series oracle for f_{n,i,l} built from beam-splitter amplitudes."""
    r = nu / (nu + 1)
    k = max(l - i, 0)
    total = []
    while True:
        m = k + i - l
        cn = bs_coefficients(n, k, lam)
        ci = bs_coefficients(i, k, lam)
        if 0 <= m <= min(n, i) + k:
            total.append(r**k / (nu + 1) * cn[m] * ci[m])
        if nu == 0 or r**k < tol:
            break
        k += 1
    return math.fsum(total)


def thermal_apply(rho, lam, nu, dim_out=None):
    """Phi_{lam, tau_nu}(rho) from the dyad closed form."""
    rho = as_density(rho)
    d = rho.dim
    dim_out = dim_out or d
    out = np.zeros((dim_out, dim_out), dtype=complex)
    for n in range(d):
        for i in range(d):
            if rho.entries[n, i] == 0:
                continue
            f = thermal_dyad_action(n, i, lam, nu, l_max=dim_out - 1 + max(i - n, 0))
            for l, v in f.items():
                p = l + n - i
                if p < dim_out and l < dim_out:
                    out[p, l] += rho.entries[n, i] * v
    return TruncatedDensityMatrix(out, max(0.0, 1.0 - float(np.trace(out).real)))


@dataclass(frozen=True)
class KrausTerm:
    """One operator of the master-equation Kraus family, indexed by (k, m)."""

    k: int
    m: int
    prefactor: float
    base: float

    def amplitude(self, n):
        """<n-m+k| M_{k,m} |n>, zero when n < m."""
        if n < self.m or self.prefactor == 0:
            return 0.0
        lg = 0.5 * (gammaln(n + 1) - gammaln(n - self.m + 1))
        lg += 0.5 * (gammaln(n - self.m + self.k + 1) - gammaln(n - self.m + 1))
        power = self.base ** (n - self.m) if n > self.m else 1.0
        return self.prefactor * math.exp(lg) * power


@dataclass(frozen=True)
class KrausSet:
    """Shift-diagonal operators: term t maps |n> to amps[t, n] |n + shifts[t]>."""

    shifts: np.ndarray
    amps: np.ndarray
    dim_in: int
    deficit: float

    @property
    def dim_out(self):
        return self.dim_in + int(max(self.shifts.max(), 0))

    def completeness(self):
        """Diagonal of sum_t M_t^dag M_t on the input space."""
        return (self.amps**2).sum(axis=0)

    def matrices(self):
        out = np.zeros((len(self.shifts), self.dim_out, self.dim_in))
        n = np.arange(self.dim_in)
        for t, s in enumerate(self.shifts):
            ok = (n + s >= 0) & (n + s < self.dim_out)
            out[t, n[ok] + s, n[ok]] = self.amps[t, ok]
        return out

    def apply(self, rho, dim_out=None):
        rho = as_density(rho, self.dim_in)
        d = self.dim_in
        big = self.dim_out
        if rho.is_diagonal():
            p = rho.diagonal()
            diag = np.zeros(big)
            for s, a in zip(self.shifts, self.amps):
                lo = max(0, -s)
                diag[lo + s : d + s] += a[lo:] ** 2 * p[lo:]
            out = np.diag(diag).astype(complex)
        else:
            out = np.zeros((big, big), dtype=complex)
            e = rho.entries
            for s, a in zip(self.shifts, self.amps):
                lo = max(0, -s)
                v = a[lo:]
                out[lo + s : d + s, lo + s : d + s] += np.outer(v, v) * e[lo:, lo:]
        res = TruncatedDensityMatrix(out, max(0.0, 1.0 - float(np.trace(out).real)))
        return res.resized(dim_out) if dim_out is not None else res


def kraus_me_terms(lam, nu, k_max, m_max):
    """The (k, m) family from the master-equation solution."""
    _check(lam, nu)
    mu = 1 - lam
    den = mu * nu + 1
    terms = []
    for k in range(k_max + 1):
        for m in range(m_max + 1):
            lg = -gammaln(k + 1) - gammaln(m + 1) - (m + k + 1) * math.log(den)
            val = math.exp(0.5 * lg)
            val *= math.sqrt((nu**k if k else 1.0) * (nu + 1) ** m * (mu ** (m + k) if m + k else 1.0))
            terms.append(KrausTerm(k, m, val, math.sqrt(lam) / den))
    return terms


def _grow(build, k_start, deficit_tol, what):
    k_max = k_start
    while True:
        ks = build(k_max)
        if ks.deficit < deficit_tol:
            return ks
        if k_max > 4096:
            raise CutoffError(f"{what}: completeness deficit {ks.deficit:.2e} at k_max={k_max}; use a larger cutoff")
        k_max *= 2


def _me_amplitudes(lam, nu, k_max, dim_in):
    # amps[k, m, n] = <n-m+k| M_{k,m} |n>, evaluated in log space
    mu = 1 - lam
    den = mu * nu + 1
    k = np.arange(k_max + 1)[:, None, None]
    m = np.arange(dim_in)[None, :, None]
    n = np.arange(dim_in)[None, None, :]
    ok = n >= m
    nm = np.where(ok, n - m, 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = 0.5 * (
            _log_pow(nu, k) + _log_pow(nu + 1, m) + _log_pow(mu, m + k)
            - gammaln(k + 1) - gammaln(m + 1) - (m + k + 1) * math.log(den)
        )
        lg = lg + 0.5 * (gammaln(n + 1) + gammaln(nm + k + 1)) - gammaln(nm + 1)
        lg = lg + _log_pow(math.sqrt(lam) / den, nm)
    amps = np.where(ok, np.exp(lg), 0.0)
    shifts = np.broadcast_to(k - m, amps.shape)[..., 0]
    return shifts.reshape(-1), amps.reshape(-1, dim_in)


def _finish(shifts, amps, dim_in):
    keep = np.any(amps != 0, axis=1)
    amps = amps[keep]
    deficit = float(np.max(np.abs(1.0 - (amps**2).sum(axis=0))))
    return KrausSet(np.asarray(shifts)[keep], amps, dim_in, deficit)


def _k_start(nu, lam, deficit_tol):
    x = (1 - lam) * nu
    if x == 0:
        return 1
    return max(8, int(math.ceil(math.log(deficit_tol) / math.log(x / (x + 1)))))


def kraus_me(lam, nu, dim_in, k_max=None, deficit_tol=KRAUS_DEFICIT):
    """Master-equation Kraus set on inputs |0>..|dim_in-1>, k_max grown until complete."""
    _check(lam, nu)

    def build(kc):
        return _finish(*_me_amplitudes(lam, nu, kc, dim_in), dim_in)

    if k_max is not None:
        return build(k_max)
    return _grow(build, _k_start(nu, lam, deficit_tol), deficit_tol, "kraus_me")


def kraus_bs(lam, nu, dim_in, k_max=None, deficit_tol=KRAUS_DEFICIT):
    """Kraus set sqrt(tau_nu[k]) <m|_E U |k>_E from beam-splitter amplitudes."""
    _check(lam, nu)

    def build(kc):
        tau = thermal_state(nu, kc + 1).weights
        table = coefficient_table(dim_in, kc + 1, lam)  # [l, k, m]
        k = np.arange(kc + 1)[:, None]
        m = np.arange(dim_in + kc)[None, :]
        amps = np.sqrt(tau)[:, None, None] * np.transpose(table, (1, 2, 0))
        shifts = np.broadcast_to(k - m, amps.shape[:2])
        return _finish(shifts.reshape(-1), amps.reshape(-1, dim_in), dim_in)

    if k_max is not None:
        return build(k_max)
    r = nu / (nu + 1)
    k0 = 1 if nu == 0 else max(8, int(math.ceil(math.log(deficit_tol) / math.log(r))))
    return _grow(build, k0, deficit_tol, "kraus_bs")


def _band_generator(d, q, N):
    """Lindblad generator restricted to the band x_i = rho[i, i+q]."""
    size = d - q
    i = np.arange(size)
    aad = np.where(np.arange(d) < d - 1, np.arange(d) + 1.0, 0.0)  # diag of a a^dag (truncated)
    ada = np.arange(d, dtype=float)
    A = np.zeros((size, size))
    A[i, i] = -0.5 * N * (aad[i] + aad[i + q]) - 0.5 * (N + 1) * (ada[i] + ada[i + q])
    up = i[1:]
    A[up, up - 1] += N * np.sqrt(up * (up + q))
    dn = i[:-1]
    A[dn, dn + 1] += (N + 1) * np.sqrt((dn + 1) * (dn + q + 1))
    return A


def _rk4_propagator(A, h, steps):
    hA = h * A
    R = np.eye(len(A))
    term = np.eye(len(A))
    for p in range(1, 5):
        term = term @ hA / p
        R = R + term
    return np.linalg.matrix_power(R, steps)


def _lindblad_fixed(rho, N, t, steps):
    d = rho.dim
    e = rho.entries
    out = np.zeros_like(e)
    h = t / steps
    for q in range(d):
        band = np.diagonal(e, q)
        if not np.any(band) and not np.any(np.diagonal(e, -q)):
            continue
        P = _rk4_propagator(_band_generator(d, q, N), h, steps)
        idx = np.arange(d - q)
        out[idx, idx + q] = P @ band
        if q:
            out[idx + q, idx] = P @ np.diagonal(e, -q)
    return out


def lindblad_integrate(rho0, N, t, steps=None, tol=RK4_TOL, max_steps=1 << 26):
    """Fixed-step RK4 solution of the thermal master equation on the truncated space.

    The generator maps each diagonal band of rho to itself, so each band is
    propagated separately with the RK4 step matrix. With ``steps=None`` the
    step count is doubled until the output moves by less than ``tol`` in
    trace norm.
    """
    rho0 = as_density(rho0)
    if t < 0:
        raise UsageError("time must be non-negative")
    if t == 0:
        return rho0
    if steps is not None:
        out = _lindblad_fixed(rho0, N, t, steps)
        return TruncatedDensityMatrix(out, rho0.tail_mass)
    # h * ||A|| <= 1 keeps every RK4 step inside the stability region
    rate = (2 * N + 1) * rho0.dim
    steps = max(8, int(math.ceil(t * rate)))
    prev = _lindblad_fixed(rho0, N, t, steps)
    while True:
        steps *= 2
        if steps > max_steps:
            raise IntegratorError("RK4 step doubling did not converge")
        cur = _lindblad_fixed(rho0, N, t, steps)
        if np.all(np.isfinite(cur)) and np.all(np.isfinite(prev)) and trace_norm(cur - prev) < tol:
            return TruncatedDensityMatrix(cur, rho0.tail_mass)
        prev = cur


def output_cutoff(nu, lam, n_max, tol=1e-12):
    """Cutoff for Phi_{lam,tau_nu}(|n><n|), n <= n_max, with tail below ``tol``."""
    x = (1 - lam) * nu
    if x == 0:
        return n_max + 1
    r = x / (x + 1)
    return n_max + 1 + int(math.ceil(math.log(tol) / math.log(r))) + 4


def warn_if_tail(dist):
    from attlab.fock import _warn_tail

    _warn_tail(dist.tail_mass)
    return dist.tail_mass <= tail_tolerance()
