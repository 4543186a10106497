"""Noise attenuation with trigger signals: exact multimode simulation, moments and bounds.

Modes are numbered S_1..S_k (triggers, 0..k-1), then E (index k), then one
ancilla per thermalization step when those are simulated.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from attlab.asymptotics import bessel_i
from attlab.beamsplitter import ChannelSpec, bs_coefficients, weak_complementary_apply
from attlab.capacities import fock_diag_lower_bound
from attlab.errors import InvariantViolation, ResourceError, UsageError
from attlab.fock import (
    FockDistribution,
    MomentSummary,
    TruncatedDensityMatrix,
    bosonic_entropy_g as g,
    distance_to_fock,
    fock_distance_bound,
    fock_dm,
    moments,
    thermal_cutoff_for_tail,
    thermal_moments,
    trace_distance,
)

MAX_SECTOR_STATES = 2_000_000
MAX_WORK = 4e8
SIGMA0_TAIL = 1e-8


def h_mode_coeffs(lam, k):
    """Weights of a_1..a_k in the collective mode h seen by the environment after k signals."""
    if not 0 < lam < 1 or k < 1:
        raise UsageError("need 0 < lam < 1 and k >= 1")
    pref = math.sqrt((1 - lam) / (1 - lam**k))
    return [pref * lam ** ((k - l) / 2) for l in range(1, k + 1)]


@lru_cache(maxsize=256)
def _compositions(total, modes):
    """All occupation tuples of ``modes`` modes summing to ``total``, sorted by code."""
    if modes == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total + 1):
        rest = _compositions(total - first, modes - 1)
        rows.append(np.column_stack([np.full(len(rest), first), rest]))
    occ = np.concatenate(rows)
    codes = occ @ (total + 1) ** np.arange(modes, dtype=np.int64)
    return occ[np.argsort(codes)]


def sector_size(total, modes):
    return math.comb(total + modes - 1, modes - 1)


def _codes(occ, base):
    return occ @ base ** np.arange(occ.shape[1], dtype=np.int64)


@lru_cache(maxsize=512)
def _pair_groups(total, modes, p, q):
    """For each pair total t: index matrix of basis states grouped by everything but (p, q).

    Row r of the matrix for t lists the states with occupations (t-y, y) on
    (p, q), y = 0..t, and identical occupations elsewhere.
    """
    occ = _compositions(total, modes)
    base = total + 1
    codes = _codes(occ, base)
    step = base**q - base**p
    t_all = occ[:, p] + occ[:, q]
    leaders = np.nonzero(occ[:, q] == 0)[0]
    out = {}
    for t in np.unique(t_all[leaders]):
        lead = leaders[t_all[leaders] == t]
        members = codes[lead][:, None] + np.arange(t + 1)[None, :] * step
        out[int(t)] = np.searchsorted(codes, members)
    return out


@lru_cache(maxsize=4096)
def _pair_block(t, lam):
    # B[m, y] = c_m^(t-y, y): input (t-y, y) on (p, q) to output (t-m, m)
    return np.column_stack([bs_coefficients(t - y, y, lam) for y in range(t + 1)])


@dataclass
class SectorState:
    """Pure multimode state stored as amplitude vectors per total-photon sector."""

    mode_count: int
    sectors: dict = field(default_factory=dict)

    @classmethod
    def fock(cls, occupation):
        occ = np.asarray(occupation, dtype=np.int64)
        total = int(occ.sum())
        _check_budget(total, len(occ))
        basis = _compositions(total, len(occ))
        amps = np.zeros(len(basis))
        idx = np.searchsorted(_codes(basis, total + 1), _codes(occ[None, :], total + 1))[0]
        amps[idx] = 1.0
        return cls(len(occ), {total: amps})

    @property
    def max_total_photons(self):
        return max(self.sectors)

    def norm(self):
        return math.sqrt(sum(float(np.vdot(a, a).real) for a in self.sectors.values()))

    def basis(self, total):
        return _compositions(total, self.mode_count)

    def apply_bs(self, p, q, lam):
        """Apply U_lam with mode p as the transmitted (system) arm and q as the environment arm."""
        if lam == 1.0:
            return self
        for total, amps in self.sectors.items():
            new = np.empty_like(amps)
            for t, idx in _pair_groups(total, self.mode_count, p, q).items():
                new[idx] = amps[idx] @ _pair_block(t, lam).T
            # photon number is conserved by construction; the norm is checked
            if abs(np.vdot(new, new).real - np.vdot(amps, amps).real) > 1e-10:
                raise InvariantViolation(f"beam splitter lost norm in sector {total}")
            self.sectors[total] = new
        return self

    def photon_numbers(self):
        """Total photon number of every nonzero basis state, for conservation checks."""
        return {total: np.unique(self.basis(total).sum(axis=1)) for total in self.sectors}

    def reduced(self, mode):
        """Reduced density matrix of one mode."""
        top = self.max_total_photons
        base = top + 1
        rest_codes, e_vals, amps = [], [], []
        for total, a in self.sectors.items():
            occ = self.basis(total)
            keep = a != 0
            occ = occ[keep]
            rest = occ.copy()
            rest[:, mode] = 0
            rest_codes.append(_codes(rest, base))
            e_vals.append(occ[:, mode])
            amps.append(a[keep])
        rest_codes = np.concatenate(rest_codes)
        e_vals = np.concatenate(e_vals)
        amps = np.concatenate(amps)
        uniq, rows = np.unique(rest_codes, return_inverse=True)
        psi = np.zeros((len(uniq), top + 1), dtype=amps.dtype)
        psi[rows, e_vals] = amps
        rho = psi.T @ psi.conj()
        return TruncatedDensityMatrix(rho, max(0.0, 1.0 - float(np.trace(rho).real)))

    def overlap(self, other):
        return sum(np.vdot(a, other.sectors.get(t, 0 * a)) for t, a in self.sectors.items())


def _check_budget(total, modes):
    size = sector_size(total, modes)
    if size > MAX_SECTOR_STATES:
        raise ResourceError(
            f"sector with {total} photons in {modes} modes has {size} states; "
            "use env_moments for the closed-form moments instead"
        )


def _interferometer(state, k, lam):
    # V_{k,lam}: the factor on (S_{k-1}, S_k) acts first, (S_1, S_2) last
    for j in range(k, 1, -1):
        state.apply_bs(j - 2, j - 1, (1 - lam) / (1 - lam**j))
    return state


def trigger_state(n, lam, k, extra_modes=()):
    """The trigger state |n, lam> on k modes built by the beam-splitter cascade.

    ``extra_modes`` appends further modes in the given Fock states.
    """
    if n < 0 or k < 1 or not 0 < lam < 1:
        raise UsageError("need n >= 0, k >= 1 and 0 < lam < 1")
    occ = [0] * (k - 1) + [n] + list(extra_modes)
    return _interferometer(SectorState.fock(occ), k, lam)


def trigger_state_direct(n, lam, k):
    """Same state from the multinomial expansion of (h^dag)^n / sqrt(n!)."""
    h = np.array(h_mode_coeffs(lam, k))
    basis = _compositions(n, k)
    logs = (
        0.5 * math.lgamma(n + 1)
        - 0.5 * np.array([sum(math.lgamma(x + 1) for x in row) for row in basis])
    )
    amps = np.exp(logs) * np.prod(h[None, :] ** basis, axis=1)
    return SectorState(k, {n: amps})


@dataclass(frozen=True)
class ThermalizationModel:
    """Map from inter-signal delay to the transmissivity of the relaxation step."""

    t_E: float = 1.0
    shape: str = "linear"

    def eta(self, dt):
        if dt < 0:
            raise UsageError("delay must be non-negative")
        if dt >= self.t_E:
            return 0.0
        if self.shape == "linear":
            return max(0.0, 1.0 - dt / self.t_E)
        if self.shape == "exponential":
            tau = self.t_E / 5
            return (math.exp(-dt / tau) - math.exp(-self.t_E / tau)) / (1 - math.exp(-self.t_E / tau))
        raise UsageError(f"unknown thermalization shape {self.shape!r}")


@dataclass(frozen=True)
class Sigma0:
    """Initial environment state: vacuum, thermal, Fock-diagonal or explicit matrix."""

    kind: str = "vacuum"
    nu: float = 0.0
    matrix: TruncatedDensityMatrix | None = None
    weights: FockDistribution | None = None

    @classmethod
    def vacuum(cls):
        return cls("vacuum")

    @classmethod
    def thermal(cls, nu):
        return cls("thermal", nu=float(nu)) if nu > 0 else cls("vacuum")

    @classmethod
    def explicit(cls, state):
        if isinstance(state, FockDistribution):
            return cls("diagonal", weights=state)
        return cls("matrix", matrix=state)

    def distribution(self, tail=SIGMA0_TAIL):
        """Fock weights actually simulated (None for a non-diagonal matrix)."""
        if self.kind == "vacuum":
            return FockDistribution(np.ones(1))
        if self.kind == "thermal":
            d = thermal_cutoff_for_tail(self.nu, tail)
            r = self.nu / (self.nu + 1)
            w = r ** np.arange(d) / (self.nu + 1)
            return FockDistribution(w, 0, r**d)
        if self.kind == "diagonal":
            return self.weights
        if self.matrix.is_diagonal():
            d = self.matrix.diagonal()
            return FockDistribution(d, 0, self.matrix.tail_mass)
        return None

    def moments(self):
        if self.kind == "vacuum":
            return MomentSummary(0.0, 0.0, 0.0)
        if self.kind == "thermal":
            return thermal_moments(self.nu)
        if self.kind == "diagonal":
            return moments(self.weights)
        return moments(self.matrix)

    def pure_components(self, tail=SIGMA0_TAIL):
        """(weight, amplitude vector) pairs summing to the simulated state."""
        dist = self.distribution(tail)
        if dist is not None:
            return [(float(w), np.eye(len(dist.weights))[j]) for j, w in enumerate(dist.weights) if w > 0]
        ev, u = np.linalg.eigh(self.matrix.entries)
        return [(float(ev[r]), u[:, r]) for r in range(len(ev)) if ev[r] > 1e-15]


@dataclass(frozen=True)
class TriggerPlan:
    n: int
    lam: float
    k: int
    sigma0: Sigma0 = field(default_factory=Sigma0.vacuum)
    delta_t: float = 0.0
    therm: ThermalizationModel = field(default_factory=ThermalizationModel)

    def __post_init__(self):
        if self.k < 1:
            raise UsageError("need at least one trigger")
        if not 0 < self.lam < 1:
            raise UsageError("lam must lie in (0, 1)")
        if self.delta_t < 0:
            raise UsageError("delay must be non-negative")
        if self.n < 0:
            raise UsageError("n must be non-negative")


def _run_fock_env(n, lam, k, env_occ, eta=1.0, ancillas=()):
    """One pure run: triggers, E in |env_occ>, ancillas in given Fock states."""
    state = trigger_state(n, lam, k, extra_modes=[env_occ, *ancillas])
    E = k
    for i in range(k):
        state.apply_bs(i, E, lam)
        if ancillas:
            state.apply_bs(E, E + 1 + i, eta)
    return state


def _embed_env(state_triggers, vec, k):
    """Tensor a k-mode trigger state with an E-mode amplitude vector."""
    out = SectorState(k + 1)
    for total, amps in state_triggers.sectors.items():
        occ_t = state_triggers.basis(total)
        for j, c in enumerate(vec):
            if c == 0:
                continue
            tot = total + j
            _check_budget(tot, k + 1)
            basis = _compositions(tot, k + 1)
            occ = np.column_stack([occ_t, np.full(len(occ_t), j)])
            idx = np.searchsorted(_codes(basis, tot + 1), _codes(occ, tot + 1))
            arr = out.sectors.setdefault(tot, np.zeros(len(basis), dtype=np.result_type(amps, vec)))
            arr[idx] += c * amps
    return out


def env_after_triggers(plan):
    """Environment state after k triggers at zero delay (exact sector simulation)."""
    if plan.delta_t != 0:
        return env_after_triggers_exact(plan)
    n, lam, k = plan.n, plan.lam, plan.k
    comps = plan.sigma0.pure_components()
    top = max(len(v) for _, v in comps) - 1
    _check_budget(n + top, k + 1)
    dim = n + top + 1
    out = np.zeros((dim, dim), dtype=complex)
    diagonal = plan.sigma0.distribution() is not None
    for w, vec in comps:
        if diagonal:
            state = _run_fock_env(n, lam, k, int(np.argmax(vec)))
        else:
            state = _embed_env(trigger_state(n, lam, k), vec, k)
            for i in range(k):
                state.apply_bs(i, k, lam)
        r = state.reduced(k).entries
        out[: r.shape[0], : r.shape[0]] += w * r
    return TruncatedDensityMatrix(out, max(0.0, 1.0 - float(np.trace(out).real)))


def env_after_triggers_exact(plan, budget=MAX_WORK):
    """Environment state with a relaxation step xi after every trigger.

    Each xi is a beam splitter of transmissivity eta(delta_t) between E and a
    fresh ancilla prepared in sigma0, so the run stays a pure sector
    simulation; Fock components of sigma0 on E and on every ancilla are
    enumerated and weighted.
    """
    n, lam, k = plan.n, plan.lam, plan.k
    eta = plan.therm.eta(plan.delta_t)
    if eta == 1.0:
        return env_after_triggers(TriggerPlan(n, lam, k, plan.sigma0))
    dist = plan.sigma0.distribution()
    if dist is None:
        raise UsageError("relaxation steps need a Fock-diagonal sigma0")
    if eta == 0.0:
        # the last relaxation step replaces E by sigma0 whatever came before
        return dist.to_matrix()
    w = dist.weights
    combos = []
    for js in product(range(len(w)), repeat=k + 1):
        weight = math.prod(w[j] for j in js)
        if weight > SIGMA0_TAIL * 1e-4:
            combos.append((weight, js))
    modes = 2 * k + 1
    top = max(sum(js) for _, js in combos)
    work = len(combos) * sector_size(n + top, modes) * k * 4
    if work > budget:
        raise ResourceError(f"relaxation simulation needs about {work:.2e} operations; reduce n, k or nu")
    dim = n + top + 1
    out = np.zeros(dim)
    for weight, js in combos:
        state = _run_fock_env(n, lam, k, js[0], eta, js[1:])
        d = np.real(np.diag(state.reduced(k).entries))
        out[: len(d)] += weight * d
    return TruncatedDensityMatrix(np.diag(out).astype(complex), max(0.0, 1.0 - out.sum()))


def relaxation_shift(plan, relaxed=None):
    """||sigma'_{delta t} - sigma||_1 between the relaxed and the zero-delay environment."""
    relaxed = relaxed if relaxed is not None else env_after_triggers_exact(plan)
    ideal = env_after_triggers(TriggerPlan(plan.n, plan.lam, plan.k, plan.sigma0))
    d = max(relaxed.dim, ideal.dim)
    return trace_distance(relaxed.resized(d), ideal.resized(d))


def env_moments(n, lam, k, sigma0_moments):
    """Closed-form photon-number moments of the environment after k triggers."""
    if not 0 <= lam <= 1 or k < 0 or n < 0:
        raise UsageError("need 0 <= lam <= 1, k >= 0 and n >= 0")
    B = sigma0_moments.mean_photon
    B2 = sigma0_moments.second_moment
    x = lam**k
    s = 1 - x
    mean = s * n + x * B
    second = s * s * n * n + 4 * n * x * s * B + x * x * B2 + x * s * n + x * s * B
    var = 2 * n * x * s * B + x * x * (B2 - B * B) + x * s * n + x * s * B
    return MomentSummary(float(mean), float(max(var, 0.0)), float(max(second, var + mean * mean)))


def no_go_variance(n, lam, k, nu, trigger_moments=None):
    """Output photon variance for triggers with the given h-mode moments and a thermal environment.

    Without ``trigger_moments`` the triggers are |n, lam>, i.e. h holds exactly n photons.
    """
    if trigger_moments is None:
        trigger_moments = MomentSummary(float(n), 0.0, float(n * n))
    if nu < 0:
        raise UsageError("nu must be non-negative")
    x = lam**k
    return (
        (1 - x) ** 2 * trigger_moments.photon_variance
        + x * x * nu * (nu + 1)
        + x * (1 - x) * ((2 * nu + 1) * trigger_moments.mean_photon + nu)
    )


def fock_distance_eta(n, sigma0_moments):
    """Constant eta with ||sigma_{lam,n,k} - |n><n| ||_1 <= eta lam^(k/2)."""
    B = sigma0_moments.mean_photon
    B2 = sigma0_moments.second_moment
    return 2 * math.sqrt(n * n + B2 + (2 * n + 1) * B + n)


def k0_constant(sigma0_moments):
    return math.sqrt(2 + 3 * sigma0_moments.mean_photon + sigma0_moments.second_moment)


@dataclass(frozen=True)
class ProtocolResult:
    env: TruncatedDensityMatrix
    n_target: int
    exact_distance: float
    moment_bound: float
    closed_bound: float


def run_protocol(plan):
    """Exact environment, its distance from |n><n|, and the two upper bounds."""
    env = env_after_triggers(plan) if plan.delta_t == 0 else env_after_triggers_exact(plan)
    m0 = plan.sigma0.moments()
    return ProtocolResult(
        env,
        plan.n,
        distance_to_fock(env, plan.n),
        fock_distance_bound(env_moments(plan.n, plan.lam, plan.k, m0), plan.n),
        fock_distance_eta(plan.n, m0) * plan.lam ** (plan.k / 2),
    )


def n_lambda(lam):
    """Integer in [1/lam - 1, 1/lam]."""
    return int(math.floor(1 / lam + 1e-12))


def two_trigger_env(lam, sigma0):
    """Two triggers carrying n_lam photons: (env, 2 k0 sqrt(lam), n_lam)."""
    n = n_lambda(lam)
    env = env_after_triggers(TriggerPlan(n, lam, 2, sigma0))
    return env, 2 * k0_constant(sigma0.moments()) * math.sqrt(lam), n


def single_trigger_binomial(n, lam, N):
    """One trigger |n>, vacuum environment: the environment law and the rate z.

    The environment ends up Binomial(n, 1 - lam); z = g(N) plus the
    Fock-diagonal coherent-information bound for that environment.
    """
    spec = ChannelSpec(lam, FockDistribution(np.ones(1)))
    env = weak_complementary_apply(spec, fock_dm(n)).diagonal()
    dist = FockDistribution(env[: n + 1])
    return dist, g(N) + fock_diag_lower_bound(dist, N, lam)


def one_trigger_limit_distance(nu):
    """Limit of ||env - |n><n| ||_1 for one trigger with n ~ 1/lam photons, lam -> 0."""
    if nu < 0:
        raise UsageError("nu must be non-negative")
    return 2 * (1 - math.exp(-(2 * nu + 1)) * bessel_i(0, 2 * math.sqrt(nu * (nu + 1))))


def one_trigger_finite_distance(nu, lam):
    """The same distance at finite lam with n = n_lambda(lam) photons."""
    from attlab.thermal import p_eigenvalue

    n = n_lambda(lam)
    return 2 * (1 - p_eigenvalue(nu, n, lam, n))
