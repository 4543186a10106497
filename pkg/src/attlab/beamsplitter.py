"""Two-mode beam splitter in the Fock basis and the general attenuator channel.

Conventions: the unitary is U = exp[theta (a^dag b - a b^dag)] with
cos(theta) = sqrt(lam), ``a`` the system mode S and ``b`` the environment
mode E, and

    U |i>_S |j>_E = sum_m c_m^(i,j)(lam) |i+j-m>_S |m>_E .
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from attlab.errors import ResourceError, UsageError
from attlab.fock import (
    FockDistribution,
    TruncatedDensityMatrix,
    as_density,
    moments,
)

DIRECT_UP_TO = 40
DENSE_SECTOR_LIMIT = 60


def _check_lambda(lam):
    if not 0.0 <= lam <= 1.0:
        raise UsageError(f"transmissivity must lie in [0, 1], got {lam}")


def _coefficients_direct(i, j, lam):
    mu = 1.0 - lam
    norm = math.sqrt(math.factorial(i) * math.factorial(j))
    out = np.empty(i + j + 1)
    for m in range(i + j + 1):
        terms = []
        for k in range(max(0, m - j), min(i, m) + 1):
            t = math.comb(i, k) * math.comb(j, m - k)
            t *= lam ** ((i + m - 2 * k) / 2) * mu ** ((j + 2 * k - m) / 2)
            terms.append(-t if k % 2 else t)
        out[m] = math.fsum(terms) * math.sqrt(math.factorial(m) * math.factorial(i + j - m)) / norm
    return out


_SECTORS = {}


def _next_sector(D, t, lam):
    """Sector t+1 block from sector t: J^dag (U_t x U_1) J.

    J embeds |i,j> (i+j = t+1) into sector t times one photon; it is an
    isometry, so rounding errors are never amplified.
    """
    u_aa, u_bb = math.sqrt(lam), math.sqrt(lam)
    u_ba, u_ab = -math.sqrt(1 - lam), math.sqrt(1 - lam)
    P = np.zeros((t + 3, t + 3))
    P[1 : t + 2, 1 : t + 2] = D
    m = np.arange(t + 2)[:, None]
    j = np.arange(t + 2)[None, :]
    out_a, out_b = np.sqrt(t + 1 - m), np.sqrt(m)
    in_a, in_b = np.sqrt(t + 1 - j), np.sqrt(j)
    res = (
        out_a * in_a * u_aa * P[1:, 1:]
        + out_b * in_a * u_ba * P[:-1, 1:]
        + out_a * in_b * u_ab * P[1:, :-1]
        + out_b * in_b * u_bb * P[:-1, :-1]
    )
    return res / (t + 1)


def sector_block(t, lam):
    """Matrix B[m, j] = c_m^(t-j, j)(lam) for the total-photon sector t.

    Built by the stable sector recursion; used above the direct-sum range.
    """
    lam = float(lam)
    if lam not in _SECTORS and len(_SECTORS) >= 8:
        _SECTORS.pop(next(iter(_SECTORS)))
    blocks = _SECTORS.setdefault(lam, [np.ones((1, 1))])
    while len(blocks) <= t:
        blocks.append(_next_sector(blocks[-1], len(blocks) - 1, lam))
    return blocks[t]


@lru_cache(maxsize=100_000)
def _coefficients_cached(i, j, lam):
    if lam == 1.0:
        out = np.zeros(i + j + 1)
        out[j] = 1.0
    elif lam == 0.0:
        out = np.zeros(i + j + 1)
        out[i] = -1.0 if i % 2 else 1.0
    elif i + j > DIRECT_UP_TO:
        out = sector_block(i + j, lam)[:, j].copy()
    else:
        out = _coefficients_direct(i, j, lam)
    out.setflags(write=False)
    return out


def bs_coefficients(i, j, lam):
    """All amplitudes c_0 .. c_{i+j} for input |i>_S |j>_E."""
    if i < 0 or j < 0:
        raise UsageError("photon numbers must be non-negative")
    _check_lambda(lam)
    i, j, lam = int(i), int(j), float(lam)
    return _coefficients_cached(i, j, lam)


def bs_coefficient(i, j, m, lam):
    """Amplitude of |i+j-m>_S |m>_E in U |i>_S |j>_E."""
    if not 0 <= m <= i + j:
        raise IndexError(f"m={m} outside 0..{i + j}")
    return float(bs_coefficients(i, j, lam)[m])


@dataclass(frozen=True)
class BsCoefficients:
    i: int
    j: int
    lam: float
    values: np.ndarray

    @classmethod
    def compute(cls, i, j, lam):
        return cls(i, j, lam, bs_coefficients(i, j, lam))

    def norm_defect(self):
        return abs(math.fsum(self.values**2) - 1.0)


def coefficient_table(d_s, d_e, lam):
    """Array C[i, j, m] = c_m^(i,j) for i < d_s, j < d_e, zero-padded in m."""
    table = np.zeros((d_s, d_e, d_s + d_e - 1))
    for i in range(d_s):
        for j in range(d_e):
            table[i, j, : i + j + 1] = bs_coefficients(i, j, lam)
    return table


@dataclass(frozen=True)
class ChannelSpec:
    """Transmissivity and environment state of a general attenuator."""

    lam: float
    env: object

    def __post_init__(self):
        _check_lambda(self.lam)
        if not isinstance(self.env, (TruncatedDensityMatrix, FockDistribution)):
            raise TypeError("env must be a TruncatedDensityMatrix or FockDistribution")
        if isinstance(self.env, FockDistribution) and self.env.offset < 0:
            raise UsageError("environment distribution must live on n >= 0")


def _env_decomposition(env):
    """(weights, vectors) with env = sum_r w_r |v_r><v_r|."""
    if isinstance(env, FockDistribution):
        w = env.dense(env.offset + len(env.weights))
        keep = np.nonzero(w)[0]
        vecs = np.zeros((len(keep), len(w)))
        vecs[np.arange(len(keep)), keep] = 1.0
        return w[keep], vecs, True
    if env.is_diagonal():
        w = env.diagonal()
        keep = np.nonzero(w > 0)[0]
        vecs = np.zeros((len(keep), env.dim))
        vecs[np.arange(len(keep)), keep] = 1.0
        return w[keep], vecs, True
    ev, u = np.linalg.eigh(env.entries)
    keep = ev > 1e-15
    return ev[keep], u[:, keep].T, False


def _transfer_operators(lam, d_in, d_env, vec, complementary):
    """Operators K[x] mapping the input mode to the kept output mode.

    For the channel x labels the environment output photon number m and the
    result lives on S; for the weak complementary x labels the S output
    photon number and the result lives on E.
    """
    table = coefficient_table(d_in, d_env, lam)
    d_out = d_in + d_env - 1
    ops = np.zeros((d_out, d_out, d_in), dtype=complex)
    i = np.arange(d_in)[:, None]
    m = np.arange(d_out)[None, :]
    for j in np.nonzero(vec)[0]:
        coeff = vec[j] * table[:, j, :]
        valid = m <= i + j
        ii, mm = np.nonzero(np.broadcast_to(valid, coeff.shape))
        p = ii + j - mm
        if complementary:
            np.add.at(ops, (p, mm, ii), coeff[ii, mm])
        else:
            np.add.at(ops, (mm, p, ii), coeff[ii, mm])
    return ops


def _apply(spec, rho, complementary, dim_out):
    rho = as_density(rho)
    weights, vecs, env_diag = _env_decomposition(spec.env)
    d_in, d_env = rho.dim, vecs.shape[1]
    d_out = d_in + d_env - 1
    if env_diag and rho.is_diagonal():
        p_in = rho.diagonal()
        table = coefficient_table(d_in, d_env, spec.lam) ** 2
        env_w = np.zeros(d_env)
        env_w[np.argmax(vecs, axis=1)] = weights
        joint = table * p_in[:, None, None] * env_w[None, :, None]
        i, j, m = np.indices(table.shape)
        out_idx = m if complementary else i + j - m
        valid = (m <= i + j) & (joint != 0)
        diag = np.zeros(d_out)
        np.add.at(diag, out_idx[valid], joint[valid])
        out = np.diag(diag).astype(complex)
    else:
        out = np.zeros((d_out, d_out), dtype=complex)
        for w, vec in zip(weights, vecs):
            ops = _transfer_operators(spec.lam, d_in, d_env, vec, complementary)
            out += w * np.einsum("xpi,ij,xqj->pq", ops, rho.entries, ops.conj(), optimize=True)
    result = TruncatedDensityMatrix(out, max(0.0, 1.0 - float(np.trace(out).real)))
    if dim_out is not None:
        result = result.resized(dim_out)
    return result


def attenuator_apply(spec, rho, dim_out=None):
    """Phi_{lam, env}(rho) = Tr_E[U (rho x env) U^dag].

    The output lives on d_in + d_env - 1 levels unless ``dim_out`` is given,
    in which case cut-off mass moves to ``tail_mass``.
    """
    return _apply(spec, rho, False, dim_out)


def weak_complementary_apply(spec, rho, dim_out=None):
    """Tr_S[U (rho x env) U^dag], the environment's output state."""
    return _apply(spec, rho, True, dim_out)


def _sector_generator(total):
    # basis |total-e>_S |e>_E, e = 0..total
    g = np.zeros((total + 1, total + 1))
    for e in range(total + 1):
        s = total - e
        if e > 0:
            g[e - 1, e] += math.sqrt((s + 1) * e)
        if s > 0:
            g[e + 1, e] -= math.sqrt(s * (e + 1))
    return g


def bs_unitary_dense(lam, d_total):
    """Per-sector matrix exponentials of the beam-splitter generator.

    Returns ``{M: block}`` for M = 0..d_total where ``block[m, j]`` is
    <M-m, m| U |M-j, j>.
    """
    _check_lambda(lam)
    if d_total > DENSE_SECTOR_LIMIT:
        raise ResourceError(f"sector cutoff {d_total} exceeds {DENSE_SECTOR_LIMIT}")
    theta = math.acos(math.sqrt(lam))
    return {M: expm(theta * _sector_generator(M)) for M in range(d_total + 1)}


def embed_sector_unitary(blocks, d):
    """Two-mode matrix on the d x d product basis (index s*d + e).

    Only the invariant subspace of total photon number <= max sector is
    filled; the rest is zero.
    """
    top = max(blocks)
    u = np.zeros((d * d, d * d))
    for M, block in blocks.items():
        for e_in in range(M + 1):
            s_in = M - e_in
            if s_in >= d or e_in >= d:
                continue
            for e_out in range(M + 1):
                s_out = M - e_out
                if s_out < d and e_out < d:
                    u[s_out * d + e_out, s_in * d + e_in] = block[e_out, e_in]
    if top > 2 * (d - 1):
        raise UsageError("sector exceeds product basis")
    return u


def _displacement_mean(rho):
    # <a> = sum_n sqrt(n) rho[n, n-1]
    e = rho.entries
    n = np.arange(1, rho.dim)
    return complex(np.sum(np.sqrt(n) * e[n, n - 1]))


def output_mean_photon(spec, rho, complementary=False):
    """Closed-form mean photon number of the channel (or weak complementary) output."""
    rho = as_density(rho)
    env = as_density(spec.env)
    lam = spec.lam
    na, nb = moments(rho).mean_photon, moments(env).mean_photon
    cross = 2 * math.sqrt(lam * (1 - lam)) * (_displacement_mean(rho) * np.conj(_displacement_mean(env))).real
    if complementary:
        return float((1 - lam) * na + lam * nb - cross)
    return float(lam * na + (1 - lam) * nb + cross)
