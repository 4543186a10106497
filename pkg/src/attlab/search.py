"""Threshold n_bar(N, lam): smallest Fock environment giving positive coherent information."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from attlab.capacities import coherent_info_fock_env, is_positive
from attlab.errors import UsageError

FINE_STEP = 0.0002


@dataclass(frozen=True)
class ThresholdRecord:
    N: float
    lam: float
    n_bar: int | None
    n_cap: int
    icoh_at_nbar: float
    icoh_before: float

    @property
    def found(self):
        return self.n_bar is not None


def nbar_search(N, lam, n_cap):
    """Scan n = 0, 1, ... upward and stop at the first strictly positive I_coh.

    No bisection: monotonicity in n is not known.
    """
    if not 0 < lam < 0.5:
        raise UsageError(f"lam must lie in (0, 1/2), got {lam}")
    if n_cap < 1:
        raise UsageError("n_cap must be >= 1")
    prev = math.nan
    for n in range(n_cap + 1):
        val = coherent_info_fock_env(N, n, lam)
        if is_positive(val):
            return ThresholdRecord(N, lam, n, n_cap, val, prev)
        prev = val
    return ThresholdRecord(N, lam, None, n_cap, math.nan, prev)


def default_lambda_grid(step=0.005, lo=0.01, hi=0.1):
    count = int(round((hi - lo) / step))
    return [round(lo + i * step, 12) for i in range(count + 1)]


def k_of_n_fit(N, lam_grid=None, n_bars=None, n_cap=100_000):
    """Least-squares constant K in n_bar ~ K / lam.

    ``n_bars`` may be supplied (one per grid point) to skip the search.
    Returns (K, rms residual of n_bar * lam about K).
    """
    lam_grid = default_lambda_grid() if lam_grid is None else list(lam_grid)
    if len(lam_grid) < 8:
        raise UsageError("the fit needs at least 8 grid points")
    if any(not 0 < lam <= 0.1 for lam in lam_grid):
        raise UsageError("grid points must lie in (0, 0.1]")
    if n_bars is None:
        n_bars = [nbar_search(N, lam, n_cap).n_bar for lam in lam_grid]
    products = [nb * lam for nb, lam in zip(n_bars, lam_grid) if nb is not None]
    if len(products) < len(lam_grid):
        warnings.warn(f"{len(lam_grid) - len(products)} grid points without a threshold; partial fit")
    if not products:
        raise UsageError("no thresholds found on the grid")
    y = np.array(products)
    K = float(y.mean())
    return K, float(math.sqrt(np.mean((y - K) ** 2)))
