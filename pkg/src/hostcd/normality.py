"""Shapiro-Wilk W statistic (no p-values)."""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import ndtri

MAX_N = 5000

# polynomial corrections for the two extreme coefficients, in powers of 1/sqrt(n)
_C_LAST = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C_PENULT = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)


class WStatistic(NamedTuple):
    w: float
    n: int


@lru_cache(maxsize=64)
def _coefficients(n: int) -> np.ndarray:
    if n < 3:
        raise ValueError(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n == 3:
        s = np.sqrt(0.5)
        a = np.array([-s, 0.0, s])
        a.setflags(write=False)
        return a
    k = np.arange(1, n + 1)
    m = ndtri((k - 0.375) / (n + 0.25))
    mm = m @ m
    u = 1.0 / np.sqrt(n)
    a = np.empty(n)
    a_n = m[-1] / np.sqrt(mm) + np.polynomial.polynomial.polyval(u, _C_LAST)
    if n > 5:
        a_n1 = m[-2] / np.sqrt(mm) + np.polynomial.polynomial.polyval(u, _C_PENULT)
        phi = (mm - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * a_n**2 - 2 * a_n1**2)
        a[:] = m / np.sqrt(phi)
        a[-1], a[-2] = a_n, a_n1
    else:
        phi = (mm - 2 * m[-1] ** 2) / (1 - 2 * a_n**2)
        a[:] = m / np.sqrt(phi)
        a[-1] = a_n
    # enforce exact antisymmetry and unit norm
    half = n // 2
    a[:half] = -a[::-1][:half]
    if n % 2:
        a[half] = 0.0
    a /= np.linalg.norm(a)
    a.setflags(write=False)
    return a


def sw_coefficients(n: int) -> np.ndarray:
    """Approximate Shapiro-Wilk weights ``a`` for sample size ``n`` (Royston 1992)."""
    return _coefficients(int(n))


def shapiro_wilk_w(sample, seed: int = 0) -> WStatistic:
    """Shapiro-Wilk W of a 1-D sample.

    Samples longer than ``MAX_N`` are scored on a uniform random subsample of
    ``MAX_N`` points drawn with ``seed``.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 3:
        raise ValueError(f"Shapiro-Wilk needs n >= 3, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    if x.size > MAX_N:
        x = np.random.default_rng(seed).choice(x, size=MAX_N, replace=False)
    x = np.sort(x)
    xc = x - x.mean()
    ssq = xc @ xc
    if ssq <= 0 or ssq <= 1e-300 * x.size:
        raise ValueError("constant sample")
    a = _coefficients(x.size)
    # centred values keep the numerator exact under translation (sum(a) == 0)
    w = (a @ xc) ** 2 / ssq
    return WStatistic(float(min(max(w, 0.0), 1.0)), int(x.size))
