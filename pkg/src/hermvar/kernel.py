"""Closed-form covariance quantities of fBm on the uniform grid {k/n}.

Everything here is a deterministic function of its arguments and
broadcasts over numpy arrays where that makes sense.

Notation
--------
``rho(H, k)``
    autocovariance of unit-spaced fractional Gaussian noise.
``alpha(H, n, k, t)``
    ``E[(B_{(k+1)/n} - B_{k/n}) B_t]``.
``beta(H, n, j, k)``
    ``E[(B_{(j+1)/n} - B_{j/n}) (B_{(k+1)/n} - B_{k/n})] = n^{-2H} rho(H, j-k)``.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.special import binom, zeta

from .errors import ConfigError, DomainError, ParameterRangeError

__all__ = [
    "check_hurst",
    "rho",
    "fbm_covariance",
    "alpha",
    "alpha_diag",
    "beta",
    "SigmaSq",
    "sigma_sq",
    "rho_tail_bound",
]

# |k| at which rho switches from the small-lag series to the asymptotic one
_SERIES_SWITCH = 64
_FAR_TERMS = 6
_NEAR_TERMS = 80


def check_hurst(H) -> float:
    """Return ``H`` as a float, rejecting values outside (0, 1)."""
    try:
        h = float(H)
    except (TypeError, ValueError):
        raise ConfigError(f"Hurst parameter must be a real number, got {H!r}") from None
    if not 0.0 < h < 1.0:
        raise ConfigError(f"Hurst parameter must lie in (0, 1), got {h}")
    return h


def _check_grid_size(n) -> int:
    if int(n) != n or n < 1:
        raise ConfigError(f"grid size n must be a positive integer, got {n!r}")
    return int(n)


def _check_indices(idx, n: int, name: str) -> np.ndarray:
    arr = np.asarray(idx)
    if arr.size and (np.any(arr != np.floor(arr)) or arr.min() < 0 or arr.max() > n - 1):
        raise DomainError(f"index {name} must be an integer in [0, {n - 1}]")
    return arr.astype(np.int64)


def _check_unit_interval(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.any(~np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _series_coefficients(H: float, count: int) -> np.ndarray:
    """binom(2H, 2m) for m = 1..count, by product recurrence.

    scipy's binom goes through gamma functions and loses relative accuracy
    when 2H is close to 1, where every coefficient carries the factor 2H-1.
    """
    a = 2.0 * H
    out = np.empty(count)
    c = 1.0
    for i in range(2 * count):
        c *= (a - i) / (i + 1)
        if i % 2 == 1:
            out[i // 2] = c
    return out


def _rho_series(H: float, k: np.ndarray, terms: int) -> np.ndarray:
    # rho(k) = k^{2H} * sum_{m>=1} binom(2H, 2m) k^{-2m}, valid for k > 1
    b = _series_coefficients(H, terms)
    y = 1.0 / (k * k)
    acc = np.zeros_like(k)
    for coef in b[::-1]:
        acc = (acc + coef) * y
    return k ** (2.0 * H) * acc


def rho(H, k):
    """Autocovariance ``1/2(|k+1|^{2H} + |k-1|^{2H} - 2|k|^{2H})`` of fGn.

    Accepts scalar or array ``k`` (integers).  For ``|k| >= 2`` the second
    difference is evaluated through its binomial series in ``1/k^2`` to avoid
    the catastrophic cancellation of the naive form at large lags or for H
    close to 1/2.
    """
    H = check_hurst(H)
    scalar = np.ndim(k) == 0
    kk = np.abs(np.asarray(k, dtype=float))
    out = np.zeros_like(kk)
    out[kk == 0] = 1.0
    if H != 0.5:
        out[kk == 1] = math.expm1((2.0 * H - 1.0) * math.log(2.0))
        near = (kk >= 2) & (kk < _SERIES_SWITCH)
        far = kk >= _SERIES_SWITCH
        if near.any():
            out[near] = _rho_series(H, kk[near], _NEAR_TERMS)
        if far.any():
            out[far] = _rho_series(H, kk[far], _FAR_TERMS)
    return float(out) if scalar else out


def fbm_covariance(H, s, t):
    """``E[B_s B_t] = 1/2(t^{2H} + s^{2H} - |t-s|^{2H})`` for s, t in [0, 1]."""
    H = check_hurst(H)
    s_arr = _check_unit_interval(s, "s")
    t_arr = _check_unit_interval(t, "t")
    val = 0.5 * (t_arr ** (2 * H) + s_arr ** (2 * H) - np.abs(t_arr - s_arr) ** (2 * H))
    return float(val) if np.ndim(val) == 0 else val


def alpha(H, n, k, t):
    """Inner product of the increment indicator on [k/n, (k+1)/n] with 1_[0,t].

    Broadcasts over ``k`` and ``t``.
    """
    H = check_hurst(H)
    n = _check_grid_size(n)
    k_arr = _check_indices(k, n, "k")
    t_arr = _check_unit_interval(t, "t")
    a = 2.0 * H
    lo = k_arr / n
    hi = (k_arr + 1) / n
    val = 0.5 * (hi**a - lo**a - np.abs(t_arr - hi) ** a + np.abs(t_arr - lo) ** a)
    return float(val) if np.ndim(val) == 0 else val


def alpha_diag(H, n, k=None):
    """``alpha(H, n, k, k/n) = 1/2 n^{-2H} ((k+1)^{2H} - k^{2H} - 1)``.

    Evaluated without the cancellation of the direct form; vanishes exactly
    at H = 1/2.  With ``k=None`` returns the whole vector for k = 0..n-1.
    """
    H = check_hurst(H)
    n = _check_grid_size(n)
    kk = np.arange(n) if k is None else _check_indices(k, n, "k")
    kf = np.asarray(kk, dtype=float)
    e = 2.0 * H - 1.0
    # (k+1)^{2H} - k^{2H} - 1 = (k+1) expm1(e log(k+1)) - k expm1(e log k)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = np.where(kf > 0, kf * np.expm1(e * np.log(np.where(kf > 0, kf, 1.0))), 0.0)
    upper = (kf + 1.0) * np.expm1(e * np.log1p(kf))
    val = 0.5 * n ** (-2.0 * H) * (upper - lower)
    return float(val) if np.ndim(val) == 0 else val


def beta(H, n, j, k):
    """Covariance of the j-th and k-th grid increments, ``n^{-2H} rho(H, j-k)``."""
    H = check_hurst(H)
    n = _check_grid_size(n)
    jj = _check_indices(j, n, "j")
    kk = _check_indices(k, n, "k")
    val = n ** (-2.0 * H) * rho(H, jj - kk)
    return float(val) if np.ndim(val) == 0 else val


def rho_tail_bound(H, q: int, K: int) -> float:
    """Upper bound on ``sum_{k>K} |rho(H, k)|^q`` (one-sided) for K >= 64.

    Uses ``|rho(k)| <= c k^{2H-2}`` with ``c = |H(2H-1)| + 1/(K^2-1)`` and an
    integral comparison.  Requires ``q(2H-2) < -1``.
    """
    H = check_hurst(H)
    if K < _SERIES_SWITCH:
        raise DomainError(f"tail bound needs K >= {_SERIES_SWITCH}")
    gamma = q * (2.0 * H - 2.0)
    if gamma >= -1.0:
        raise ParameterRangeError("sum of |rho|^q diverges for q(2H-2) >= -1")
    c = abs(H * (2.0 * H - 1.0)) + 1.0 / (K * K - 1.0)
    return c**q * K ** (gamma + 1.0) / (-gamma - 1.0)


class SigmaSq(NamedTuple):
    value: float
    truncation_K: int
    tail_bound: float


def _power_series_pow(coeffs: np.ndarray, q: int, terms: int) -> np.ndarray:
    out = np.zeros(terms)
    out[0] = 1.0
    base = np.zeros(terms)
    base[: min(terms, coeffs.size)] = coeffs[:terms]
    for _ in range(q):
        out = np.convolve(out, base)[:terms]
    return out


def sigma_sq(H, q: int, tol: float = 1e-12, K: int = _SERIES_SWITCH) -> SigmaSq:
    """Limit variance ``q! sum_{k in Z} rho(H, k)^q``.

    Lags ``|k| <= K`` are summed directly.  The remaining tail is summed in
    closed form: ``rho(k)^q`` expands into a convergent series
    ``sum_j d_j k^{q(2H-2)-2j}`` whose terms are Hurwitz zeta values.  Enough
    terms are kept that the neglected remainder, bounded through the
    majorant ``|binom(2H, 2m)| <= 1``, is below ``tol``.

    Returns ``(value, truncation_K, tail_bound)``; ``tail_bound`` covers the
    series remainder plus a floating-point rounding allowance.

    Raises ParameterRangeError when ``q(2H-2) >= -1`` (divergent series).
    """
    H = check_hurst(H)
    if int(q) != q or q < 1:
        raise ConfigError(f"Hermite order q must be a positive integer, got {q!r}")
    q = int(q)
    if tol <= 0:
        raise ConfigError("tol must be positive")
    fact = math.factorial(q)
    if H == 0.5:
        return SigmaSq(float(fact), 0, 0.0)
    gamma = q * (2.0 * H - 2.0)
    if gamma >= -1.0:
        raise ParameterRangeError(
            f"sum of rho^q diverges for H={H}, q={q} (need H < 1 - 1/(2q))"
        )
    K = max(int(K), _SERIES_SWITCH)
    terms_direct = rho(H, np.arange(1, K + 1)) ** q
    head = float(np.cumsum(terms_direct)[-1])

    s0 = -gamma
    zeta0 = float(zeta(s0, K + 1))
    y = 1.0 / (K + 1.0) ** 2

    def remainder(J: int) -> float:
        js = np.arange(J, J + 400)
        majorant = binom(js + q - 1, q - 1) * y**js
        return float(majorant.sum()) * zeta0

    J = 2
    while J < 60 and 2.0 * fact * remainder(J) >= tol:
        J += 1
    b = _series_coefficients(H, J + 1)
    d = _power_series_pow(b, q, J)
    tail_terms = d * zeta(s0 + 2.0 * np.arange(J), K + 1)
    tail = float(np.cumsum(tail_terms[::-1])[-1])

    value = fact * (1.0 + 2.0 * (head + tail))
    abs_mass = 1.0 + 2.0 * (float(np.abs(terms_direct).sum()) + float(np.abs(tail_terms).sum()))
    rounding = 4.0 * np.finfo(float).eps * (K + J + 8) * fact * abs_mass
    return SigmaSq(float(value), K, float(2.0 * fact * remainder(J) + rounding))
