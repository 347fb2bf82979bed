"""Exact evaluation of the alpha/beta sums and log-log exponent fits.

The summation lemmas bound these sums by ``C_H n^gamma`` with an unknown
constant.  What can be asserted is the growth exponent (via
:func:`fit_exponent` over a dyadic grid) and boundedness of
``value(n) * n^{-gamma}`` across the grid.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError
from .kernel import alpha, check_hurst, rho

__all__ = [
    "ExponentFit",
    "fit_exponent",
    "AlphaBounds",
    "alpha_bounds",
    "beta_power_sum",
    "beta_power_double_sum",
    "beta_power_double_sum_naive",
    "triple_beta_sum",
    "predicted_exponent",
    "lemma_sweep",
    "sweep_to_csv",
]


@dataclass(frozen=True)
class ExponentFit:
    points: tuple
    slope: float
    intercept: float
    max_residual: float
    tail_slope: float

    def to_dict(self) -> dict:
        return {
            "points": [list(p) for p in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
            "tail_slope": self.tail_slope,
        }


def fit_exponent(points: Iterable[tuple[float, float]]) -> ExponentFit:
    """Least-squares line through ``(log n, log value)``.

    Also reports the two-point slope over the last two grid sizes, a cheap
    diagnostic of finite-n bias in the fitted slope.
    """
    pts = tuple((float(n), float(v)) for n, v in points)
    if len(pts) < 3:
        raise ConfigError("need at least 3 points to fit an exponent")
    ns = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    if np.any(np.diff(ns) <= 0):
        raise ConfigError("n must be strictly increasing")
    if np.any(~(vals > 0)):
        raise DomainError("exponent fit needs strictly positive values")
    x, y = np.log(ns), np.log(vals)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    tail = (y[-1] - y[-2]) / (x[-1] - x[-2])
    return ExponentFit(pts, float(slope), float(intercept), float(np.abs(resid).max()), float(tail))


class AlphaBounds(NamedTuple):
    max_abs_alpha: float
    sup_sum_alpha: float


def alpha_bounds(H, n: int, t_grid_size: int = 256) -> AlphaBounds:
    """``max_{k,t} |alpha_{k,t}|`` and ``max_t sum_k |alpha_{k,t}|`` on a uniform t grid."""
    H = check_hurst(H)
    if t_grid_size < 64:
        raise ConfigError("t_grid_size must be at least 64")
    t = np.linspace(0.0, 1.0, int(t_grid_size))
    best_abs = 0.0
    sums = np.zeros_like(t)
    block = max(1, (1 << 20) // t.size)
    for start in range(0, n, block):
        k = np.arange(start, min(n, start + block))
        a = np.abs(alpha(H, n, k[:, None], t[None, :]))
        best_abs = max(best_abs, float(a.max()))
        sums += a.sum(axis=0)
    return AlphaBounds(best_abs, float(sums.max()))


def _check_power(a: float, name: str = "a") -> float:
    if not a >= 1:
        raise ConfigError(f"exponent {name} must be >= 1, got {a}")
    return float(a)


def beta_power_sum(H, n: int, a: float, i: int) -> float:
    """``sum_{j=0}^{n-1} |beta_{j,i}|^a``."""
    H = check_hurst(H)
    a = _check_power(a)
    if not 0 <= i <= n - 1:
        raise DomainError(f"i must lie in [0, {n - 1}]")
    j = np.arange(n)
    terms = np.abs(rho(H, j - i)) ** a
    return n ** (-2.0 * H * a) * float(np.cumsum(terms)[-1])


def beta_power_double_sum(H, n: int, a: float) -> float:
    """``sum_{j,k} |beta_{j,k}|^a`` through the lag form ``sum_h (n-|h|) n^{-2aH} |rho(h)|^a``."""
    H = check_hurst(H)
    a = _check_power(a)
    h = np.arange(1, n)
    lag = float(np.cumsum((n - h) * np.abs(rho(H, h)) ** a)[-1]) if n > 1 else 0.0
    return n ** (-2.0 * H * a) * (n + 2.0 * lag)


def beta_power_double_sum_naive(H, n: int, a: float) -> float:
    """O(n^2) reference for :func:`beta_power_double_sum`."""
    H = check_hurst(H)
    j = np.arange(n)
    mat = np.abs(n ** (-2.0 * H) * rho(H, j[:, None] - j[None, :])) ** a
    return float(mat.sum())


def triple_beta_sum(H, n: int, a: float, b: float, ell: int) -> float:
    """``sum_{j,j'} |beta_{j,l}|^a |beta_{j',l}|^a |beta_{j,j'}|^b``, exact O(n^2)."""
    H = check_hurst(H)
    a = _check_power(a)
    b = _check_power(b, "b")
    if not 1 <= ell <= n - 1:
        raise DomainError(f"ell must lie in [1, {n - 1}]")
    j = np.arange(n)
    side = np.abs(rho(H, j - ell)) ** a
    lags = np.abs(rho(H, np.arange(-(n - 1), n))) ** b
    # Toeplitz matrix |rho(j - j')|^b via a strided view of the lag vector
    toe = np.lib.stride_tricks.sliding_window_view(lags, n)[::-1]
    total = float(side @ toe @ side)
    return n ** (-2.0 * H * (2.0 * a + b)) * total


def predicted_exponent(lemma: str, H: float, a: float = 1.0, b: float = 1.0) -> float:
    """Growth exponent of each lemma's bound."""
    if lemma == "alpha_max":
        return -min(2.0 * H, 1.0)
    if lemma == "alpha_sum":
        return 0.0
    if lemma == "beta_single":
        return max(1.0 - 2.0 * a, -2.0 * a * H)
    if lemma == "beta_double":
        return max(2.0 - 2.0 * a, 1.0 - 2.0 * a * H)
    if lemma == "beta_triple":
        return max(-2.0 * H * (2.0 * a + b), 2.0 - 2.0 * (2.0 * a + b))
    raise ConfigError(f"unknown lemma {lemma!r}")


LEMMAS = ("alpha_max", "alpha_sum", "beta_single", "beta_double", "beta_triple")


def lemma_sweep(
    lemma: str, H, n_grid: Sequence[int], a: float = 1.0, b: float = 1.0,
    t_grid_size: int = 256,
) -> tuple[list[dict], ExponentFit]:
    """Evaluate one lemma's sum over ``n_grid``; returns CSV-ready rows and the fit.

    Single- and triple-sum lemmas use the interior index ``n // 2``.
    """
    H = check_hurst(H)
    gamma = predicted_exponent(lemma, H, a, b)
    values = []
    for n in n_grid:
        if lemma in ("alpha_max", "alpha_sum"):
            ab = alpha_bounds(H, n, t_grid_size)
            values.append(ab.max_abs_alpha if lemma == "alpha_max" else ab.sup_sum_alpha)
        elif lemma == "beta_single":
            values.append(beta_power_sum(H, n, a, n // 2))
        elif lemma == "beta_double":
            values.append(beta_power_double_sum(H, n, a))
        else:
            values.append(triple_beta_sum(H, n, a, b, n // 2))
    fit = fit_exponent(zip(n_grid, values))
    params = f"a={a};b={b}" if lemma == "beta_triple" else (f"a={a}" if lemma.startswith("beta") else f"t_grid={t_grid_size}")
    rows = [
        {
            "lemma": lemma,
            "H": H,
            "params": params,
            "n": int(n),
            "value": v,
            "predicted_exponent": gamma,
            "fitted_slope": fit.slope,
        }
        for n, v in zip(n_grid, values)
    ]
    return rows, fit


SWEEP_COLUMNS = ("lemma", "H", "params", "n", "value", "predicted_exponent", "fitted_slope")


def sweep_to_csv(rows: Sequence[dict], fh=None) -> str | None:
    buf = io.StringIO() if fh is None else fh
    writer = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue() if fh is None else None
