"""Weighted Hermite variations of a sampled fBm path and their Skorohod form.

For a path on the grid {k/n} with increments ``dB_k`` and ``x_k = n^H dB_k``:

``F_n = n^{-1/2} sum_k f(B_{k/n}) H_q(x_k)``

``G_n = n^{qH-1/2} sum_k sum_{r=0}^q (-1)^r C(q,r) f^{(r)}(B_{k/n}) a_k^r n^{-H(q-r)} H_{q-r}(x_k)``

with ``a_k = alpha_diag(H, n, k)``.  ``G_n`` is the q-fold Skorohod integral of
``n^{qH-1/2} sum_k f(B_{k/n}) 1_{[k/n,(k+1)/n]}^{(x)q}``, obtained from the
closed-form expansion of ``delta^q(phi(B(g)) h^{(x)q})`` and the identity
``I_m(h^{(x)m}) = |h|^m H_m(B(h)/|h|)``.  The r-th correction ``K_{n,r}``
collects the r-th inner term with sign ``(-1)^{r+1}``, so that
``F_n - G_n = sum_{r>=1} K_{n,r}``.

All sums over k run in ascending order; from ``n >= 4096`` they are
Neumaier-compensated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigError, GrowthError
from .fbm import FbmPath
from .hermite import hermite_table
from .kernel import alpha_diag, check_hurst, rho, sigma_sq
from .seeds import standard_normals
from .weights import WeightFunction

__all__ = [
    "VariationConfig",
    "MixtureScale",
    "PathStatistics",
    "COMPENSATION_THRESHOLD",
    "ascending_sum",
    "batch_statistics",
    "weighted_variation",
    "skorohod_variation",
    "correction_term",
    "path_statistics",
    "limit_scale",
    "mixture_sample",
    "seminorm",
    "residual_second_moment_exact",
    "residual_exponent",
]

COMPENSATION_THRESHOLD = 1 << 12


@dataclass(frozen=True)
class VariationConfig:
    q: int
    H: float
    n: int

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 1:
            raise ConfigError(f"q must be a positive integer, got {self.q!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "q", int(self.q))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "H", check_hurst(self.H))

    @property
    def in_theorem_range(self) -> bool:
        """``q >= 2`` and ``1/(2q) < H < 1 - 1/(2q)``."""
        return self.q >= 2 and 1 / (2 * self.q) < self.H < 1 - 1 / (2 * self.q)

    def with_n(self, n: int) -> "VariationConfig":
        return VariationConfig(self.q, self.H, n)

    def to_dict(self) -> dict:
        return {"q": self.q, "H": self.H, "n": self.n}


def ascending_sum(terms: np.ndarray) -> np.ndarray:
    """Sum along the last axis strictly left to right.

    Below ``COMPENSATION_THRESHOLD`` terms this is a plain sequential sum;
    above it, Neumaier's compensated summation.
    """
    terms = np.asarray(terms, dtype=float)
    n = terms.shape[-1]
    if n == 0:
        return np.zeros(terms.shape[:-1])
    if n < COMPENSATION_THRESHOLD:
        return np.cumsum(terms, axis=-1)[..., -1]
    cols = np.moveaxis(terms, -1, 0)
    s = cols[0].copy()
    c = np.zeros_like(s)
    for x in cols[1:]:
        t = s + x
        big = np.abs(s) >= np.abs(x)
        c += np.where(big, (s - t) + x, (x - t) + s)
        s = t
    return s + c


class PathStatistics(NamedTuple):
    """Per-replicate statistics; every field is an array over replicates."""

    F: np.ndarray
    G: np.ndarray
    K: np.ndarray  # shape (replicates, q); column r-1 holds K_{n,r}
    f2_integral: np.ndarray  # (1/n) sum_k f(B_{k/n})^2
    B1: np.ndarray


def _row_chunk(n: int, q: int) -> int:
    return max(1, (1 << 22) // ((q + 3) * n))


def batch_statistics(
    H, q: int, values: np.ndarray, f: WeightFunction, corrections: bool = True
) -> PathStatistics:
    """F_n, G_n, K_{n,r} and the Riemann sum of f^2 for each row of ``values``.

    ``values`` has shape ``(replicates, n+1)`` with ``values[:, 0] == 0``.
    With ``corrections=False`` only F_n and the Riemann sum are computed;
    ``G`` and ``K`` come back filled with NaN.
    """
    H = check_hurst(H)
    q = int(q)
    values = np.atleast_2d(np.asarray(values, dtype=float))
    R, n1 = values.shape
    n = n1 - 1
    if n < 1:
        raise ConfigError("paths need at least one increment")
    if corrections:
        f.derivative(q)  # raises MissingDerivativeError early
    a = alpha_diag(H, n)
    F = np.empty(R)
    G = np.full(R, np.nan)
    K = np.full((R, q), np.nan)
    integral = np.empty(R)
    step = _row_chunk(n, q)
    for start in range(0, R, step):
        V = values[start:start + step]
        left = V[:, :-1]
        x = n**H * np.diff(V, axis=1)
        Hx = hermite_table(q, x)
        f0 = np.broadcast_to(f.derivative(0)(left), left.shape)
        sl = slice(start, start + V.shape[0])
        # the r = 0 term of G_n, shared with F_n so both agree bit for bit
        # whenever the corrections vanish identically
        base = (n**-0.5 * f0) * Hx[q]
        F[sl] = ascending_sum(base)
        integral[sl] = ascending_sum(f0 * f0) / n
        if not corrections:
            continue
        # unsigned r-th term of G_n at each k
        pieces = [base]
        for r in range(1, q + 1):
            fr = np.broadcast_to(f.derivative(r)(left), left.shape)
            pieces.append((math.comb(q, r) * n ** (r * H - 0.5) * fr) * a**r * Hx[q - r])
        inner = base.copy()
        for r in range(1, q + 1):
            inner = inner + (-1) ** r * pieces[r]
        G[sl] = ascending_sum(inner)
        for r in range(1, q + 1):
            K[sl, r - 1] = ascending_sum((-1) ** (r + 1) * pieces[r])
    return PathStatistics(F, G, K, integral, values[:, -1].copy())


def _single(path: FbmPath, f: WeightFunction, q: int, corrections: bool) -> PathStatistics:
    return batch_statistics(path.H, q, path.values[None, :], f, corrections)


def weighted_variation(path: FbmPath, f: WeightFunction, q: int) -> float:
    """``F_n = n^{-1/2} sum_k f(B_{k/n}) H_q(n^H dB_k)``."""
    return float(_single(path, f, q, False).F[0])


def skorohod_variation(path: FbmPath, f: WeightFunction, q: int) -> float:
    """``G_n``, the Skorohod-integral counterpart of ``F_n``; needs ``f^{(q)}``."""
    return float(_single(path, f, q, True).G[0])


def correction_term(path: FbmPath, f: WeightFunction, q: int, r: int) -> float:
    """``K_{n,r}`` for ``1 <= r <= q``."""
    if not 1 <= r <= q:
        raise ConfigError(f"correction index r must lie in [1, {q}], got {r}")
    return float(_single(path, f, q, True).K[0, r - 1])


def path_statistics(path: FbmPath, f: WeightFunction, q: int, sigma2: float | None = None) -> dict:
    """Record of every statistic on one path, ready for CSV/JSON output."""
    st = _single(path, f, q, True)
    if sigma2 is None:
        sigma2 = sigma_sq(path.H, q).value
    record = {
        "q": q,
        "H": path.H,
        "n": path.n,
        "seed": path.seed,
        "method": path.method,
        "F_n": float(st.F[0]),
        "G_n": float(st.G[0]),
    }
    for r in range(1, q + 1):
        record[f"K_{r}"] = float(st.K[0, r - 1])
    record["S"] = math.sqrt(sigma2 * float(st.f2_integral[0]))
    return record


@dataclass(frozen=True)
class MixtureScale:
    S: float
    sigma_sq: float
    f2_integral: float
    path_ref: tuple  # (H, n, seed, method)


def limit_scale(path: FbmPath, f: WeightFunction, q: int, tol: float = 1e-12) -> MixtureScale:
    """``S = sqrt(sigma^2_{H,q} * (1/n) sum_k f(B_{k/n})^2)``.

    Raises ParameterRangeError when sigma^2 diverges for (H, q).
    """
    s2 = sigma_sq(path.H, q, tol).value
    left = path.values[:-1]
    f0 = np.broadcast_to(f(left), left.shape)
    integral = float(ascending_sum(f0 * f0)) / path.n
    return MixtureScale(
        math.sqrt(s2 * integral), s2, integral, (path.H, path.n, path.seed, path.method)
    )


def mixture_sample(scale: MixtureScale, eta_seed: int) -> float:
    """``S * eta`` with ``eta ~ N(0, 1)`` drawn from the stream keyed by ``eta_seed``."""
    eta = float(standard_normals(eta_seed, 1)[0])
    return scale.S * eta


def seminorm(
    f: WeightFunction, N: int, p: float, t_grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
    nodes: int = 80,
) -> float:
    """``sum_{i<=N} max_t (E|f^{(i)}(sqrt(t) Z)|^p)^{1/p}`` over ``t_grid``.

    The maximum over a finite grid in (0, 1] is a lower approximation of the
    supremum over t in [0, 1].  Expectations use Gauss-Hermite quadrature.
    """
    if p < 1:
        raise ConfigError("p must be >= 1")
    ts = np.asarray(t_grid, dtype=float)
    if ts.size == 0 or ts.min() <= 0 or ts.max() > 1:
        raise ConfigError("t_grid must be a non-empty subset of (0, 1]")
    z, w = np.polynomial.hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2 * math.pi)
    total = 0.0
    for i in range(N + 1):
        fi = f.derivative(i)
        best = 0.0
        for t in ts:
            vals = np.abs(np.broadcast_to(fi(math.sqrt(t) * z), z.shape)) ** p
            moment = float(np.dot(w, vals))
            if not math.isfinite(moment):
                raise GrowthError(f"E|f^({i})|^{p} under N(0,{t}) is not finite")
            best = max(best, moment ** (1.0 / p))
        total += best
    return total


def residual_second_moment_exact(H, n: int, method: str = "fft") -> float:
    """Exact ``E[K_{n,1}^2]`` for ``q = 3`` and ``f(x) = x``.

    ``(9/2) n^{-2H-1} sum_{j,k=1}^{n-1} c_j c_k rho(H, j-k)^2`` with
    ``c_k = (k+1)^{2H} - k^{2H} - 1``.  ``method="fft"`` evaluates the
    Toeplitz quadratic form by FFT convolution in O(n log n);
    ``method="direct"`` sums the O(n^2) double sum block by block.
    """
    H = check_hurst(H)
    if int(n) != n or n < 2:
        raise ConfigError("n must be an integer >= 2")
    n = int(n)
    # c_k = 2 n^{2H} alpha_diag(k); k = 0 contributes nothing
    c = 2.0 * n ** (2.0 * H) * alpha_diag(H, n)[1:]
    m = c.size
    if method == "fft":
        kernel = rho(H, np.arange(-(m - 1), m)) ** 2
        conv = fftconvolve(c, kernel)[m - 1:2 * m - 1]
        quad = float(np.dot(c, conv))
    elif method == "direct":
        quad = 0.0
        idx = np.arange(m)
        block = 512
        for start in range(0, m, block):
            rows = idx[start:start + block]
            lag_sq = rho(H, rows[:, None] - idx[None, :]) ** 2
            quad += float(c[rows] @ lag_sq @ c)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return 4.5 * n ** (-2.0 * H - 1.0) * quad


def residual_exponent(H) -> float:
    """Growth exponent of ``E[K_{n,1}^2]`` for ``q = 3``, ``f(x) = x`` and ``H > 1/2``.

    ``2H - 2`` below ``H = 3/4`` and ``6H - 5`` above it; at ``H = 3/4`` both
    equal ``-1/2`` and a logarithmic factor appears.
    """
    H = check_hurst(H)
    return max(2.0 * H - 2.0, 6.0 * H - 5.0)
