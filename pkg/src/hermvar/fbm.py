"""Exact sampling of fBm on the grid {k/n, k = 0..n}.

Two methods produce the same law:

* ``cholesky``: factor the n x n increment covariance (O(n^3) setup).
* ``circulant``: Davies-Harte embedding of the fGn autocovariance into a
  circulant matrix of size 2n, diagonalised by the FFT (O(n log n)).

Both operate on the stationary increments and cumulatively sum them.
"""
from __future__ import annotations

import csv
import functools
import io
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigError, EmbeddingError, FactorizationError
from .kernel import check_hurst, rho
from .seeds import standard_normals

__all__ = [
    "FbmPath",
    "IncrementVector",
    "CHOLESKY_CAP",
    "generate_cholesky",
    "generate_circulant",
    "generate",
    "increments",
    "circulant_eigenvalues",
    "sample_increments",
    "sample_paths",
    "path_to_csv",
]

CHOLESKY_CAP = 4096
METHODS = ("cholesky", "circulant")


@dataclass(frozen=True, eq=False)
class FbmPath:
    """A sampled trajectory ``values[k] = B_{k/n}``, k = 0..n."""

    H: float
    n: int
    values: np.ndarray
    seed: int
    method: str

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.n + 1,):
            raise ConfigError(f"path must have n+1={self.n + 1} values, got shape {vals.shape}")
        if vals[0] != 0.0:
            raise ConfigError("path must start at B_0 = 0")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    @classmethod
    def from_values(cls, H, values, seed: int = 0, method: str = "cholesky") -> "FbmPath":
        values = np.asarray(values, dtype=float)
        return cls(check_hurst(H), values.size - 1, values, seed, method)


@dataclass(frozen=True, eq=False)
class IncrementVector:
    H: float
    n: int
    deltas: np.ndarray


def increments(path: FbmPath) -> IncrementVector:
    """First differences ``B_{(k+1)/n} - B_{k/n}``."""
    return IncrementVector(path.H, path.n, np.diff(path.values))


def _check_n(n, cap=None) -> int:
    if int(n) != n or n < 1:
        raise ConfigError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    if cap is not None and n > cap:
        raise ConfigError(f"n={n} exceeds the Cholesky cap {cap}; use the circulant method")
    return n


def _to_path(H, n, deltas, seed, method) -> FbmPath:
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(deltas, out=values[1:])
    return FbmPath(H, n, values, int(seed), method)


@functools.lru_cache(maxsize=16)
def _cholesky_factor(H: float, n: int) -> np.ndarray:
    cov = n ** (-2.0 * H) * linalg.toeplitz(rho(H, np.arange(n)))
    try:
        factor = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError as exc:
        raise FactorizationError(f"increment covariance not positive definite (H={H}, n={n})") from exc
    factor.flags.writeable = False
    return factor


@functools.lru_cache(maxsize=16)
def circulant_eigenvalues(H: float, n: int) -> np.ndarray:
    """Eigenvalues of the size-2n circulant embedding of the fGn covariance."""
    H = check_hurst(H)
    n = _check_n(n)
    r = rho(H, np.arange(n + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    lam = np.fft.fft(row).real
    lam.flags.writeable = False
    return lam


@functools.lru_cache(maxsize=16)
def _circulant_scale(H: float, n: int) -> np.ndarray:
    lam = circulant_eigenvalues(H, n)
    eps_tol = 1e-10 * lam.max()
    if lam.min() < -eps_tol:
        raise EmbeddingError(
            f"circulant embedding has eigenvalue {lam.min():.3e} < -{eps_tol:.1e} (H={H}, n={n})"
        )
    m = 2 * n
    lam = np.clip(lam[: n + 1], 0.0, None)
    # real modes 0 and n carry variance lam/m, the others lam/(2m) per part
    scale = np.sqrt(lam / (2 * m))
    scale[0] = np.sqrt(lam[0] / m)
    scale[n] = np.sqrt(lam[n] / m)
    scale *= n ** (-H)
    scale.flags.writeable = False
    return scale


def _circulant_rows(H: float, n: int, seeds: Sequence[int]) -> np.ndarray:
    # Hermitian-symmetric Gaussian spectrum (Wood-Chan): 2n normals per row,
    # whose real FFT has exactly the circulant covariance
    scale = _circulant_scale(H, n)
    m = 2 * n
    out = np.empty((len(seeds), n))
    step = max(1, (1 << 21) // m)
    for start in range(0, len(seeds), step):
        chunk = seeds[start:start + step]
        z = np.stack([standard_normals(s, m) for s in chunk])
        spec = np.empty((len(chunk), n + 1), dtype=complex)
        spec.real[:, 0] = z[:, 0]
        spec.imag[:, 0] = 0.0
        spec.real[:, n] = z[:, 1]
        spec.imag[:, n] = 0.0
        spec.real[:, 1:n] = z[:, 2:n + 1]
        spec.imag[:, 1:n] = z[:, n + 1:]
        out[start:start + len(chunk)] = np.fft.hfft(spec * scale, m, axis=-1)[:, :n]
    return out


def _cholesky_rows(H: float, n: int, seeds: Sequence[int]) -> np.ndarray:
    factor = _cholesky_factor(H, n)
    out = np.empty((len(seeds), n))
    # one matrix-vector product per row: a batched GEMM may round differently
    for i, s in enumerate(seeds):
        out[i] = factor @ standard_normals(s, n)
    return out


def sample_increments(H, n: int, seeds: Iterable[int], method: str = "circulant") -> np.ndarray:
    """Increment rows ``B_{(k+1)/n} - B_{k/n}``, one row per seed.

    Row ``i`` depends only on ``(H, n, seeds[i], method)``.
    """
    H = check_hurst(H)
    seeds = [int(s) for s in seeds]
    if method == "cholesky":
        n = _check_n(n, CHOLESKY_CAP)
        return _cholesky_rows(H, n, seeds)
    if method == "circulant":
        n = _check_n(n)
        return _circulant_rows(H, n, seeds)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def sample_paths(H, n: int, seeds: Iterable[int], method: str = "circulant") -> np.ndarray:
    """Path rows ``B_{k/n}``, k = 0..n, one row per seed.

    Row ``i`` is bit-identical to ``generate(H, n, seeds[i], method).values``.
    """
    deltas = sample_increments(H, n, seeds, method)
    values = np.zeros((deltas.shape[0], deltas.shape[1] + 1))
    np.cumsum(deltas, axis=1, out=values[:, 1:])
    return values


def generate_cholesky(H, n: int, seed: int, cap: int = CHOLESKY_CAP) -> FbmPath:
    H = check_hurst(H)
    n = _check_n(n, cap)
    deltas = _cholesky_rows(H, n, [int(seed)])[0]
    return _to_path(H, n, deltas, seed, "cholesky")


def generate_circulant(H, n: int, seed: int) -> FbmPath:
    H = check_hurst(H)
    n = _check_n(n)
    deltas = _circulant_rows(H, n, [int(seed)])[0]
    return _to_path(H, n, deltas, seed, "circulant")


def generate(H, n: int, seed: int, method: str = "circulant") -> FbmPath:
    """Dispatch on ``method``; a circulant embedding failure falls back to Cholesky."""
    if method == "cholesky":
        return generate_cholesky(H, n, seed)
    if method == "circulant":
        try:
            return generate_circulant(H, n, seed)
        except EmbeddingError:
            return generate_cholesky(H, n, seed)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


def path_to_csv(path: FbmPath, fh=None) -> str | None:
    """Write ``k, t, B`` rows.  Returns the text when ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "t", "B"])
    for k, (t, b) in enumerate(zip(path.times, path.values)):
        writer.writerow([k, repr(float(t)), repr(float(b))])
    return buf.getvalue() if fh is None else None
