"""Monte Carlo experiments around the mixed-Gaussian limit of F_n.

Every replicate ``r`` draws its path from ``derive_seed(master, path_tag, r)``
and, where needed, its independent standard normal ``eta`` from
``derive_seed(master, eta_tag, r)``.  Replicates are split into contiguous
blocks for the worker pool and reassembled in replicate order, so results
do not depend on the number of workers.
"""
from __future__ import annotations

import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from multiprocessing import get_context
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf, expit

from .bounds import ExponentFit, fit_exponent
from .errors import ConfigError
from .fbm import sample_paths
from .kernel import check_hurst, rho, sigma_sq
from .seeds import AUX_TAG, ETA_TAG, PATH_TAG, derive_seed, level_tag, standard_normals
from .variations import PathStatistics, VariationConfig, batch_statistics
from .weights import WeightFunction

__all__ = [
    "TestFunction",
    "test_function",
    "TEST_FUNCTIONS",
    "phi_two_branch",
    "phi_four_term",
    "phi_exponent",
    "ExperimentResult",
    "RateFit",
    "default_replicates",
    "simulate_replicates",
    "estimate_weak_distance",
    "rate_experiment",
    "fn_gn_decay",
    "breuer_major_check",
    "finite_n_variance",
    "stable_convergence_check",
    "negative_moment_diagnostic",
    "count_inversions",
    "default_workers",
]

WORKERS_ENV = "HERMVAR_WORKERS"


# -- test functions -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TestFunction:
    """A bounded smooth function with bounded derivatives of every order."""

    __test__ = False  # not a pytest class

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str
    derivative_bound_order: int = 64

    def __call__(self, x):
        return self.evaluator(np.asarray(x, dtype=float))


def test_function(name: str, a: float = 1.0) -> TestFunction:
    """Catalog entry: ``cos``, ``sin``, ``logistic``, ``erf_step`` or ``one``."""
    if name == "cos":
        return TestFunction(lambda x: np.cos(a * x), f"cos({a}x)")
    if name == "sin":
        return TestFunction(lambda x: np.sin(a * x), f"sin({a}x)")
    if name == "logistic":
        return TestFunction(lambda x: expit(a * x), f"logistic({a}x)")
    if name == "erf_step":
        return TestFunction(lambda x: 0.5 * (1.0 + erf(a * x)), f"erf_step({a}x)")
    if name == "one":
        return TestFunction(lambda x: np.ones_like(x), "one")
    raise ConfigError(f"unknown test function {name!r}; known: {', '.join(TEST_FUNCTIONS)}")


test_function.__test__ = False
TEST_FUNCTIONS = ("cos", "sin", "logistic", "erf_step", "one")


# -- rate exponent ------------------------------------------------------------

def phi_two_branch(q: int, H: float) -> float:
    """``(|H-1/2| - 1/2) v (q|H-1/2| - (q-1)/2)``."""
    d = abs(H - 0.5)
    return max(d - 0.5, q * d - (q - 1) / 2)


def phi_four_term(q: int, H: float) -> float:
    """``max{-H, H-1, -qH+1/2, q(H-1)+1/2}``."""
    return max(-H, H - 1.0, -q * H + 0.5, q * (H - 1.0) + 0.5)


def phi_exponent(q: int, H) -> float:
    """Rate exponent of the weak distance bound; zero at ``H = 1/(2q)`` and ``1 - 1/(2q)``.

    Defined for every H; outside ``(1/(2q), 1 - 1/(2q))`` it is positive and
    carries no meaning for the theorem.
    """
    H = check_hurst(H)
    if int(q) != q or q < 2:
        raise ConfigError("q must be an integer >= 2")
    two = phi_two_branch(q, H)
    four = phi_four_term(q, H)
    if abs(two - four) > 1e-15:
        raise ArithmeticError(f"exponent forms disagree at q={q}, H={H}: {two} vs {four}")
    return two


# -- result records -----------------------------------------------------------

@dataclass
class ExperimentResult:
    estimate: float
    stderr: float
    replicates: int
    config: VariationConfig
    seed: int
    wall_time: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "stderr": self.stderr,
            "replicates": self.replicates,
            "config": self.config.to_dict(),
            "seed": self.seed,
            "wall_time": self.wall_time,
            "extras": dict(self.extras),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentResult":
        return cls(
            d["estimate"], d["stderr"], d["replicates"], VariationConfig(**d["config"]),
            d["seed"], d["wall_time"], dict(d.get("extras", {})),
        )

    def same_numbers(self, other: "ExperimentResult") -> bool:
        """Equality ignoring wall time."""
        a, b = self.to_dict(), other.to_dict()
        a.pop("wall_time")
        b.pop("wall_time")
        return a == b


@dataclass
class RateFit:
    results: list
    target: float
    fit: ExponentFit | None
    slope_stderr: float
    noise_limited: bool
    degenerate: bool
    tolerance: float = 0.2

    @property
    def slope(self) -> float:
        return self.fit.slope if self.fit is not None else float("nan")

    @property
    def band(self) -> tuple[float, float]:
        return (self.slope - 2 * self.slope_stderr, self.slope + 2 * self.slope_stderr)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([r.estimate for r in self.results])

    @property
    def slope_accepted(self) -> bool:
        """Empirical decay at least as fast as the bound: slope <= target + tolerance."""
        if self.degenerate:
            return True
        return self.fit is not None and self.fit.slope <= self.target + self.tolerance

    @property
    def fallback_accepted(self) -> bool:
        """Non-increasing up to one inversion, and last estimate below half the first."""
        est = self.estimates
        return count_inversions(est) <= 1 and est[-1] < est[0] / 2

    @property
    def accepted(self) -> bool:
        if self.degenerate:
            return True
        return self.fallback_accepted if self.noise_limited else self.slope_accepted

    def to_dict(self) -> dict:
        return {
            "target_exponent": self.target,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "slope_stderr": self.slope_stderr,
            "band": list(self.band),
            "noise_limited": self.noise_limited,
            "degenerate": self.degenerate,
            "slope_accepted": self.slope_accepted,
            "fallback_accepted": self.fallback_accepted,
            "accepted": self.accepted,
            "results": [r.to_dict() for r in self.results],
        }


def count_inversions(seq: Sequence[float]) -> int:
    """Number of consecutive increases in ``seq``."""
    s = np.asarray(seq, dtype=float)
    return int(np.sum(np.diff(s) > 0))


def _rate_fit(results: list, target: float, tolerance: float = 0.2) -> RateFit:
    est = np.array([r.estimate for r in results])
    err = np.array([r.stderr for r in results])
    if np.all(est == 0):
        return RateFit(results, target, None, 0.0, False, True, tolerance)
    noise = bool(np.any(err > 0.3 * np.abs(est)))
    if np.any(est <= 0):
        return RateFit(results, target, None, float("nan"), True, False, tolerance)
    fit = fit_exponent((r.config.n, r.estimate) for r in results)
    x = np.log([r.config.n for r in results])
    c = (x - x.mean()) / np.sum((x - x.mean()) ** 2)
    slope_se = float(np.sqrt(np.sum(c**2 * (err / est) ** 2)))
    return RateFit(results, target, fit, slope_se, noise, False, tolerance)


# -- replicate engine ---------------------------------------------------------

def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer") from None


_JOB: dict = {}


def _init_job(job: dict) -> None:
    _JOB.clear()
    _JOB.update(job)


def _run_block(bounds: tuple[int, int]) -> tuple:
    job = _JOB
    lo, hi = bounds
    path_seeds = [derive_seed(job["seed"], job["path_tag"], r) for r in range(lo, hi)]
    values = sample_paths(job["H"], job["n"], path_seeds, job["method"])
    st = batch_statistics(job["H"], job["q"], values, job["f"], job["corrections"])
    if job["eta_tag"] is None:
        eta = np.full(hi - lo, np.nan)
    else:
        eta = np.array(
            [standard_normals(derive_seed(job["seed"], job["eta_tag"], r), 1)[0] for r in range(lo, hi)]
        )
    return st, eta


def simulate_replicates(
    cfg: VariationConfig,
    f: WeightFunction,
    N: int,
    seed: int,
    *,
    level: int = 0,
    path_tag: int = PATH_TAG,
    with_eta: bool = True,
    corrections: bool = False,
    method: str = "circulant",
    workers: int | None = None,
) -> tuple[PathStatistics, np.ndarray]:
    """Per-replicate statistics and eta draws for replicates ``0..N-1``."""
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be positive")
    job = {
        "H": cfg.H, "n": cfg.n, "q": cfg.q, "f": f, "seed": int(seed),
        "path_tag": level_tag(path_tag, level),
        "eta_tag": level_tag(ETA_TAG, level) if with_eta else None,
        "method": method, "corrections": corrections,
    }
    block = max(64, min(4096, -(-N // (4 * workers))))
    blocks = [(lo, min(N, lo + block)) for lo in range(0, N, block)]
    if workers == 1:
        _init_job(job)
        parts = [_run_block(b) for b in blocks]
    else:
        # fork start method: the job (including weight callables) is inherited,
        # never pickled
        with ProcessPoolExecutor(workers, mp_context=get_context("fork"),
                                 initializer=_init_job, initargs=(job,)) as pool:
            parts = list(pool.map(_run_block, blocks))
    stats = PathStatistics(*(np.concatenate([getattr(p[0], name) for p in parts])
                             for name in PathStatistics._fields))
    eta = np.concatenate([p[1] for p in parts])
    return stats, eta


def _check_experiment(cfg: VariationConfig, N: int, minimum: int = 100) -> None:
    if not cfg.in_theorem_range:
        raise ConfigError(
            f"(q={cfg.q}, H={cfg.H}) outside the range 1/(2q) < H < 1 - 1/(2q) with q >= 2"
        )
    if int(N) != N or N < minimum:
        raise ConfigError(f"N must be an integer >= {minimum}")


def _mean_and_stderr(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    mean = float(np.cumsum(x)[-1] / x.size)
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return mean, sd / math.sqrt(x.size)


def default_replicates(q: int, H: float, n: int) -> int:
    """``max(10^4, 64 n^{-2 phi(H)})`` capped at ``10^6``."""
    return int(min(10**6, max(10**4, math.ceil(64 * n ** (-2 * phi_exponent(q, H))))))


# -- experiments --------------------------------------------------------------

def estimate_weak_distance(
    cfg: VariationConfig, f: WeightFunction, phi: TestFunction, N: int, seed: int,
    *, level: int = 0, coupled: bool = True, method: str = "circulant",
    workers: int | None = None,
) -> ExperimentResult:
    """``|E phi(F_n) - E phi(S eta)|`` by Monte Carlo.

    Coupled mode (common random numbers) evaluates ``F_n`` and ``S`` on the
    same path and takes the standard error of the paired differences.
    Uncoupled mode draws ``S`` from a second, independent set of paths.
    """
    _check_experiment(cfg, N)
    t0 = time.perf_counter()
    sigma2 = sigma_sq(cfg.H, cfg.q).value
    st, eta = simulate_replicates(cfg, f, N, seed, level=level, method=method, workers=workers)
    phi_F = phi(st.F)
    if coupled:
        S = np.sqrt(sigma2 * st.f2_integral)
        phi_S = phi(S * eta)
        mean, se = _mean_and_stderr(phi_F - phi_S)
    else:
        st2, eta2 = simulate_replicates(cfg, f, N, seed, level=level, path_tag=AUX_TAG,
                                        method=method, workers=workers)
        phi_S = phi(np.sqrt(sigma2 * st2.f2_integral) * eta2)
        m1, s1 = _mean_and_stderr(phi_F)
        m2, s2 = _mean_and_stderr(phi_S)
        mean, se = m1 - m2, math.hypot(s1, s2)
    extras = {
        "signed_difference": mean,
        "mean_phi_F": _mean_and_stderr(phi_F)[0],
        "mean_phi_S_eta": _mean_and_stderr(phi_S)[0],
        "sigma_sq": sigma2,
        "weight": f.label,
        "test_function": phi.label,
        "coupled": coupled,
        "method": method,
    }
    return ExperimentResult(abs(mean), se, int(N), cfg, int(seed), time.perf_counter() - t0, extras)


def _check_grid(n_grid: Sequence[int], minimum: int = 4) -> list[int]:
    grid = [int(n) for n in n_grid]
    if len(grid) < minimum:
        raise ConfigError(f"n_grid needs at least {minimum} points")
    for n in grid:
        if n < 2 or n & (n - 1):
            raise ConfigError(f"n_grid must be dyadic, got {n}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("n_grid must be strictly increasing")
    return grid


def rate_experiment(
    cfg_base: VariationConfig, n_grid: Sequence[int], f: WeightFunction, phi: TestFunction,
    N: int | None, seed: int, *, coupled: bool = True, method: str = "circulant",
    workers: int | None = None,
) -> RateFit:
    """Weak distance over a dyadic grid, fitted against ``phi_exponent(q, H)``.

    ``N=None`` applies :func:`default_replicates` at each n.
    """
    grid = _check_grid(n_grid)
    target = phi_exponent(cfg_base.q, cfg_base.H)
    results = []
    for level, n in enumerate(grid):
        reps = default_replicates(cfg_base.q, cfg_base.H, n) if N is None else N
        results.append(estimate_weak_distance(cfg_base.with_n(n), f, phi, reps, seed, level=level,
                                              coupled=coupled, method=method, workers=workers))
    return _rate_fit(results, target)


def fn_gn_decay(
    cfg_base: VariationConfig, n_grid: Sequence[int], f: WeightFunction, N: int, seed: int,
    *, method: str = "circulant", workers: int | None = None,
) -> RateFit:
    """``E|F_n - G_n|`` over a dyadic grid, fitted against ``phi_exponent(q, H)``.

    Extras per n hold the mean square of each correction ``K_{n,r}``.
    """
    grid = _check_grid(n_grid)
    f.derivative(cfg_base.q)
    target = phi_exponent(cfg_base.q, cfg_base.H)
    results = []
    for level, n in enumerate(grid):
        cfg = cfg_base.with_n(n)
        _check_experiment(cfg, N)
        t0 = time.perf_counter()
        st, _ = simulate_replicates(cfg, f, N, seed, level=level, with_eta=False,
                                    corrections=True, method=method, workers=workers)
        mean, se = _mean_and_stderr(np.abs(st.F - st.G))
        extras = {}
        for r in range(1, cfg.q + 1):
            m2, s2 = _mean_and_stderr(st.K[:, r - 1] ** 2)
            extras[f"mean_K{r}_sq"] = m2
            extras[f"mean_K{r}_sq_stderr"] = s2
        results.append(ExperimentResult(mean, se, int(N), cfg, int(seed),
                                        time.perf_counter() - t0, extras))
    return _rate_fit(results, target)


def finite_n_variance(q: int, H, n: int) -> float:
    """Exact ``E[F_n^2]`` for ``f = 1``: ``q! sum_{|h|<n} (1 - |h|/n) rho(h)^q``."""
    H = check_hurst(H)
    h = np.arange(1, n)
    tail = float(np.cumsum((1.0 - h / n) * rho(H, h) ** q)[-1]) if n > 1 else 0.0
    return math.factorial(q) * (1.0 + 2.0 * tail)


def breuer_major_check(
    q: int, H, n: int, N: int, seed: int, *, method: str = "circulant",
    workers: int | None = None,
) -> ExperimentResult:
    """Sample variance of the unweighted variation, to compare with ``sigma_sq(H, q)``.

    ``extras`` carries the limit variance, the exact finite-n variance, and
    the z-scores against both.  The variance estimate's standard error is
    the standard deviation of the centred squares over ``sqrt(N)``.
    """
    H = check_hurst(H)
    cfg = VariationConfig(q, H, n)
    if H >= 1 - 1 / (2 * q):
        raise ConfigError("Breuer-Major check needs H < 1 - 1/(2q)")
    if int(N) != N or N < 2:
        raise ConfigError("N must be an integer >= 2")
    from .weights import weight

    t0 = time.perf_counter()
    st, _ = simulate_replicates(cfg, weight("one", 0), N, seed, with_eta=False,
                                method=method, workers=workers)
    F = st.F
    var = float(np.var(F, ddof=1))
    centred = (F - F.mean()) ** 2
    se = float(np.std(centred, ddof=1)) / math.sqrt(N)
    limit = sigma_sq(H, q)
    exact_n = finite_n_variance(q, H, n)
    extras = {
        "mean": float(F.mean()),
        "sigma_sq": limit.value,
        "sigma_sq_tail_bound": limit.tail_bound,
        "finite_n_variance": exact_n,
        "z_limit": (var - limit.value) / se,
        "z_finite_n": (var - exact_n) / se,
        "within_4se": bool(abs(var - limit.value) <= 4 * se),
    }
    return ExperimentResult(var, se, int(N), cfg, int(seed), time.perf_counter() - t0, extras)


def stable_convergence_check(
    cfg: VariationConfig, f: WeightFunction, phi: TestFunction, g: TestFunction, N: int,
    seed: int, *, level: int = 0, method: str = "circulant", workers: int | None = None,
) -> ExperimentResult:
    """``|E[phi(F_n) g(B_1)] - E[phi(S eta) g(B_1)]|`` with both terms on the same path."""
    _check_experiment(cfg, N)
    t0 = time.perf_counter()
    sigma2 = sigma_sq(cfg.H, cfg.q).value
    st, eta = simulate_replicates(cfg, f, N, seed, level=level, method=method, workers=workers)
    S = np.sqrt(sigma2 * st.f2_integral)
    d = (phi(st.F) - phi(S * eta)) * g(st.B1)
    mean, se = _mean_and_stderr(d)
    extras = {"signed_difference": mean, "weight": f.label, "test_function": phi.label,
              "g": g.label, "sigma_sq": sigma2, "method": method}
    return ExperimentResult(abs(mean), se, int(N), cfg, int(seed), time.perf_counter() - t0, extras)


def negative_moment_diagnostic(
    cfg: VariationConfig, f: WeightFunction, alpha: float, N: int, seed: int,
    *, method: str = "circulant", workers: int | None = None,
) -> ExperimentResult:
    """Monte Carlo estimate of ``E[S^{(2-2q) alpha}]``.

    This is a diagnostic, not a certificate: the moment may be infinite
    while every sample is finite.  A ``RuntimeWarning`` is issued when a
    single replicate carries more than 10% of the total or any sample is
    infinite.
    """
    if alpha <= 1:
        raise ConfigError("alpha must exceed 1")
    t0 = time.perf_counter()
    sigma2 = sigma_sq(cfg.H, cfg.q).value
    st, _ = simulate_replicates(cfg, f, N, seed, with_eta=False, method=method, workers=workers)
    S = np.sqrt(sigma2 * st.f2_integral)
    with np.errstate(divide="ignore"):
        samples = S ** ((2 - 2 * cfg.q) * alpha)
    heavy = (not np.all(np.isfinite(samples))) or samples.max() > 0.1 * samples.sum()
    if heavy:
        warnings.warn("negative moment of S looks heavy-tailed; estimate unreliable",
                      RuntimeWarning, stacklevel=2)
    mean, se = _mean_and_stderr(samples)
    return ExperimentResult(mean, se, int(N), cfg, int(seed), time.perf_counter() - t0,
                            {"alpha": alpha, "heavy_tail": bool(heavy)})
