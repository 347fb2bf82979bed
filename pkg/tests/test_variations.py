import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hermvar.errors import ConfigError, GrowthError, MissingDerivativeError, ParameterRangeError
from hermvar.fbm import generate, sample_paths
from hermvar.hermite import hermite_eval
from hermvar.kernel import alpha, sigma_sq
from hermvar.seeds import PATH_TAG, derive_seed
from hermvar.variations import (
    COMPENSATION_THRESHOLD,
    MixtureScale,
    VariationConfig,
    ascending_sum,
    batch_statistics,
    correction_term,
    limit_scale,
    mixture_sample,
    path_statistics,
    residual_exponent,
    residual_second_moment_exact,
    seminorm,
    skorohod_variation,
    weighted_variation,
)
from hermvar.weights import WeightFunction, weight

WEIGHTS = ("x", "x2", "cos", "lorentzian")


def path(H=0.6, n=256, seed=3, method="circulant"):
    return generate(H, n, seed, method)


# -- configuration -----------------------------------------------------------------

def test_config_validation_and_range_flag():
    assert VariationConfig(2, 0.6, 10).in_theorem_range
    assert not VariationConfig(2, 0.8, 10).in_theorem_range
    assert not VariationConfig(1, 0.5, 10).in_theorem_range
    assert VariationConfig(3, 0.2, 10).in_theorem_range
    assert VariationConfig(2, 0.6, 10).with_n(32).n == 32
    for bad in ((0, 0.5, 4), (2, 0.5, 0), (2.5, 0.5, 4), (2, 1.0, 4)):
        with pytest.raises(ConfigError):
            VariationConfig(*bad)


# -- F_n -----------------------------------------------------------------------------

def test_zero_weight_gives_zero():
    assert weighted_variation(path(), weight("zero"), 3) == 0.0


@given(st.floats(0.05, 0.95), st.integers(1, 500), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_first_order_unit_weight_telescopes(H, n, seed):
    p = generate(H, n, seed)
    value = weighted_variation(p, weight("one"), 1)
    assert value == pytest.approx(n ** (H - 0.5) * p.values[-1], rel=1e-10, abs=1e-12)


def test_brownian_quadratic_variation_moments():
    N, n = 100000, 32
    seeds = [derive_seed(8, PATH_TAG, r) for r in range(N)]
    st_ = batch_statistics(0.5, 2, sample_paths(0.5, n, seeds), weight("one"), corrections=False)
    F = st_.F
    assert abs(F.mean()) <= 4 * F.std() / math.sqrt(N)
    se = np.std((F - F.mean()) ** 2) / math.sqrt(N)
    assert abs(F.var(ddof=1) - 2.0) <= 4 * se


# -- G_n and the corrections -----------------------------------------------------------

@given(st.floats(0.05, 0.95), st.integers(1, 4), st.integers(1, 600), st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_unit_weight_skorohod_equals_variation_exactly(H, q, n, seed):
    p = generate(H, n, seed)
    f = weight("one")
    assert skorohod_variation(p, f, q) == weighted_variation(p, f, q)
    for r in range(1, q + 1):
        assert correction_term(p, f, q, r) == 0.0


@given(st.integers(1, 4), st.integers(1, 600), st.integers(0, 10**6), st.sampled_from(WEIGHTS))
@settings(max_examples=40, deadline=None)
def test_brownian_skorohod_equals_variation_exactly(q, n, seed, name):
    p = generate(0.5, n, seed)
    f = weight(name)
    assert skorohod_variation(p, f, q) == weighted_variation(p, f, q)
    for r in range(1, q + 1):
        assert correction_term(p, f, q, r) == 0.0


def _decomposition_gap(H, q, n, seed, name):
    st_ = batch_statistics(H, q, sample_paths(H, n, [seed]), weight(name))
    F, G, K = st_.F[0], st_.G[0], st_.K[0]
    scale = max(abs(F), abs(G), float(np.abs(K).sum()))
    return abs((F - G) - math.fsum(K)), scale


def test_decomposition_identity_random_battery():
    rng = np.random.default_rng(20240611)
    for _ in range(100):
        H = float(rng.uniform(0.05, 0.95))
        q = int(rng.integers(1, 5))
        n = int(rng.choice([2, 17, 64, 256, 1000, 4096, 5000]))
        gap, scale = _decomposition_gap(H, q, n, int(rng.integers(2**63)), str(rng.choice(WEIGHTS)))
        assert gap <= 1e-12 * scale


def test_quadratic_corrections_match_direct_terms():
    H, n, q = 0.6, 128, 2
    p = path(H, n, seed=11)
    x = n**H * np.diff(p.values)
    B = p.values[:-1]
    k = np.arange(n)
    a = alpha(H, n, k, k / n)  # full covariance difference, not the diagonal shortcut
    # f(x) = x^2: f' = 2x, f'' = 2
    K1 = n ** (q * H - 0.5) * math.fsum(2 * (2 * B) * a * n ** (-H) * hermite_eval(1, x))
    K2 = -n ** (q * H - 0.5) * math.fsum(2.0 * a**2)
    f = weight("x2")
    diff = weighted_variation(p, f, q) - skorohod_variation(p, f, q)
    assert correction_term(p, f, q, 1) == pytest.approx(K1, rel=1e-11)
    assert correction_term(p, f, q, 2) == pytest.approx(K2, rel=1e-11)
    assert diff == pytest.approx(K1 + K2, rel=1e-11)
    assert correction_term(p, weight("x"), q, 2) == 0.0


def test_cubic_first_correction_is_residual_term():
    H, n = 0.65, 200
    p = path(H, n, seed=5)
    x = n**H * np.diff(p.values)
    k = np.arange(n)
    a = alpha(H, n, k, k / n)
    R = 3 * n ** (3 * H - 0.5) * math.fsum(a * n ** (-2 * H) * hermite_eval(2, x))
    assert correction_term(p, weight("x"), 3, 1) == pytest.approx(R, rel=1e-11)


def test_correction_requires_derivatives_and_valid_index():
    p = path()
    with pytest.raises(MissingDerivativeError):
        skorohod_variation(p, weight("x", 1), 3)
    with pytest.raises(ConfigError):
        correction_term(p, weight("x"), 2, 3)
    assert weighted_variation(p, weight("x", 0), 3) == weighted_variation(p, weight("x"), 3)


def test_batch_rows_match_single_path_statistics():
    H, n, q = 0.7, 300, 3
    seeds = [derive_seed(1, PATH_TAG, r) for r in range(5)]
    batch = batch_statistics(H, q, sample_paths(H, n, seeds), weight("cos"))
    for i, s in enumerate(seeds):
        p = generate(H, n, s)
        assert batch.F[i] == weighted_variation(p, weight("cos"), q)
        assert batch.G[i] == skorohod_variation(p, weight("cos"), q)


def test_path_statistics_record():
    p = path()
    rec = path_statistics(p, weight("x"), 3)
    assert list(rec) == ["q", "H", "n", "seed", "method", "F_n", "G_n", "K_1", "K_2", "K_3", "S"]
    assert rec["F_n"] - rec["G_n"] == pytest.approx(rec["K_1"] + rec["K_2"] + rec["K_3"], abs=1e-12)


# -- summation -------------------------------------------------------------------------

def test_ascending_sum_small_is_sequential():
    t = np.array([[1e16, 1.0, -1e16, 1.0]])
    assert ascending_sum(t)[0] == ((1e16 + 1.0) - 1e16) + 1.0


def test_ascending_sum_compensated_above_threshold():
    rng = np.random.default_rng(1)
    t = rng.standard_normal((3, COMPENSATION_THRESHOLD + 5)) * 10.0 ** rng.integers(-8, 8, COMPENSATION_THRESHOLD + 5)
    for row, s in zip(t, ascending_sum(t)):
        assert s == pytest.approx(math.fsum(row), rel=1e-15, abs=1e-300)
    assert ascending_sum(np.zeros((2, 0))).tolist() == [0.0, 0.0]


# -- limit scale and mixture --------------------------------------------------------------

def test_limit_scale_examples():
    p = path(0.6, 128)
    s2 = sigma_sq(0.6, 2).value
    assert limit_scale(p, weight("one"), 2).S == pytest.approx(math.sqrt(s2), rel=1e-15)
    assert limit_scale(p, weight("zero"), 2).S == 0.0
    with pytest.raises(ParameterRangeError):
        limit_scale(generate(0.8, 64, 0), weight("x"), 2)


def test_limit_scale_riemann_vs_trapezoid():
    for n in (256, 4096):
        p = path(0.6, n, seed=9)
        s2 = sigma_sq(0.6, 2).value
        b2 = p.values**2
        trap = (b2[:-1].sum() + b2[1:].sum()) / (2 * n)
        S = limit_scale(p, weight("x"), 2).S
        assert S**2 == pytest.approx(s2 * b2[:-1].sum() / n, rel=1e-13)
        assert abs(S**2 - s2 * trap) <= s2 * (b2.max() + 1) / math.sqrt(n)


def test_mixture_sample():
    assert mixture_sample(MixtureScale(0.0, 2.0, 0.0, ()), 17) == 0.0
    scale = limit_scale(path(), weight("x"), 2)
    assert mixture_sample(scale, 123) == mixture_sample(scale, 123)


def test_mixture_variance_with_unit_weight():
    scale = limit_scale(path(0.6, 64), weight("one"), 2)
    N = 100000
    draws = np.array([mixture_sample(scale, derive_seed(3, 2**31 | 1, r)) for r in range(N)])
    se = np.std(draws**2) / math.sqrt(N)
    assert abs(draws.var() - scale.sigma_sq) <= 4 * se


# -- semi-norm ---------------------------------------------------------------------------

def test_seminorm_examples():
    assert seminorm(weight("one"), 0, 3.0) == pytest.approx(1.0, rel=1e-14)
    assert seminorm(weight("x"), 0, 2.0, t_grid=(1.0,)) == pytest.approx(1.0, rel=1e-13)
    assert seminorm(weight("x2"), 1, 2.0, t_grid=(1.0,)) == pytest.approx(math.sqrt(3) + 2, rel=1e-13)


def test_seminorm_takes_max_over_grid():
    # E|sqrt(t) Z|^2 = t, so the largest t wins
    assert seminorm(weight("x"), 0, 2.0, t_grid=(0.25, 0.5)) == pytest.approx(math.sqrt(0.5), rel=1e-13)


def test_seminorm_errors():
    with pytest.raises(ConfigError):
        seminorm(weight("x"), 0, 0.5)
    with pytest.raises(ConfigError):
        seminorm(weight("x"), 0, 2.0, t_grid=(0.0, 1.0))
    explosive = WeightFunction((lambda x: np.exp(np.asarray(x) ** 4),), check=False)
    with pytest.raises(GrowthError), np.errstate(over="ignore"):
        seminorm(explosive, 0, 2.0)


# -- residual moment ------------------------------------------------------------------------

def mp_residual(H, n, dps=40):
    with mp.workdps(dps):
        H = mp.mpf(H)
        e = 2 * H
        c = [mp.mpf(k + 1) ** e - mp.mpf(k) ** e - 1 for k in range(1, n)]

        def r(h):
            h = abs(mp.mpf(h))
            return (abs(h + 1) ** e + abs(h - 1) ** e - 2 * h**e) / 2

        total = mp.fsum(c[j] * c[k] * r(j - k) ** 2 for j in range(n - 1) for k in range(n - 1))
        return float(mp.mpf(9) / 2 * mp.mpf(n) ** (-e - 1) * total)


def test_residual_vanishes_for_brownian_motion():
    assert residual_second_moment_exact(0.5, 64) == 0.0


@pytest.mark.parametrize("H", [0.3, 0.65, 0.85])
@pytest.mark.parametrize("n", [2, 7, 24])
def test_residual_matches_extended_precision(H, n):
    assert residual_second_moment_exact(H, n) == pytest.approx(mp_residual(H, n), rel=1e-12)


@given(st.floats(0.05, 0.95), st.integers(2, 512))
@settings(max_examples=30, deadline=None)
def test_residual_fft_equals_direct(H, n):
    a = residual_second_moment_exact(H, n, "fft")
    b = residual_second_moment_exact(H, n, "direct")
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


def test_residual_exponent_and_errors():
    assert residual_exponent(0.65) == pytest.approx(-0.7)
    assert residual_exponent(0.85) == pytest.approx(0.1)
    assert residual_exponent(0.75) == pytest.approx(-0.5)
    with pytest.raises(ConfigError):
        residual_second_moment_exact(0.6, 1)
    with pytest.raises(ConfigError):
        residual_second_moment_exact(0.6, 16, "naive")
