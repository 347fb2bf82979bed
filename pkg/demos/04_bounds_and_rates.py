"""Power-law bounds on covariance sums and a small weak-rate experiment.

Run: python demos/04_bounds_and_rates.py   (the Monte Carlo part takes a minute)
"""
from hermvar import VariationConfig, lemma_sweep, phi_exponent, rate_experiment, test_function, weight

grid = [2**k for k in range(8, 14)]
print("Covariance-sum bounds: fitted exponent vs predicted")
for lemma, kw in (("alpha_max", {}), ("beta_double", {"a": 2.0}), ("beta_triple", {"a": 1.0, "b": 1.0})):
    rows, fit = lemma_sweep(lemma, 0.7, grid, **kw)
    print(f"  {lemma:12s} H=0.7: fitted {fit.slope: .4f}, predicted {rows[0]['predicted_exponent']: .4f}")
print()

q, H = 2, 0.35
print(f"Weak distance |E cos(F_n) - E cos(S eta)| for q={q}, H={H}, f(x)=x")
print(f"  predicted rate exponent: {phi_exponent(q, H):.3f}")
fit = rate_experiment(VariationConfig(q, H, grid[0]), grid[:4], weight("x"),
                      test_function("cos"), 20000, seed=3)
for r in fit.results:
    print(f"  n={r.config.n:5d}: {r.estimate:.5f} +- {r.stderr:.5f}")
print(f"  fitted slope {fit.slope:.3f}; noise limited: {fit.noise_limited}")
print("  With 2x10^4 replicates the Monte Carlo error already dominates the")
print("  distance itself; larger N (or --workers) is needed to resolve the slope.")
