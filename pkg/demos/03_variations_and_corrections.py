"""Weighted Hermite variation F_n, its Skorohod counterpart G_n and the corrections.

F_n - G_n equals the sum of the correction terms K_{n,r}, r = 1..q.  The
corrections vanish at H = 1/2, and E[K_{n,1}^2] for q = 3, f(x) = x is known
in closed form, which exposes a phase transition in its decay rate.

Run: python demos/03_variations_and_corrections.py
"""
from hermvar import derive_seed, fit_exponent, generate, weight
from hermvar.seeds import PATH_TAG
from hermvar.variations import path_statistics, residual_exponent, residual_second_moment_exact

f = weight("cos")
for H in (0.5, 0.7):
    p = generate(H, 1024, derive_seed(11, PATH_TAG, 0))
    rec = path_statistics(p, f, q=2)
    ks = rec["K_1"] + rec["K_2"]
    print(f"H={H}: F_n={rec['F_n']: .6f}  G_n={rec['G_n']: .6f}  "
          f"sum K_r={ks: .6f}  F-G={rec['F_n'] - rec['G_n']: .6f}")
print()

print("Exact E[K_{n,1}^2], q=3, f(x)=x: fitted decay against max(2H-2, 6H-5)")
grid = [2**k for k in range(10, 17)]
for H in (0.6, 0.75, 0.85):
    vals = [residual_second_moment_exact(H, n) for n in grid]
    fit = fit_exponent(zip(grid, vals))
    print(f"  H={H}: fitted {fit.slope: .4f}, last-two-point {fit.tail_slope: .4f}, "
          f"predicted {residual_exponent(H): .4f}")
print("  Below H = 3/4 the decay is n^(2H-2); above it n^(6H-5).  Close to the")
print("  kink the approach to the asymptotic exponent is slow.")
