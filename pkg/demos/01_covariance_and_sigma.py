"""Covariance structure of fractional Gaussian noise and the limit variance.

Run: python demos/01_covariance_and_sigma.py
"""
import numpy as np

from hermvar import alpha_diag, rho, sigma_sq

print("Autocovariance rho_H(k) of unit-step fractional Gaussian noise")
ks = np.array([0, 1, 2, 10, 100, 10**6])
for H in (0.3, 0.5, 0.7):
    print(f"  H={H}: " + "  ".join(f"{v: .3e}" for v in rho(H, ks)))
print("  For H > 1/2 the correlations decay like k^(2H-2) and are positive;")
print("  for H < 1/2 they are negative; H = 1/2 is white noise.\n")

print("Diagonal overlaps alpha(k, k/n) for n = 8 (zero exactly at H = 1/2)")
for H in (0.3, 0.5, 0.7):
    print(f"  H={H}: {np.array2string(alpha_diag(H, 8), precision=4)}")
print()

print("Limit variance sigma^2_{H,q} = q! sum_k rho(k)^q, with a certified tail bound")
for q, H in ((2, 0.3), (2, 0.6), (3, 0.7), (4, 0.8)):
    s = sigma_sq(H, q)
    print(f"  q={q} H={H}: {s.value:.12f}  (K={s.truncation_K}, tail <= {s.tail_bound:.1e})")
print("  The series diverges once H >= 1 - 1/(2q); sigma_sq then raises ParameterRangeError.")
