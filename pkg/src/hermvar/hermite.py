"""Probabilists' Hermite polynomials.

``H_0 = 1``, ``H_1 = x``, ``H_{q+1}(x) = x H_q(x) - q H_{q-1}(x)``; orthogonal
under the standard Gaussian measure with ``E[H_p H_q] = q! [p == q]``.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numpy.polynomial import hermite_e

from .errors import ConfigError

__all__ = [
    "MAX_ORDER",
    "hermite_eval",
    "hermite_table",
    "hermite_coefficients",
    "ProductCheck",
    "hermite_product_check",
    "gauss_hermite_inner",
    "gaussian_expectation",
]

MAX_ORDER = 64


def _check_order(q, limit: int = MAX_ORDER) -> int:
    if int(q) != q or q < 0 or q > limit:
        raise ConfigError(f"Hermite order must be an integer in [0, {limit}], got {q!r}")
    return int(q)


def hermite_table(q: int, x) -> np.ndarray:
    """Stack ``[H_0(x), ..., H_q(x)]`` along a new leading axis."""
    q = _check_order(q)
    x = np.asarray(x, dtype=float)
    out = np.empty((q + 1,) + x.shape)
    out[0] = 1.0
    if q >= 1:
        out[1] = x
    for m in range(1, q):
        out[m + 1] = x * out[m] - m * out[m - 1]
    return out


def hermite_eval(q: int, x):
    """``H_q(x)`` by forward recurrence."""
    q = _check_order(q)
    x_arr = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x_arr), x_arr.copy()
    if q == 0:
        cur = prev
    for m in range(1, q):
        prev, cur = cur, x_arr * cur - m * prev
    return float(cur) if cur.ndim == 0 else cur


def hermite_coefficients(q: int) -> list[int]:
    """Exact integer monomial coefficients of ``H_q``, lowest degree first.

    ``H_q(x) = sum_m (-1)^m q! / (m! 2^m (q-2m)!) x^{q-2m}``.
    """
    q = _check_order(q)
    coeffs = [0] * (q + 1)
    for m in range(q // 2 + 1):
        c = math.factorial(q) // (math.factorial(m) * 2**m * math.factorial(q - 2 * m))
        coeffs[q - 2 * m] = (-1) ** m * c
    return coeffs


class ProductCheck(NamedTuple):
    lhs: float
    rhs: float


def hermite_product_check(p: int, q: int, x: float) -> ProductCheck:
    """Both sides of ``H_p H_q = sum_r r! C(p,r) C(q,r) H_{p+q-2r}``.

    This is the product formula for multiple Wiener integrals restricted to
    a single unit-norm kernel, where ``I_m(h^{(x)m}) = H_m(B(h))``.
    """
    p = _check_order(p)
    q = _check_order(q)
    if p + q > MAX_ORDER:
        raise ConfigError(f"p + q must not exceed {MAX_ORDER}")
    table = hermite_table(p + q, x)
    lhs = float(table[p] * table[q])
    rhs = 0.0
    for r in range(min(p, q) + 1):
        rhs += math.factorial(r) * math.comb(p, r) * math.comb(q, r) * float(table[p + q - 2 * r])
    return ProductCheck(lhs, rhs)


def gaussian_expectation(func, nodes: int = 64, variance: float = 1.0) -> float:
    """``E[func(sqrt(variance) Z)]`` for standard normal Z by Gauss-Hermite quadrature."""
    z, w = hermite_e.hermegauss(nodes)
    w = w / math.sqrt(2.0 * math.pi)
    return float(np.dot(w, func(math.sqrt(variance) * z)))


def gauss_hermite_inner(p: int, q: int) -> float:
    """``E[H_p(Z) H_q(Z)]``, exact up to rounding for ``p + q <= 40``."""
    p = _check_order(p, 40)
    q = _check_order(q, 40)
    if p + q > 40:
        raise ConfigError("quadrature exactness budget is p + q <= 40")
    # m nodes integrate degree 2m-1 exactly
    nodes = (p + q) // 2 + 1
    return gaussian_expectation(lambda z: hermite_eval(p, z) * hermite_eval(q, z), nodes)
