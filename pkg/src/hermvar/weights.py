"""Smooth weight functions f with analytic derivative families.

A :class:`WeightFunction` carries ``f, f', ..., f^{(max_order)}`` as exact
callables.  Construction runs a forward-difference consistency check so a
mistyped derivative is caught before it reaches a rate measurement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, MissingDerivativeError

__all__ = ["WeightFunction", "weight", "CATALOG", "DEFAULT_ORDER"]

DEFAULT_ORDER = 16
GROWTH_KINDS = ("polynomial", "sub-gaussian-moderate")
_CHECK_GRID = np.linspace(-3.0, 3.0, 25)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    derivatives: tuple[Callable[[np.ndarray], np.ndarray], ...]
    growth: str = "polynomial"
    label: str = "f"
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not self.derivatives:
            raise ConfigError("a weight function needs at least f itself")
        if self.growth not in GROWTH_KINDS:
            raise ConfigError(f"growth must be one of {GROWTH_KINDS}")
        object.__setattr__(self, "derivatives", tuple(self.derivatives))
        if self.check:
            self.check_derivatives()

    @property
    def max_order(self) -> int:
        return len(self.derivatives) - 1

    def derivative(self, r: int) -> Callable[[np.ndarray], np.ndarray]:
        if r < 0 or r > self.max_order:
            raise MissingDerivativeError(
                f"weight {self.label!r} supplies derivatives up to order {self.max_order}, "
                f"order {r} requested"
            )
        return self.derivatives[r]

    def __call__(self, x):
        return self.derivatives[0](np.asarray(x, dtype=float))

    def check_derivatives(self, h: float = 1e-6, rtol: float = 1e-3) -> None:
        """Compare ``(f^{(i)}(x+h) - f^{(i)}(x))/h`` with ``f^{(i+1)}(x)`` on a grid.

        The tolerance is relative to the sup of ``|f^{(i+1)}|`` over the grid:
        near a zero of ``f^{(i+1)}`` the O(h) truncation error of the forward
        difference would otherwise dominate a pointwise relative test.
        """
        x = _CHECK_GRID
        for i in range(self.max_order):
            lo = np.asarray(self.derivatives[i](x), dtype=float)
            hi = np.asarray(self.derivatives[i](x + h), dtype=float)
            fd = (hi - lo) / h
            exact = np.broadcast_to(np.asarray(self.derivatives[i + 1](x), dtype=float), x.shape)
            scale = 1.0 + np.abs(exact).max() + np.abs(lo) * h
            if np.any(np.abs(fd - exact) > rtol * scale):
                raise ConfigError(
                    f"weight {self.label!r}: derivative of order {i + 1} inconsistent "
                    f"with finite differences of order {i}"
                )


def _const(c: float):
    return lambda x: np.full(np.shape(x), c, dtype=float)


def _polynomial(coeffs: Sequence[float], order: int, label: str) -> WeightFunction:
    poly = np.polynomial.Polynomial(coeffs)
    derivs = []
    for _ in range(order + 1):
        p = poly
        derivs.append(lambda x, p=p: p(np.asarray(x, dtype=float)) + np.zeros(np.shape(x)))
        poly = poly.deriv()
    return WeightFunction(tuple(derivs), "polynomial", label)


def _cosine(order: int) -> WeightFunction:
    derivs = tuple(
        (lambda x, r=r: np.cos(np.asarray(x, dtype=float) + r * math.pi / 2)) for r in range(order + 1)
    )
    return WeightFunction(derivs, "polynomial", "cos")


def _lorentzian(order: int) -> WeightFunction:
    # 1/(1+x^2) = Im 1/(x-i), so f^{(r)}(x) = (-1)^r r! Im (x-i)^{-(r+1)}
    def make(r):
        c = (-1) ** r * math.factorial(r)
        return lambda x: c * np.imag((np.asarray(x, dtype=float) - 1j) ** (-(r + 1)))

    return WeightFunction(tuple(make(r) for r in range(order + 1)), "polynomial", "lorentzian")


def weight(name: str, order: int = DEFAULT_ORDER) -> WeightFunction:
    """Catalog weight by name: ``zero``, ``one``, ``x``, ``x2``, ``cos``, ``lorentzian``."""
    if name == "zero":
        return WeightFunction(tuple(_const(0.0) for _ in range(order + 1)), label="zero")
    if name == "one":
        return WeightFunction((_const(1.0),) + tuple(_const(0.0) for _ in range(order)), label="one")
    if name == "x":
        return _polynomial([0.0, 1.0], order, "x")
    if name == "x2":
        return _polynomial([0.0, 0.0, 1.0], order, "x2")
    if name == "cos":
        return _cosine(order)
    if name == "lorentzian":
        return _lorentzian(order)
    raise ConfigError(f"unknown weight {name!r}; known: {', '.join(CATALOG)}")


CATALOG = ("zero", "one", "x", "x2", "cos", "lorentzian")
