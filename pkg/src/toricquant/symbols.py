"""Toeplitz symbols as functions of the moment coordinate.

A symbol is xi(x, s) + amp * (4 x (1 - x))^(m/2) * cos(m theta). The radial part
receives both the moment coordinate x of the weight's reference potential and
the log coordinate s, because derivative-of-norm symbols depend on s through
several potentials at once. The angular factor vanishes at the poles so the
symbol stays continuous on CP^1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ConfigError


@dataclass(frozen=True)
class Symbol:
    radial: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "symbol"
    angular_amp: float = 0.0
    angular_m: int = 0

    @property
    def invariant(self):
        return self.angular_amp == 0.0 or self.angular_m == 0

    def values(self, x, s, theta=None):
        r = np.broadcast_to(np.asarray(self.radial(x, s), dtype=float), np.shape(x))
        if theta is None or self.invariant:
            return r if theta is None else r[:, None] + 0.0 * theta[None, :]
        env = (4.0 * x * (1.0 - x)) ** (0.5 * self.angular_m)
        return r[:, None] + self.angular_amp * env[:, None] * np.cos(self.angular_m * theta)[None, :]

    def __add__(self, other):
        if not self.invariant and not other.invariant:
            raise ValueError("at most one summand may carry an angular part")
        ang = self if not self.invariant else other
        return Symbol(lambda x, s: self.radial(x, s) + other.radial(x, s),
                      name=f"{self.name}+{other.name}",
                      angular_amp=ang.angular_amp, angular_m=ang.angular_m)

    def __mul__(self, other):
        if not (self.invariant and other.invariant):
            raise ValueError("products are only supported for invariant symbols")
        return Symbol(lambda x, s: self.radial(x, s) * other.radial(x, s),
                      name=f"{self.name}*{other.name}")

    def scaled(self, c):
        return Symbol(lambda x, s: c * self.radial(x, s), name=f"{c:g}*{self.name}",
                      angular_amp=c * self.angular_amp, angular_m=self.angular_m)

    def sup_norm(self, n=20001):
        x = np.linspace(0.0, 1.0, n)
        s = np.zeros_like(x)
        return float(np.max(np.abs(self.radial(x, s)))) + abs(self.angular_amp)


def from_x(fn, name):
    return Symbol(lambda x, s: fn(x), name=name)


def constant(c):
    return Symbol(lambda x, s: np.full(np.shape(x), float(c)), name=f"const({c:g})")


def polynomial(coeffs):
    p = Polynomial(coeffs)
    return Symbol(lambda x, s: p(x), name=f"poly{list(coeffs)}")


NAMED = {
    "one": lambda: constant(1.0),
    "x": lambda: from_x(lambda x: x, "x"),
    "x2": lambda: from_x(lambda x: x**2, "x2"),
    "x3": lambda: from_x(lambda x: x**3, "x3"),
    "sin_pi_x": lambda: from_x(lambda x: np.sin(np.pi * x), "sin_pi_x"),
    "sin_2pi_x": lambda: from_x(lambda x: np.sin(2 * np.pi * x), "sin_2pi_x"),
    "abs_x_half": lambda: from_x(lambda x: np.abs(x - 0.5), "abs_x_half"),
}


def parse(desc) -> Symbol:
    """Build a symbol from a config descriptor: a registry name or {"poly": [...]}."""
    if isinstance(desc, str):
        if desc not in NAMED:
            raise ConfigError(f"unknown symbol {desc!r}; known: {sorted(NAMED)}")
        return NAMED[desc]()
    if isinstance(desc, dict) and "poly" in desc:
        sym = polynomial(desc["poly"])
        if "angular" in desc:
            amp, m = desc["angular"]
            sym = Symbol(sym.radial, sym.name, float(amp), int(m))
        return sym
    raise ConfigError(f"cannot parse symbol descriptor {desc!r}")
