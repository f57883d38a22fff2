"""Analytic test fields on the unit cube."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["AnalyticField", "u1", "u2", "polynomial_field", "constant_field", "get_field", "FIELDS"]


@dataclass(frozen=True)
class AnalyticField:
    name: str
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]

    def __call__(self, pts) -> np.ndarray:
        return self.value(np.atleast_2d(np.asarray(pts, dtype=float)))

    def grad(self, pts) -> np.ndarray:
        return self.gradient(np.atleast_2d(np.asarray(pts, dtype=float)))


def _u1(X):
    r2 = ((X - 0.5) ** 2).sum(axis=1)
    return np.exp(-30.0 * r2)


def _u1_grad(X):
    return -60.0 * (X - 0.5) * _u1(X)[:, None]


def _u2_arg(X):
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    return 20.0 * ((x - 0.5) + 0.3 * np.sin(-10.0 * (y - 0.5)) - 0.3 * np.sin(-5.0 * (z - 0.6)))


def _u2(X):
    return np.tanh(_u2_arg(X))


def _u2_grad(X):
    y, z = X[:, 1], X[:, 2]
    s = 1.0 - np.tanh(_u2_arg(X)) ** 2
    dx = 20.0 * np.ones_like(y)
    dy = 20.0 * 0.3 * (-10.0) * np.cos(-10.0 * (y - 0.5))
    dz = -20.0 * 0.3 * (-5.0) * np.cos(-5.0 * (z - 0.6))
    return s[:, None] * np.stack([dx, dy, dz], axis=1)


#: Gaussian bump centred in the cube
u1 = AnalyticField("u1", _u1, _u1_grad)
#: steep tanh front with a wavy level set
u2 = AnalyticField("u2", _u2, _u2_grad)


def polynomial_field(terms: dict, name: str = "poly") -> AnalyticField:
    """Polynomial sum c * x**a * y**b * z**c from ``{(a, b, c): coeff}``."""
    items = [(np.array(k, dtype=int), float(v)) for k, v in terms.items()]

    def value(X):
        out = np.zeros(len(X))
        for e, c in items:
            out += c * np.prod(X**e, axis=1)
        return out

    def gradient(X):
        out = np.zeros((len(X), 3))
        for e, c in items:
            for d in range(3):
                if e[d] == 0:
                    continue
                ee = e.copy()
                ee[d] -= 1
                out[:, d] += c * e[d] * np.prod(X**ee, axis=1)
        return out

    return AnalyticField(name, value, gradient)


def constant_field(value: float) -> AnalyticField:
    return AnalyticField("const", lambda X: np.full(len(X), float(value)), lambda X: np.zeros((len(X), 3)))


FIELDS = {"u1": u1, "u2": u2}


def get_field(name: str) -> AnalyticField:
    try:
        return FIELDS[name]
    except KeyError:
        raise ValueError(f"unknown field {name!r}; choose from {sorted(FIELDS)}") from None
