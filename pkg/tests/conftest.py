from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from wfspline.meshgen import source_mesh, target_mesh

REF_TET = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])


def exact_bform_value(coeffs, lam, indices) -> float:
    """Direct Bernstein summation in exact rational arithmetic, rounded once."""
    lam = [Fraction(float(v)) for v in lam]
    total = Fraction(0)
    for c, mi in zip(coeffs, indices):
        term = Fraction(float(c)) * factorial(sum(mi))
        for a, x in zip(mi, lam):
            term *= x**a / factorial(a)
        total += term
    return float(total)


def cubic(C):
    """A random full cubic f and its gradient; ``C`` holds 20 coefficients."""
    from wfspline.fields import polynomial_field

    exps = [(a, b, c) for a in range(4) for b in range(4 - a) for c in range(4 - a - b)]
    return polynomial_field(dict(zip(exps, C)), name="cubic")


@pytest.fixture(scope="session")
def grids():
    """Source/target pairs of levels 1-2 (generated with the CLI's default seeds)."""
    return {L: (source_mesh(L), target_mesh(L)) for L in (1, 2)}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
