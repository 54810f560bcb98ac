import numpy as np
import pytest

import membrane as mb


@pytest.fixture
def grid4():
    return mb.generate_structured(mb.StructuredSpec(1.0, 1.0, 4, 4))


@pytest.fixture
def steel():
    return mb.MaterialParams(d=mb.isotropic(200e9, 0.3), rho=7800.0, h=1e-3)


@pytest.fixture
def polymer():
    return mb.MaterialParams(d=mb.isotropic(2.0e9, 0.3), rho=1200.0, h=1e-3)


def orthotropic_gpa():
    """A positive-definite orthotropic stiffness matrix, entries in Pa.

    The pattern has c13 != c23 and c55 != c66, so it shares no mirror
    plane with a diagonally split grid.
    """
    c = np.zeros((6, 6))
    c[0, 0] = c[1, 1] = c[2, 2] = 150.0
    c[0, 1] = c[1, 0] = 40.0
    c[0, 2] = c[2, 0] = 10.0
    c[1, 2] = c[2, 1] = 80.0
    c[3, 3] = 80.0
    c[4, 4] = 20.0
    c[5, 5] = 30.0
    return c * 1e9


@pytest.fixture
def orthotropic():
    return mb.MaterialParams(d=orthotropic_gpa(), rho=7800.0, h=1e-3)


def random_triangle(rng, span=10.0, min_doubled_area=1e-6):
    """One random non-degenerate CCW triangle."""
    while True:
        coords = rng.uniform(-span, span, size=(3, 2))
        x, y = coords[:, 0], coords[:, 1]
        se = x[0] * (y[1] - y[2]) + x[1] * (y[2] - y[0]) + x[2] * (y[0] - y[1])
        if se > min_doubled_area:
            return coords
