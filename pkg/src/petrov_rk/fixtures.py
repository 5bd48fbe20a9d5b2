"""Known trial/test bases used as certification fixtures.

Coefficients are ascending in powers of t.  The two-stage solutions are given
for the rk2-alpha family as functions of alpha; the complex three-stage pair
uses floating sqrt(66).
"""
from __future__ import annotations

from fractions import Fraction as Fr

import numpy as np

from .basis import BasisPair
from .butcher import registry_get, rk2_alpha

__all__ = ["FIXTURES", "rk2_solution_1", "rk2_solution_2", "rk3_complex_z"]


def rk2_solution_1(alpha) -> BasisPair:
    """Linear trial functions, quadratic second test function."""
    a = Fr(alpha)
    C = [[1, -1 / a, 0], [0, 1 / a, 0]]
    D = [[1, 0, 0], [6 * a, -18 * a, 12 * a]]
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), rk2_alpha(a))


def rk2_solution_2(alpha) -> BasisPair:
    """Quadratic trial functions, linear second test function."""
    a = Fr(alpha)
    C = [[1, 3 / a, -6 / a], [0, -3 / a, 6 / a]]
    D = [[1, 0, 0], [2 * a, -2 * a, 0]]
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), rk2_alpha(a))


def rk3_real_1() -> BasisPair:
    C = [[1, -2, Fr(1, 2), 0], [0, 2, -1, 0], [0, 0, Fr(1, 2), 0]]
    D = [[1, 0, 0, 0], [6, -36, 60, -30], [-48, 408, -780, 420]]
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), registry_get("rk3-classic"))


def rk3_real_2() -> BasisPair:
    C = [[1, 30, -130, 110], [0, -32, 140, -120], [0, 2, -10, 10]]
    D = [[1, 0, 0, 0], [Fr(3, 2), -3, Fr(3, 2), 0], [0, 6, -6, 0]]
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), registry_get("rk3-classic"))


def rk3_complex_z() -> list[complex]:
    """The ten auxiliary complex numbers, index 0 unused."""
    r = 1j * np.sqrt(66.0)
    pairs = [(9, -1), (11, -2), (12, 1), (5, 1), (2, -1), (34, 3), (16, 1), (30, 1), (89, 6), (39, 2)]
    return [0j] + [(p + q * r) / 7 for p, q in pairs]


def rk3_complex(conjugate: bool = False) -> BasisPair:
    z = rk3_complex_z()
    zb1 = np.conj(z[1])
    C = [
        [1, -z[3], -2 * z[2], 10 / 3 * z[1]],
        [0, 2 * z[4], 4 * z[2], -20 / 3 * z[1]],
        [0, z[5], -2 * z[2], 10 / 3 * z[1]],
    ]
    D = [
        [1, 0, 0, 0],
        [z[8], -9 * z[7], 6 * z[6], -10 * zb1],
        [-2 * z[10], 6 * z[9], -24 * z[6], 40 * zb1],
    ]
    pair = BasisPair(np.array(C, dtype=complex), np.array(D, dtype=complex),
                     registry_get("rk3-classic"), "complex")
    return pair.conjugate() if conjugate else pair


def rk4_1() -> BasisPair:
    C = [
        [1, -2, 0, Fr(2, 3), 0],
        [0, 2, -2, 0, 0],
        [0, 0, 2, Fr(-4, 3), 0],
        [0, 0, 0, Fr(2, 3), 0],
    ]
    D = [
        [1, 0, 0, 0, 0],
        [10, -100, 300, -350, 140],
        [-35, 500, -1725, 2170, -910],
        [140, -2150, 7890, -10360, 4480],
    ]
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), registry_get("rk4-classic"))


def rk4_2() -> BasisPair:
    C = [
        [1, Fr(320, 3), -810, 1610, Fr(-2800, 3)],
        [0, Fr(-470, 3), 1230, -2520, Fr(4480, 3)],
        [0, Fr(160, 3), -450, 980, Fr(-1820, 3)],
        [0, Fr(-10, 3), 30, -70, Fr(140, 3)],
    ]
    D = [
        [1, 0, 0, 0, 0],
        [2, -6, 6, -2, 0],
        [1, 0, -3, 2, 0],
        [0, 6, -6, 0, 0],
    ]
    return BasisPair(np.array(C, dtype=object), np.array(D, dtype=object), registry_get("rk4-classic"))


FIXTURES = {
    "rk2-alpha=1/solution-1": lambda: rk2_solution_1(1),
    "rk2-alpha=1/solution-2": lambda: rk2_solution_2(1),
    "rk2-alpha=1/2/solution-1": lambda: rk2_solution_1(Fr(1, 2)),
    "rk2-alpha=1/2/solution-2": lambda: rk2_solution_2(Fr(1, 2)),
    "rk3/real-1": rk3_real_1,
    "rk3/real-2": rk3_real_2,
    "rk3/complex-3": lambda: rk3_complex(False),
    "rk3/complex-4": lambda: rk3_complex(True),
    "rk4/solution-1": rk4_1,
    "rk4/solution-2": rk4_2,
}
