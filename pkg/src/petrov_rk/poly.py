"""Polynomials on the master element [0, 1].

Coefficients are stored in ascending order of powers, ``coeffs[i]`` being the
coefficient of ``t**i``.  Three arithmetic modes are supported:

``"rational"``
    exact :class:`fractions.Fraction` arithmetic (the default for certification)
``"real"``
    64-bit floats
``"complex"``
    64-bit complex numbers

Plain Python integers are accepted in every mode and converted on entry.
Mixing a ``Fraction`` with a float, or a float with a complex number, raises
:class:`ModeError`.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Integral
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MODES",
    "ModeError",
    "Polynomial",
    "convert_scalar",
    "derivative",
    "eval",
    "evaluate",
    "infer_mode",
    "integrate_product",
    "matrix_A",
    "matrix_F",
]

MODES = ("rational", "real", "complex")


class ModeError(TypeError):
    """Raised when scalars of different arithmetic modes are combined."""


def _scalar_mode(x) -> str | None:
    # None means "fits any mode" (plain integers)
    if isinstance(x, bool):
        raise ModeError("booleans are not polynomial scalars")
    if isinstance(x, Integral):
        return None
    if isinstance(x, Fraction):
        return "rational"
    if isinstance(x, (float, np.floating)):
        return "real"
    if isinstance(x, (complex, np.complexfloating)):
        return "complex"
    raise ModeError(f"unsupported scalar type {type(x).__name__}")


def infer_mode(values: Iterable, default: str = "rational") -> str:
    """Return the common arithmetic mode of `values`.

    Raises
    ------
    ModeError
        If the values mix modes.
    """
    mode = None
    for v in values:
        m = _scalar_mode(v)
        if m is None:
            continue
        if mode is None:
            mode = m
        elif m != mode:
            raise ModeError(f"cannot mix {mode} and {m} scalars")
    return default if mode is None else mode


def convert_scalar(x, mode: str):
    """Convert `x` to `mode`, allowing only integer promotion."""
    m = _scalar_mode(x)
    if m is not None and m != mode:
        raise ModeError(f"{m} scalar used in {mode} computation")
    if mode == "rational":
        return Fraction(x)
    if mode == "real":
        return float(x)
    if mode == "complex":
        return complex(x)
    raise ValueError(f"unknown mode {mode!r}")


def _zero(mode: str):
    return convert_scalar(0, mode)


class Polynomial:
    """Univariate polynomial with coefficients in a fixed arithmetic mode.

    Parameters
    ----------
    coeffs : sequence
        Ascending coefficients.  Trailing zeros are dropped; the zero
        polynomial is stored as a single zero coefficient.
    mode : {"rational", "real", "complex"}, optional
        Arithmetic mode.  Inferred from the coefficients when omitted
        (integers alone give ``"rational"``).
    """

    __slots__ = ("coeffs", "mode")

    def __init__(self, coeffs: Sequence, mode: str | None = None):
        coeffs = list(coeffs)
        if mode is None:
            mode = infer_mode(coeffs)
        elif mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        c = [convert_scalar(v, mode) for v in coeffs] or [_zero(mode)]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        self.coeffs = tuple(c)
        self.mode = mode

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def __call__(self, t):
        return evaluate(self, t)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.mode == other.mode and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.mode, self.coeffs))

    def _check(self, other: "Polynomial"):
        if self.mode != other.mode:
            raise ModeError(f"cannot combine {self.mode} and {other.mode} polynomials")

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other], self.mode)
        self._check(other)
        n = max(len(self.coeffs), len(other.coeffs))
        z = _zero(self.mode)
        a = self.coeffs + (z,) * (n - len(self.coeffs))
        b = other.coeffs + (z,) * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)], self.mode)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs], self.mode)

    def __sub__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other], self.mode)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            other = Polynomial([other], self.mode)
        self._check(other)
        out = [_zero(self.mode)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out, self.mode)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"Polynomial({list(self.coeffs)!r}, mode={self.mode!r})"

    def __str__(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if c == 0 and self.degree > 0:
                continue
            mono = "" if i == 0 else ("t" if i == 1 else f"t^{i}")
            terms.append(f"({c})" + (f"*{mono}" if mono else ""))
        return " + ".join(terms) if terms else "0"


def evaluate(p: Polynomial, t):
    """Evaluate `p` at `t` by Horner's rule.

    Examples
    --------
    >>> evaluate(Polynomial([6, -18, 12]), 1)
    Fraction(0, 1)
    """
    t = convert_scalar(t, p.mode)
    acc = _zero(p.mode)
    for c in reversed(p.coeffs):
        acc = acc * t + c
    return acc


# short alias kept for callers that use the name ``eval``
eval = evaluate  # noqa: A001


def derivative(p: Polynomial) -> Polynomial:
    """Formal derivative; constants map to the zero polynomial."""
    if p.degree == 0:
        return Polynomial([0], p.mode)
    return Polynomial([i * c for i, c in enumerate(p.coeffs) if i > 0], p.mode)


def integrate_product(p: Polynomial, q: Polynomial):
    """Exact value of the integral of ``p*q`` over [0, 1]."""
    p._check(q)
    total = _zero(p.mode)
    for i, a in enumerate(p.coeffs):
        for j, b in enumerate(q.coeffs):
            if p.mode == "rational":
                total += a * b / (i + j + 1)
            else:
                total += a * b / float(i + j + 1)
    return total


def _fill(n: int, entry, mode: str) -> np.ndarray:
    if n < 0:
        raise ValueError("size parameter must be non-negative")
    if mode == "rational":
        out = np.empty((n + 1, n + 1), dtype=object)
        for m in range(n + 1):
            for k in range(n + 1):
                out[m, k] = entry(m, k)
        return out
    dtype = float if mode == "real" else complex
    out = np.zeros((n + 1, n + 1), dtype=dtype)
    for m in range(n + 1):
        for k in range(n + 1):
            out[m, k] = float(entry(m, k))
    return out


def matrix_A(s: int, mode: str = "rational") -> np.ndarray:
    """Derivative moment matrix, ``A[m, n] = n/(m+n)`` with zero first column.

    Entry ``(m, n)`` is the integral of ``t**m * d/dt t**n`` over [0, 1].
    The result has shape ``(s+1, s+1)``.  Rational mode returns an object
    array of ``Fraction``.
    """
    return _fill(s, lambda m, n: Fraction(0) if n == 0 else Fraction(n, m + n), mode)


def matrix_F(s: int, mode: str = "rational") -> np.ndarray:
    """Mass moment (Hilbert) matrix, ``F[m, n] = 1/(m+n+1)``."""
    return _fill(s, lambda m, n: Fraction(1, m + n + 1), mode)
