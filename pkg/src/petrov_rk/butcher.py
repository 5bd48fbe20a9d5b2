"""Explicit Runge-Kutta Butcher tableaus.

A tableau holds exact rational coefficients ``a`` (strictly lower
triangular), ``b`` and ``c``.  The registry covers the methods used in the
verification suite; user tableaus can be read from a small ``key = value``
text format::

    s = 3
    a = 1/2, -1, 2
    b = 1/6, 2/3, 1/6
    c = 0, 1/2, 1

``a`` lists the strict lower triangle row by row (``a21, a31, a32, ...``).
"""
from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ButcherTableau",
    "REGISTRY_NAMES",
    "dump_tableau",
    "from_G",
    "load_tableau",
    "matrix_G",
    "parse_fraction",
    "parse_tableau",
    "registry_get",
    "rk2_alpha",
]


def parse_fraction(text: str) -> Fraction:
    """Parse ``"p/q"``, an integer or a decimal literal into a Fraction."""
    return Fraction(text.strip())


@dataclass(frozen=True)
class ButcherTableau:
    """Explicit Runge-Kutta tableau with exact coefficients.

    Parameters
    ----------
    a : tuple of tuple of Fraction
        ``s x s`` stage matrix; must satisfy ``a[i][j] == 0`` for ``j >= i``.
    b : tuple of Fraction
        Weights.
    c : tuple of Fraction
        Stage abscissae, used only to sample the source term.
    name : str
    """

    a: tuple
    b: tuple
    c: tuple
    name: str = "custom"

    def __post_init__(self):
        s = len(self.b)
        if s < 1:
            raise ValueError("a tableau needs at least one stage")
        if len(self.a) != s or any(len(row) != s for row in self.a) or len(self.c) != s:
            raise ValueError("inconsistent tableau dimensions")
        for i in range(s):
            for j in range(i, s):
                if self.a[i][j] != 0:
                    raise ValueError(f"tableau is not explicit: a[{i + 1}][{j + 1}] = {self.a[i][j]}")

    @classmethod
    def from_lists(cls, a, b, c, name: str = "custom", check: bool = True) -> "ButcherTableau":
        """Build a tableau from nested sequences, converting to Fraction.

        With ``check=True`` consistency problems (weights not summing to one,
        ``c`` not the row sums of ``a``) are reported as warnings.
        """
        tab = cls(
            a=tuple(tuple(Fraction(v) for v in row) for row in a),
            b=tuple(Fraction(v) for v in b),
            c=tuple(Fraction(v) for v in c),
            name=name,
        )
        if check:
            for msg in tab.consistency_issues():
                warnings.warn(f"{name}: {msg}", stacklevel=2)
        return tab

    @property
    def s(self) -> int:
        return len(self.b)

    def consistency_issues(self) -> list[str]:
        issues = []
        if sum(self.b) != 1:
            issues.append(f"weights sum to {sum(self.b)}, not 1")
        for i, row in enumerate(self.a):
            if sum(row) != self.c[i]:
                issues.append(f"c[{i + 1}] = {self.c[i]} differs from the row sum {sum(row)}")
        return issues

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Floating copies ``(a, b, c)``."""
        a = np.array([[float(v) for v in row] for row in self.a])
        return a, np.array([float(v) for v in self.b]), np.array([float(v) for v in self.c])


def rk2_alpha(alpha) -> ButcherTableau:
    """Two-stage second-order family with ``a21 = alpha``."""
    alpha = Fraction(alpha)
    if alpha == 0:
        raise ValueError("rk2-alpha requires alpha != 0")
    b2 = 1 / (2 * alpha)
    return ButcherTableau.from_lists(
        [[0, 0], [alpha, 0]], [1 - b2, b2], [0, alpha], name=f"rk2-alpha({alpha})"
    )


def _forward_euler():
    return ButcherTableau.from_lists([[0]], [1], [0], name="forward-euler")


def _rk3():
    h = Fraction(1, 2)
    return ButcherTableau.from_lists(
        [[0, 0, 0], [h, 0, 0], [-1, 2, 0]],
        [Fraction(1, 6), Fraction(2, 3), Fraction(1, 6)],
        [0, h, 1],
        name="rk3-classic",
    )


def _rk4():
    h = Fraction(1, 2)
    return ButcherTableau.from_lists(
        [[0, 0, 0, 0], [h, 0, 0, 0], [0, h, 0, 0], [0, 0, 1, 0]],
        [Fraction(1, 6), Fraction(1, 3), Fraction(1, 3), Fraction(1, 6)],
        [0, h, h, 1],
        name="rk4-classic",
    )


def _named(fn, name):
    def build():
        tab = fn()
        return ButcherTableau(tab.a, tab.b, tab.c, name)
    return build


_BUILDERS = {
    "forward-euler": _forward_euler,
    "explicit-trapezoidal": _named(lambda: rk2_alpha(1), "explicit-trapezoidal"),
    "explicit-midpoint": _named(lambda: rk2_alpha(Fraction(1, 2)), "explicit-midpoint"),
    "rk3-classic": _rk3,
    "rk4-classic": _rk4,
}

REGISTRY_NAMES = ("forward-euler", "rk2-alpha", "explicit-trapezoidal", "explicit-midpoint",
                  "rk3-classic", "rk4-classic")

_ALPHA_RE = re.compile(r"^rk2-alpha\((?P<alpha>[^)]+)\)$")


def registry_get(name: str, alpha=None) -> ButcherTableau:
    """Look up a registry tableau.

    Parameters
    ----------
    name : str
        One of :data:`REGISTRY_NAMES`.  The parametrised family may also be
        written inline, e.g. ``"rk2-alpha(1/2)"``.
    alpha : rational-like, optional
        Parameter of ``rk2-alpha``.

    Raises
    ------
    KeyError
        Unknown name.
    ValueError
        ``rk2-alpha`` without a parameter or with ``alpha = 0``.
    """
    m = _ALPHA_RE.match(name)
    if m:
        return rk2_alpha(parse_fraction(m.group("alpha")))
    if name == "rk2-alpha":
        if alpha is None:
            raise ValueError("rk2-alpha needs an alpha value")
        return rk2_alpha(alpha)
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown tableau {name!r}; known: {', '.join(REGISTRY_NAMES)}") from None


def matrix_G(tab: ButcherTableau) -> np.ndarray:
    """Right-hand side of the integral block: row 0 is ``b``, rows 1.. are ``a``."""
    s = tab.s
    G = np.empty((s, s), dtype=object)
    G[0, :] = tab.b
    for i in range(1, s):
        G[i, :] = tab.a[i]
    return G


def _split(value: str) -> list[str]:
    return [v for v in re.split(r"[,\s;]+", value.strip()) if v]


def parse_tableau(text: str, name: str = "custom") -> ButcherTableau:
    """Parse the ``key = value`` tableau format."""
    fields = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"malformed tableau line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        fields[key.lower()] = value
    missing = {"s", "a", "b", "c"} - set(fields)
    if missing:
        raise ValueError(f"tableau file misses keys: {', '.join(sorted(missing))}")
    s = int(fields["s"])
    lower = [parse_fraction(v) for v in _split(fields["a"])]
    if len(lower) != s * (s - 1) // 2:
        raise ValueError(f"expected {s * (s - 1) // 2} entries in a, got {len(lower)}")
    a = [[Fraction(0)] * s for _ in range(s)]
    it = iter(lower)
    for i in range(1, s):
        for j in range(i):
            a[i][j] = next(it)
    b = [parse_fraction(v) for v in _split(fields["b"])]
    c = [parse_fraction(v) for v in _split(fields["c"])]
    if len(b) != s or len(c) != s:
        raise ValueError("b and c need s entries each")
    return ButcherTableau.from_lists(a, b, c, name=fields.get("name", name))


def load_tableau(path) -> ButcherTableau:
    path = Path(path)
    return parse_tableau(path.read_text(encoding="utf-8"), name=path.stem)


def dump_tableau(tab: ButcherTableau) -> str:
    """Serialize `tab` in the format read by :func:`parse_tableau`."""
    lower = [tab.a[i][j] for i in range(tab.s) for j in range(i)]
    fmt = lambda vals: ", ".join(str(v) for v in vals)  # noqa: E731
    return (
        f"name = {tab.name}\ns = {tab.s}\na = {fmt(lower)}\n"
        f"b = {fmt(tab.b)}\nc = {fmt(tab.c)}\n"
    )


def from_G(G: Sequence[Sequence], c: Sequence, name: str = "recovered") -> ButcherTableau:
    """Rebuild a tableau from an integral right-hand side and abscissae."""
    G = [[Fraction(v) for v in row] for row in G]
    s = len(G)
    a = [[Fraction(0)] * s] + [list(G[i]) for i in range(1, s)]
    return ButcherTableau.from_lists(a, G[0], c, name=name, check=False)
