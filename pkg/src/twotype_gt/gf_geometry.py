"""Prime-field arithmetic and the transversal-line geometry of AG(3, q).

Points of AG(3, q) are triples ``(y0, y1, y2)``.  The planes ``y0 = i``
partition the space into ``q`` parallel classes of ``q**2`` points.  The
lines meeting every such plane exactly once are parameterised as

    {(t, c + a*t, d + b*t) : t in F_q}

so there are ``q**4`` of them.  Points index pools, lines index items.

The field element ``f_i`` is identified with the integer ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def check_prime(q: int) -> int:
    if not isinstance(q, (int, np.integer)) or not is_prime(int(q)):
        raise ValueError(f"q must be a prime integer, got {q!r}")
    return int(q)


@dataclass(frozen=True)
class FieldElement:
    """An element of the prime field GF(q)."""

    value: int
    q: int

    def __post_init__(self):
        check_prime(self.q)
        if not 0 <= self.value < self.q:
            raise ValueError(f"value {self.value} not reduced mod {self.q}")

    @classmethod
    def of(cls, value: int, q: int) -> "FieldElement":
        return cls(int(value) % q, q)

    def _coerce(self, other) -> "FieldElement":
        if isinstance(other, FieldElement):
            if other.q != self.q:
                raise ValueError(f"mismatched moduli {self.q} and {other.q}")
            return other
        if isinstance(other, (int, np.integer)):
            return FieldElement.of(int(other), self.q)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement((self.value + other.value) % self.q, self.q)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement((self.value - other.value) % self.q, self.q)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __neg__(self):
        return FieldElement((-self.value) % self.q, self.q)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return FieldElement((self.value * other.value) % self.q, self.q)

    __rmul__ = __mul__

    def inverse(self) -> "FieldElement":
        if self.value == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return FieldElement(pow(self.value, -1, self.q), self.q)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self * other.inverse()

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"F{self.q}({self.value})"


def add(x: FieldElement, y: FieldElement) -> FieldElement:
    return x + y


def sub(x: FieldElement, y: FieldElement) -> FieldElement:
    return x - y


def mul(x: FieldElement, y: FieldElement) -> FieldElement:
    return x * y


def inv(x: FieldElement) -> FieldElement:
    return x.inverse()


@dataclass(frozen=True)
class AffinePoint:
    y0: FieldElement
    y1: FieldElement
    y2: FieldElement

    @property
    def q(self) -> int:
        return self.y0.q

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.y0.value, self.y1.value, self.y2.value)

    def plane_row(self) -> int:
        """Row index of this point inside its plane matrix (lex order on (y1, y2))."""
        return self.y1.value * self.q + self.y2.value


@dataclass(frozen=True)
class TransversalLine:
    """The line ``{(t, c + a*t, d + b*t)}``; slopes ``a, b`` and intercepts ``c, d``."""

    a: FieldElement
    b: FieldElement
    c: FieldElement
    d: FieldElement

    def __post_init__(self):
        if len({self.a.q, self.b.q, self.c.q, self.d.q}) != 1:
            raise ValueError("line parameters must share a modulus")

    @property
    def q(self) -> int:
        return self.a.q

    @classmethod
    def from_ints(cls, a: int, b: int, c: int, d: int, q: int) -> "TransversalLine":
        return cls(*(FieldElement.of(v, q) for v in (a, b, c, d)))

    @classmethod
    def from_index(cls, index: int, q: int) -> "TransversalLine":
        if not 0 <= index < q**4:
            raise ValueError(f"line index {index} out of range for q={q}")
        a, rem = divmod(index, q**3)
        b, rem = divmod(rem, q**2)
        c, d = divmod(rem, q)
        return cls.from_ints(a, b, c, d, q)

    @property
    def index(self) -> int:
        """Column index: lexicographic position of ``(a, b, c, d)``."""
        q = self.q
        return ((self.a.value * q + self.b.value) * q + self.c.value) * q + self.d.value


def all_lines(q: int):
    q = check_prime(q)
    for index in range(q**4):
        yield TransversalLine.from_index(index, q)


def line_point_on_plane(line: TransversalLine, i: int) -> AffinePoint:
    """The unique point where ``line`` meets the plane ``y0 = i``."""
    q = line.q
    if not 0 <= i < q:
        raise ValueError(f"plane index {i} out of range for q={q}")
    t = FieldElement(i, q)
    return AffinePoint(t, line.c + line.a * t, line.d + line.b * t)


def plane_incidence(q: int, i: int):
    """Incidence matrix of the points of plane ``i`` against all transversal lines.

    Rows are the ``q**2`` points ``(y1, y2)`` in lexicographic order, columns
    the ``q**4`` lines ``(a, b, c, d)`` in lexicographic order.
    """
    from .pooling import IncidenceMatrix

    q = check_prime(q)
    if not 0 <= i < q:
        raise ValueError(f"plane index {i} out of range for q={q}")
    a, b, c, d = np.unravel_index(np.arange(q**4), (q, q, q, q))
    y1 = (c + a * i) % q
    y2 = (d + b * i) % q
    row_of_col = y1 * q + y2
    return IncidenceMatrix.from_column_rows(q * q, row_of_col[:, None].tolist())
