"""Exact arithmetic in Q(i, sqrt2) and exact linear algebra over it.

A :class:`Scalar` is ``a + b*i + c*sqrt2 + d*i*sqrt2`` with rational components.
Real-rational values are usually carried as bare ``gmpy2.mpq`` objects for
speed; :func:`normalize` converts a Scalar back to ``mpq`` whenever its
irrational components vanish, and Scalar arithmetic accepts ``mpq``/``int``
operands transparently.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from gmpy2 import mpq

__all__ = [
    "Scalar",
    "I",
    "SQRT2",
    "mpq",
    "to_scalar",
    "normalize",
    "is_real_rational",
    "scalar_arith",
    "scalar_to_json",
    "scalar_from_json",
    "LinearSystem",
    "Solution",
    "InconsistentSystemError",
    "solve_linear_system",
    "Echelon",
]

_ZERO = mpq(0)
_MPQ = type(_ZERO)


def _q(x) -> mpq:
    if isinstance(x, _MPQ):
        return x
    return mpq(x)


class Scalar:
    """Immutable element a + b i + c sqrt2 + d i sqrt2 of Q(i, sqrt2)."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a=0, b=0, c=0, d=0):
        object.__setattr__(self, "a", _q(a))
        object.__setattr__(self, "b", _q(b))
        object.__setattr__(self, "c", _q(c))
        object.__setattr__(self, "d", _q(d))

    def __setattr__(self, name, value):  # pragma: no cover - immutability guard
        raise AttributeError("Scalar is immutable")

    def __reduce__(self):
        return (Scalar, (self.a, self.b, self.c, self.d))

    # -- predicates -------------------------------------------------------
    def is_real_rational(self) -> bool:
        return not (self.b or self.c or self.d)

    def __bool__(self) -> bool:
        return bool(self.a or self.b or self.c or self.d)

    def parts(self) -> tuple:
        return (self.a, self.b, self.c, self.d)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Scalar):
            return Scalar(self.a + other.a, self.b + other.b, self.c + other.c, self.d + other.d)
        if isinstance(other, (int, _MPQ)):
            return Scalar(self.a + other, self.b, self.c, self.d)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.a, -self.b, -self.c, -self.d)

    def __sub__(self, other):
        if isinstance(other, (Scalar, int, _MPQ)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, (int, _MPQ)):
            return (-self) + other
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Scalar):
            a1, b1, c1, d1 = self.a, self.b, self.c, self.d
            a2, b2, c2, d2 = other.a, other.b, other.c, other.d
            # basis 1, i, r, ir with i^2 = -1, r^2 = 2
            a = a1 * a2 - b1 * b2 + 2 * c1 * c2 - 2 * d1 * d2
            b = a1 * b2 + b1 * a2 + 2 * c1 * d2 + 2 * d1 * c2
            c = a1 * c2 + c1 * a2 - b1 * d2 - d1 * b2
            d = a1 * d2 + d1 * a2 + b1 * c2 + c1 * b2
            return Scalar(a, b, c, d)
        if isinstance(other, (int, _MPQ)):
            return Scalar(self.a * other, self.b * other, self.c * other, self.d * other)
        return NotImplemented

    __rmul__ = __mul__

    def conj_i(self) -> "Scalar":
        """Galois conjugate i -> -i."""
        return Scalar(self.a, -self.b, self.c, -self.d)

    def conj_r(self) -> "Scalar":
        """Galois conjugate sqrt2 -> -sqrt2."""
        return Scalar(self.a, self.b, -self.c, -self.d)

    def inverse(self) -> "Scalar":
        if not self:
            raise ZeroDivisionError("inverse of zero Scalar")
        # x * conj_i(x) lies in Q(sqrt2); multiply by its sqrt2-conjugate to get Q.
        y = self * self.conj_i()
        z = y * y.conj_r()
        n = z.a
        return (self.conj_i() * y.conj_r()) * (1 / n)

    def __truediv__(self, other):
        if isinstance(other, Scalar):
            return self * other.inverse()
        if isinstance(other, (int, _MPQ)):
            if not other:
                raise ZeroDivisionError("division by zero")
            return self * (1 / _q(other))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, (int, _MPQ)):
            return self.inverse() * other
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        out = Scalar(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # -- comparison / hashing --------------------------------------------
    def __eq__(self, other):
        if isinstance(other, Scalar):
            return self.parts() == other.parts()
        if isinstance(other, (int, _MPQ)):
            return self.is_real_rational() and self.a == other
        return NotImplemented

    def __hash__(self):
        if self.is_real_rational():
            return hash(self.a)
        return hash(self.parts())

    def __repr__(self):
        return f"Scalar({', '.join(str(p) for p in self.parts())})"

    def __str__(self):
        return scalar_text(self)


I = Scalar(0, 1, 0, 0)
SQRT2 = Scalar(0, 0, 1, 0)


def to_scalar(x) -> Scalar:
    if isinstance(x, Scalar):
        return x
    return Scalar(x)


def normalize(x):
    """Return ``mpq`` when ``x`` is real-rational, else the Scalar itself."""
    if isinstance(x, Scalar):
        return x.a if x.is_real_rational() else x
    if isinstance(x, _MPQ):
        return x
    return mpq(x)


def is_real_rational(x) -> bool:
    if isinstance(x, Scalar):
        return x.is_real_rational()
    return True


def scalar_arith(x, y, op: str):
    """Exact field operation ``op`` in {'add', 'mul', 'inv'}; ``y`` is ignored for 'inv'."""
    x = to_scalar(x)
    if op == "add":
        return x + to_scalar(y)
    if op == "mul":
        return x * to_scalar(y)
    if op == "inv":
        return x.inverse()
    raise ValueError(f"unknown scalar op {op!r}")


def _qtext(q: mpq) -> str:
    return f"{q.numerator}/{q.denominator}"


def scalar_to_json(x) -> list:
    s = to_scalar(x)
    return [_qtext(p) for p in s.parts()]


def scalar_from_json(data: Sequence[str]):
    if len(data) != 4:
        raise ValueError("Scalar JSON must have four components")
    return normalize(Scalar(*(mpq(p) for p in data)))


def scalar_text(x) -> str:
    """Human/parser-readable text, e.g. ``(1/2 + 3/4*I*sqrt2)``."""
    s = to_scalar(x)
    pieces = []
    for val, unit in zip(s.parts(), ("", "I", "sqrt2", "I*sqrt2")):
        if not val:
            continue
        num = str(val.numerator) if val.denominator == 1 else f"{val.numerator}/{val.denominator}"
        if unit:
            num = unit if val == 1 else ("-" + unit if val == -1 else f"{num}*{unit}")
        pieces.append(num)
    if not pieces:
        return "0"
    return " + ".join(pieces).replace("+ -", "- ")


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


class InconsistentSystemError(ArithmeticError):
    """Raised when a linear system has no solution."""


@dataclass
class LinearSystem:
    """Sparse exact system ``matrix * x = rhs``.

    ``rows`` is a list of dicts ``{column index: coefficient}``; ``rhs`` has one
    entry per row; ``labels`` names the unknowns (its length fixes the column count).
    """

    rows: list
    rhs: list
    labels: list

    @classmethod
    def from_dense(cls, matrix, rhs, labels=None):
        n = len(matrix[0]) if matrix else len(labels or [])
        rows = [{j: normalize(v) for j, v in enumerate(r) if v} for r in matrix]
        if any(len(r) != n for r in matrix):
            raise ValueError("row length must equal the unknown count")
        return cls(rows, [normalize(v) for v in rhs], list(labels) if labels else list(range(n)))

    @property
    def ncols(self) -> int:
        return len(self.labels)


@dataclass
class Solution:
    particular: list
    nullspace: list = field(default_factory=list)

    @property
    def nullity(self) -> int:
        return len(self.nullspace)


def solve_linear_system(system: LinearSystem) -> Solution:
    """Exact Gauss–Jordan elimination.

    Pivot column choice: largest support among remaining rows, ties broken by
    lowest unknown index; pivot row: sparsest row containing that column,
    ties by lowest row index. Raises :class:`InconsistentSystemError`.
    """
    n = system.ncols
    rows = []
    for r, b in zip(system.rows, system.rhs):
        d = {j: normalize(v) for j, v in r.items() if v}
        rows.append([d, normalize(b)])
    pending = list(range(len(rows)))
    pivots = []  # (col, row data)
    while True:
        pending = [k for k in pending if rows[k][0] or _check_zero_row(rows[k])]
        if not pending:
            break
        support = {}
        for k in pending:
            for j in rows[k][0]:
                support[j] = support.get(j, 0) + 1
        col = min(support, key=lambda j: (-support[j], j))
        cand = [k for k in pending if col in rows[k][0]]
        prow = min(cand, key=lambda k: (len(rows[k][0]), k))
        pd, pb = rows[prow]
        inv = 1 / pd[col] if not isinstance(pd[col], Scalar) else pd[col].inverse()
        pd = {j: normalize(v * inv) for j, v in pd.items()}
        pb = normalize(pb * inv)
        pending.remove(prow)
        for k in cand:
            if k == prow:
                continue
            d, b = rows[k]
            f = d[col]
            for j, v in pd.items():
                nv = normalize(d.get(j, 0) - f * v)
                if nv:
                    d[j] = nv
                else:
                    d.pop(j, None)
            rows[k][1] = normalize(b - f * pb)
        # back-substitute into earlier pivots to keep reduced form
        for pc, prd in pivots:
            if col in prd[0]:
                f = prd[0][col]
                for j, v in pd.items():
                    nv = normalize(prd[0].get(j, 0) - f * v)
                    if nv:
                        prd[0][j] = nv
                    else:
                        prd[0].pop(j, None)
                prd[1] = normalize(prd[1] - f * pb)
        pivots.append((col, [pd, pb]))
    pivot_cols = {c for c, _ in pivots}
    free = [j for j in range(n) if j not in pivot_cols]
    particular = [mpq(0)] * n
    for c, (d, b) in pivots:
        particular[c] = b
    nullspace = []
    for fcol in free:
        vec = [mpq(0)] * n
        vec[fcol] = mpq(1)
        for c, (d, b) in pivots:
            if fcol in d:
                vec[c] = normalize(-d[fcol])
        nullspace.append(vec)
    return Solution(particular, nullspace)


def _check_zero_row(row) -> bool:
    d, b = row
    if not d and b:
        raise InconsistentSystemError("inconsistent linear system (0 = nonzero)")
    return False


class Echelon:
    """Incremental row-echelon basis of sparse vectors with a caller-defined pivot order.

    Each inserted vector is reduced against the stored pivots; its pivot is the
    surviving key that is largest under ``key``. Used to compute quotient bases
    (e.g. modulo total derivatives) and to reduce vectors to normal form.
    """

    def __init__(self, key=lambda k: k):
        self.key = key
        self.pivots: dict = {}  # pivot key -> normalized row (pivot coefficient 1)

    def reduce(self, vec: dict) -> dict:
        vec = {k: v for k, v in vec.items() if v}
        changed = True
        while changed:
            changed = False
            hits = [k for k in vec if k in self.pivots]
            if not hits:
                break
            k = max(hits, key=self.key)
            f = vec[k]
            for j, v in self.pivots[k].items():
                nv = normalize(vec.get(j, 0) - f * v)
                if nv:
                    vec[j] = nv
                else:
                    vec.pop(j, None)
            changed = True
        return vec

    def insert(self, vec: dict):
        """Insert ``vec``; return its pivot key or None if dependent."""
        vec = self.reduce(vec)
        if not vec:
            return None
        p = max(vec, key=self.key)
        inv = vec[p].inverse() if isinstance(vec[p], Scalar) else 1 / vec[p]
        row = {j: normalize(v * inv) for j, v in vec.items()}
        # keep the basis fully reduced so that reduce() terminates quickly
        for q, other in self.pivots.items():
            if p in other:
                f = other[p]
                for j, v in row.items():
                    nv = normalize(other.get(j, 0) - f * v)
                    if nv:
                        other[j] = nv
                    else:
                        other.pop(j, None)
        self.pivots[p] = row
        return p

    def __len__(self):
        return len(self.pivots)
