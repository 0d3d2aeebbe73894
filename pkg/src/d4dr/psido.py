"""Pseudo-differential operators of the first and second type.

A first-type operator is ``sum_{k <= top} a^k d^k`` with DiffPoly coefficients,
stored as a dict ``{k: a^k}`` together with a truncation ``floor``: coefficients
of order ``< floor`` are unknown (``floor=None`` means the operator is known
exactly, i.e. it is a finite sum). Composition follows

    a d^n o b d^m = sum_k binom(n, k) a b_k eps^k d^(n+m-k),

where ``eps`` is included when ``eps_product`` is true (DS convention) and
omitted for bare Hamiltonian operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

from .diffpoly import EPS, DiffPoly, const, d_x, var
from .scalars import mpq

__all__ = [
    "PsiDO1",
    "PsiDO2",
    "TruncationError",
    "StructureError",
    "binom",
    "psido_mul",
    "adjoint",
    "op_apply",
    "power",
    "nth_root_first",
    "sqrt_second",
    "coefficient_of_product",
    "RootData",
    "graded_product",
]


class TruncationError(RuntimeError):
    """A requested coefficient lies below the known truncation floor."""


class StructureError(ValueError):
    """An operator does not have the structure an algorithm requires."""


def binom(n: int, k: int) -> int:
    """Generalized binomial coefficient n choose k for integer n, k >= 0."""
    if k < 0:
        return 0
    if n >= 0:
        return comb(n, k) if k <= n else 0
    # (-1)^k C(k - n - 1, k)
    return (-1) ** k * comb(k - n - 1, k)


def _eps_pow(k):
    return EPS ** k if k else const(1)


class _DerivCache:
    """Caches successive x-derivatives of a coefficient."""

    __slots__ = ("ders",)

    def __init__(self, f):
        self.ders = [f]

    def get(self, k):
        ders = self.ders
        while len(ders) <= k:
            ders.append(d_x(ders[-1]))
        return ders[k]


@dataclass
class PsiDO1:
    coeffs: dict = field(default_factory=dict)
    floor: int | None = None
    eps_product: bool = True

    def __post_init__(self):
        self.coeffs = {k: v for k, v in self.coeffs.items() if v}
        if self.floor is not None:
            self.coeffs = {k: v for k, v in self.coeffs.items() if k >= self.floor}

    # -- constructors ------------------------------------------------------
    @classmethod
    def d(cls, n: int = 1, eps_product=True, floor=None):
        """The operator d^n (for n < 0 this is exact as a single term)."""
        return cls({n: const(1)}, floor, eps_product)

    @classmethod
    def mult(cls, f, eps_product=True):
        """Multiplication operator by the DiffPoly ``f``."""
        if not isinstance(f, DiffPoly):
            f = const(f)
        return cls({0: f}, None, eps_product)

    # -- queries -------------------------------------------------------------
    @property
    def top(self):
        return max(self.coeffs, default=None)

    def coeff(self, k: int) -> DiffPoly:
        if self.floor is not None and k < self.floor:
            raise TruncationError(f"coefficient of d^{k} requested below floor {self.floor}")
        return self.coeffs.get(k, const(0))

    def is_differential(self):
        return all(k >= 0 for k in self.coeffs)

    def plus(self) -> "PsiDO1":
        if self.floor is not None and self.floor > 0:
            raise TruncationError("differential part not fully known")
        return PsiDO1({k: v for k, v in self.coeffs.items() if k >= 0}, None, self.eps_product)

    def minus(self) -> "PsiDO1":
        return PsiDO1({k: v for k, v in self.coeffs.items() if k < 0}, self.floor, self.eps_product)

    def res(self) -> DiffPoly:
        return self.coeff(-1)

    def parts_and_residue(self):
        return self.plus(), self.minus(), self.res()

    def truncate(self, floor: int) -> "PsiDO1":
        f = floor if self.floor is None else max(floor, self.floor)
        return PsiDO1(dict(self.coeffs), f, self.eps_product)

    def map(self, fn) -> "PsiDO1":
        return PsiDO1({k: fn(v) for k, v in self.coeffs.items()}, self.floor, self.eps_product)

    # -- arithmetic -----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, PsiDO1):
            other = PsiDO1.mult(other, self.eps_product)
        fl = _max_floor(self.floor, other.floor)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return PsiDO1(out, fl, self.eps_product)

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda v: -v)

    def __sub__(self, other):
        if not isinstance(other, PsiDO1):
            other = PsiDO1.mult(other, self.eps_product)
        return self + (-other)

    def scale(self, c) -> "PsiDO1":
        return self.map(lambda v: v.scale(c))

    def __mul__(self, other):
        if isinstance(other, PsiDO1):
            return psido_mul(self, other)
        return self.map(lambda v: v * other)

    def __rmul__(self, other):
        return self.map(lambda v: other * v)

    def equal_to_floor(self, other, floor=None) -> bool:
        fl = _max_floor(_max_floor(self.floor, other.floor), floor)
        keys = set(self.coeffs) | set(other.coeffs)
        for k in keys:
            if fl is not None and k < fl:
                continue
            if self.coeffs.get(k, const(0)) != other.coeffs.get(k, const(0)):
                return False
        return True

    def dump(self) -> str:
        """Debug dump: one line per d-power with the JSON coefficient."""
        from .parse import render

        lines = [f"floor {self.floor}"]
        for k in sorted(self.coeffs, reverse=True):
            lines.append(f"d^{k}: {render(self.coeffs[k], 'json')}")
        return "\n".join(lines)


def _max_floor(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _product_floor(A: PsiDO1, B: PsiDO1):
    """Lowest order of A o B that is determined by the known parts."""
    ta, tb = A.top, B.top
    cands = []
    if A.floor is not None and tb is not None:
        cands.append(A.floor + tb)
    if B.floor is not None and ta is not None:
        cands.append(B.floor + ta)
    return max(cands) if cands else None


def coefficient_of_product(A: PsiDO1, B: PsiDO1, order: int, cacheB=None) -> DiffPoly:
    """The coefficient of d^order in A o B (no full product formed)."""
    fl = _product_floor(A, B)
    if fl is not None and order < fl:
        raise TruncationError(f"coefficient d^{order} of product lies below floor {fl}")
    eps = A.eps_product
    tb = B.top
    if tb is None:
        return const(0)
    cacheB = cacheB if cacheB is not None else {}
    acc = None
    for n, a in A.coeffs.items():
        # m = order - n + k with k >= 0, m <= tb
        k = max(0, n - order + (B.floor if B.floor is not None else -(10 ** 9)))
        while True:
            m = order - n + k
            if m > tb:
                break
            if n >= 0 and k > n:
                break
            b = B.coeffs.get(m)
            if b is not None:
                c = binom(n, k)
                if c:
                    dc = cacheB.get(m)
                    if dc is None:
                        dc = cacheB[m] = _DerivCache(b)
                    t = a * dc.get(k)
                    if eps and k:
                        t = t.shift(eps=k)
                    t = t.scale(c) if c != 1 else t
                    acc = t if acc is None else acc + t
            k += 1
    return acc if acc is not None else const(0)


def psido_mul(A: PsiDO1, B: PsiDO1, floor: int | None = None) -> PsiDO1:
    """Composition A o B, valid down to the product floor (and ``floor`` if given).

    If both operators are exact but the product is an infinite series (a negative
    power composed with a non-constant coefficient), ``floor`` is mandatory.
    """
    if A.eps_product != B.eps_product:
        raise StructureError("cannot compose operators with different eps conventions")
    fl = _max_floor(_product_floor(A, B), floor)
    eps = A.eps_product
    if fl is None:
        # exact product: finite only if every negative-order A term meets a constant B coefficient
        for n in A.coeffs:
            if n < 0 and any(any(True for mm in b.terms if mm != 0) for b in B.coeffs.values()):
                raise TruncationError("infinite product series: a floor is required")
    out: dict = {}
    for m, b in B.coeffs.items():
        dc = _DerivCache(b)
        for n, a in A.coeffs.items():
            k = 0
            while True:
                order = n + m - k
                if fl is not None and order < fl:
                    break
                if n >= 0 and k > n:
                    break
                c = binom(n, k)
                bk = dc.get(k)
                if not bk:
                    break
                t = a * bk
                if eps and k:
                    t = t.shift(eps=k)
                if c != 1:
                    t = t.scale(c)
                cur = out.get(order)
                out[order] = t if cur is None else cur + t
                k += 1
    return PsiDO1(out, fl, eps)


def adjoint(X: PsiDO1) -> PsiDO1:
    """Formal adjoint (a d^k)^* = (-d)^k o a."""
    eps = X.eps_product
    out: dict = {}
    for k, a in X.coeffs.items():
        dc = _DerivCache(a)
        j = 0
        sgn = (-1) ** (k % 2)
        while True:
            order = k - j
            if X.floor is not None and order < X.floor:
                break
            if k >= 0 and j > k:
                break
            c = binom(k, j)
            aj = dc.get(j)
            if not aj:
                break
            t = aj.scale(sgn * c)
            if eps and j:
                t = t.shift(eps=j)
            cur = out.get(order)
            out[order] = t if cur is None else cur + t
            j += 1
            if X.floor is None and k < 0 and j > 200:
                raise TruncationError("adjoint of an infinite series requires a floor")
    return PsiDO1(out, X.floor, eps)


def op_apply(X: PsiDO1, f: DiffPoly) -> DiffPoly:
    """Apply a differential operator: sum_k a^k eps^k d_x^k(f)."""
    if any(k < 0 for k in X.coeffs):
        raise StructureError("op_apply requires a purely differential operator")
    if X.floor is not None and X.floor > 0:
        raise TruncationError("differential operator not fully known")
    dc = _DerivCache(f)
    out = const(0)
    for k, a in sorted(X.coeffs.items()):
        t = a * dc.get(k)
        if X.eps_product and k:
            t = t.shift(eps=k)
        out = out + t
    return out


def power(X: PsiDO1, k: int, floor: int | None = None) -> PsiDO1:
    """X^k by binary exponentiation, valid to ``floor`` (floors propagated exactly)."""
    if k < 1:
        raise ValueError("power requires k >= 1")
    t = X.top or 0
    if floor is None:
        floor = X.floor + (k - 1) * t if X.floor is not None else None

    def needed(j):
        # floor for a partial product of j factors that will be multiplied by k-j more
        return None if floor is None else floor - (k - j) * t

    result = None
    rcount = 0
    base = X
    bcount = 1
    kk = k
    while kk:
        if kk & 1:
            if result is None:
                result, rcount = base, bcount
            else:
                rcount += bcount
                result = psido_mul(result, base, needed(rcount))
        kk >>= 1
        if kk:
            bcount *= 2
            base = psido_mul(base, base, needed(bcount))
    if floor is not None:
        if result.floor is not None and result.floor > floor:
            raise TruncationError(f"power X^{k}: insufficient input truncation for floor {floor}")
        result = result.truncate(floor)
    return result


# ---------------------------------------------------------------------------
# Roots
# ---------------------------------------------------------------------------


@dataclass
class RootData:
    """The first-type root P of an order-n operator and its powers P^1..P^n."""

    P: PsiDO1
    powers: dict


def nth_root_first(L: PsiDO1, n: int = 6, floor: int = -13) -> RootData:
    """Unique P = d + sum_{k<0} p^k d^k with P^n = L, to floor ``floor``.

    Order by order: the coefficient of d^{n-1+k} in P^n equals n p^k plus terms
    involving p^{>k} only. The powers P^j are maintained incrementally, so each
    step needs only single coefficients of products. Returns P and P^j
    (valid to floor (j-1)+floor).
    """
    if L.top != n or L.coeffs[n] != const(1):
        raise StructureError("nth_root_first requires a monic operator of order n")
    if L.coeffs.get(n - 1):
        raise StructureError("expected vanishing subleading coefficient")
    eps = L.eps_product
    P = PsiDO1({1: const(1)}, 0, eps)
    pw = {1: P}
    for j in range(2, n + 1):
        pw[j] = PsiDO1({j: const(1)}, j - 1 + 0, eps)
    for k in range(-1, floor - 1, -1):
        known = {}
        # P with p^k := 0, valid to k
        P0 = PsiDO1(dict(P.coeffs), k, eps)
        cache: dict = {}
        for j in range(2, n + 1):
            prev = pw[j - 1]
            prev0 = PsiDO1(dict(prev.coeffs), (j - 2) + k, eps)
            if j - 1 >= 2:
                c = known[j - 1]
                if c:
                    prev0.coeffs[(j - 2) + k] = c
            known[j] = coefficient_of_product(prev0, P0, (j - 1) + k, cache)
        target = L.coeffs.get(n - 1 + k, const(0)) if (L.floor is None or n - 1 + k >= L.floor) else None
        if target is None:
            raise TruncationError("Lax operator truncated above the requested root floor")
        pk = (target - known[n]).scale(mpq(1, n))
        if pk:
            P.coeffs[k] = pk
        P.floor = k
        for j in range(2, n + 1):
            c = known[j] + pk.scale(j)
            pw[j].floor = (j - 1) + k
            if c:
                pw[j].coeffs[(j - 1) + k] = c
    return RootData(P, pw)


@dataclass
class PsiDO2:
    """Second-type operator as graded components ``{degree: PsiDO1}`` up to ``ceiling``.

    The component of degree d is ``sum_l a^l d^l`` where ``a^l`` carries exactly
    ``d - l`` x-derivatives (the grading deg s_k = k on degree-zero coefficients).
    """

    components: dict
    ceiling: int

    def component(self, d):
        if d > self.ceiling:
            raise TruncationError(f"component of degree {d} above ceiling {self.ceiling}")
        return self.components.get(d)

    def res_component(self, d):
        c = self.components.get(d)
        return c.coeffs.get(-1, const(0)) if c is not None else const(0)


def _is_homogeneous(X: PsiDO1, d: int) -> bool:
    from .diffpoly import monomial_jet_count

    return all(monomial_jet_count(m) == d - l for l, a in X.coeffs.items() for m in a.terms)


def graded_product(A: PsiDO2, B: PsiDO2, ceiling: int, floor: int) -> PsiDO2:
    """Product of second-type operators, components up to ``ceiling``."""
    out: dict = {}
    for da, Xa in A.components.items():
        for db, Xb in B.components.items():
            if da + db > ceiling:
                continue
            p = psido_mul(Xa.truncate(floor), Xb.truncate(floor), floor)
            out[da + db] = out[da + db] + p if da + db in out else p
    limit = min(ceiling, min(A.ceiling + min(B.components), B.ceiling + min(A.components)))
    return PsiDO2({d: v for d, v in out.items() if d <= limit}, limit)


def sqrt_second(L: PsiDO1, ceiling: int = 7, floor: int = -14) -> PsiDO2:
    """Square root Q = d^{-1} rho + sum_m Q_m o d of the D4 Lax operator.

    Components have odd degree -1, 1, ..., ``ceiling``. At degree 2m the equation
    Q^2 = L reads T(X) = d^{-1} rho X + X d^{-1} rho = rhs for X = Q_m o d, which
    is solved top-down: the coefficient of d^{l-1} in T(X) is 2 rho x^l + (known),
    so coefficients are Laurent in rho. Lower components feed the right-hand sides
    of higher ones, so the component of degree d is computed to the deeper floor
    ``floor - (ceiling - d)``; every returned component is valid to ``floor``.

    With rho = 0 the triangular solve degenerates; the free operator L = d^6 is
    handled directly (Q = d^3).
    """
    rho = var("rho")
    eps = L.eps_product
    if set(L.coeffs) == {6} and L.coeffs[6] == const(1):
        return PsiDO2({3: PsiDO1({3: const(1)}, None, eps)}, ceiling)
    if not any(v.tag == "rho" for a in L.coeffs.values() for v in a.variables()):
        raise StructureError("square root of the second type needs the rho field")
    work = floor - ceiling - 2
    if L.floor is not None and L.floor > work + 1:
        raise TruncationError(f"square root to floor {floor} needs L to floor {work + 1}, got {L.floor}")
    Lc = _graded_components(L)
    Qm1 = psido_mul(PsiDO1.d(-1, eps), PsiDO1.mult(rho, eps), work)
    comps = {-1: Qm1}
    inv2rho = (rho ** -1).scale(mpq(1, 2))
    for dd in range(1, ceiling + 1, 2):
        fd = floor - (ceiling - dd)
        target_deg = dd - 1
        rhs = Lc.get(target_deg, PsiDO1({}, None, eps)).truncate(fd - 1)
        for a in range(1, dd - 1, 2):
            b = target_deg - a
            if a in comps and b in comps:
                rhs = rhs - psido_mul(comps[a], comps[b], fd - 1)
        X = PsiDO1({}, None, eps)
        for l in range(dd, fd - 1, -1):
            Xf = PsiDO1(dict(X.coeffs), l, eps)
            cur = coefficient_of_product(Qm1, Xf, l - 1) + coefficient_of_product(Xf, Qm1, l - 1)
            resid = rhs.coeff(l - 1) - cur
            if resid:
                X.coeffs[l] = resid * inv2rho
        X.floor = fd
        if not _is_homogeneous(X, dd):
            raise StructureError(f"square-root component of degree {dd} is not homogeneous")
        comps[dd] = X
    return PsiDO2({d: c.truncate(floor) for d, c in comps.items()}, ceiling)


def _graded_components(X: PsiDO1) -> dict:
    """Split a first-type operator into homogeneous components by degree."""
    from .diffpoly import monomial_jet_count

    out: dict = {}
    for l, a in X.coeffs.items():
        for m, c in a.terms.items():
            d = monomial_jet_count(m) + l
            comp = out.setdefault(d, {})
            comp.setdefault(l, {})[m] = c
    return {
        d: PsiDO1({l: DiffPoly._raw(t, X.coeffs[l].alphabet) for l, t in comp.items()}, X.floor, X.eps_product)
        for d, comp in out.items()
    }
