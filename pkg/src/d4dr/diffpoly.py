"""Generalized differential polynomials in jet variables with formal parameters eps, hbar.

Monomials are packed into Python integers (Kronecker substitution with balanced
signed 8-bit digits) so that monomial multiplication is integer addition.
Digit 0 holds the eps exponent, digit 1 the hbar exponent, and digit
``2 + k*NSLOT + slot`` the exponent of the jet variable ``(slot, k)``.
Negative exponents are representable; they are needed only for the DS-layer
variable rho, which appears inverted in the square root of the Lax operator.
"""
from __future__ import annotations

import functools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

from .scalars import Scalar, mpq, normalize, to_scalar

__all__ = [
    "JetVariable",
    "DiffPoly",
    "AlphabetError",
    "MiuraError",
    "NotExactError",
    "ALPHABET_FIELDS",
    "var",
    "const",
    "EPS",
    "HBAR",
    "d_x",
    "d_x_n",
    "partial",
    "variational_derivative",
    "variational_gradient",
    "grading",
    "differential_degree",
    "cohft_weight",
    "dx_exactness",
    "antiderivative",
    "homotopy",
    "Accumulator",
    "reduce_modulo_dx",
    "quotient_basis",
    "apply_miura",
    "invert_triangular_miura",
    "rescale_eps",
    "LocalFunctional",
]

# ---------------------------------------------------------------------------
# Variable layout
# ---------------------------------------------------------------------------

#: jet-variable families (tag, index); tag 'rho' has index 0; 'dx'/'dy' are the
#: auxiliary delta-function families used for coordinate functionals.
SLOTS = (
    [("s", a) for a in (1, 2, 3)]
    + [("rho", 0)]
    + [("v", a) for a in (1, 2, 3)]
    + [("vt", a) for a in (1, 2, 3)]
    + [("u", a) for a in (1, 2, 3, 4)]
    + [("ut", a) for a in (1, 2, 3, 4)]
    + [("dx", 0), ("dy", 0)]
)
NSLOT = len(SLOTS)
SLOT_INDEX = {s: i for i, s in enumerate(SLOTS)}
MAX_JET = 60
_BITS = 8
_HALF = 1 << (_BITS - 1)
_MASK = (1 << _BITS) - 1

#: which alphabet (coordinate system) a variable family belongs to
_FAMILY = {"s": "s", "rho": "rho", "v": "v", "vt": "v", "u": "u", "ut": "ut", "dx": None, "dy": None}
#: fields per alphabet, used by variational gradients and Miura maps
ALPHABET_FIELDS = {
    "s": [("s", 1), ("s", 2), ("s", 3), ("rho", 0)],
    "v": [("v", 1), ("v", 2), ("v", 3), ("rho", 0)],
    "u": [("u", 1), ("u", 2), ("u", 3), ("u", 4)],
    "ut": [("ut", 1), ("ut", 2), ("ut", 3), ("ut", 4)],
}
_TAG_ORDER = {"s": 0, "rho": 1, "v": 2, "vt": 3, "u": 4, "ut": 5, "dx": 6, "dy": 7}


class AlphabetError(TypeError):
    """Raised when polynomials in different coordinate systems are combined."""


class MiuraError(ValueError):
    """Raised for an invalid Miura substitution."""


class NotExactError(ValueError):
    """Raised when a density expected to be a total derivative is not."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


@dataclass(frozen=True, order=True)
class JetVariable:
    tag: str
    index: int
    order: int = 0

    def __post_init__(self):
        if (self.tag, self.index) not in SLOT_INDEX:
            raise ValueError(f"unknown jet variable family {(self.tag, self.index)}")
        if not 0 <= self.order <= MAX_JET:
            raise ValueError(f"jet order {self.order} out of range")

    @property
    def family(self):
        return (self.tag, self.index)

    @property
    def position(self) -> int:
        return 2 + self.order * NSLOT + SLOT_INDEX[(self.tag, self.index)]


def _pos(tag, index, k) -> int:
    return 2 + k * NSLOT + SLOT_INDEX[(tag, index)]


def _unpos(p):
    k, slot = divmod(p - 2, NSLOT)
    return SLOTS[slot], k


_BIAS_CACHE: dict = {}


def _bias(n):
    b = _BIAS_CACHE.get(n)
    if b is None:
        b = int.from_bytes(bytes([_HALF]) * n, "little")
        _BIAS_CACHE[n] = b
    return b


_NONHALF = re.compile(rb"[^\x80]")


@functools.lru_cache(maxsize=1 << 20)
def decode(m: int) -> tuple:
    """Decode a packed monomial to a tuple of (position, exponent), positions ascending."""
    if m == 0:
        return ()
    n = (abs(m).bit_length() + _BITS) // _BITS + 1
    b = (m + _bias(n)).to_bytes(n, "little")
    return tuple((mt.start(), b[mt.start()] - _HALF) for mt in _NONHALF.finditer(b))


def encode(pairs: Iterable) -> int:
    m = 0
    for p, e in pairs:
        if not -_HALF < e < _HALF:
            raise OverflowError("exponent out of packed range")
        m += e << (_BITS * p)
    return m


def _unit(p):
    return 1 << (_BITS * p)


def _mono_family(m) -> set:
    return {_FAMILY[SLOTS[(p - 2) % NSLOT][0]] for p, _ in decode(m) if p >= 2}


def _combine_alphabet(a, b):
    if a == b or b is None:
        return a
    if a is None:
        return b
    if a == "rho" and b in ("s", "v"):
        return b
    if b == "rho" and a in ("s", "v"):
        return a
    raise AlphabetError(f"cannot combine alphabets {a!r} and {b!r}")


def _add_coeff(d, k, c):
    v = d.get(k)
    if v is None:
        d[k] = c
    else:
        s = v + c
        if s:
            d[k] = normalize(s) if isinstance(s, Scalar) else s
        else:
            del d[k]


# ---------------------------------------------------------------------------
# DiffPoly
# ---------------------------------------------------------------------------


class DiffPoly:
    """Sparse map packed-monomial -> coefficient (``mpq`` or :class:`Scalar`)."""

    __slots__ = ("terms", "alphabet")

    def __init__(self, terms: Mapping | None = None, alphabet=None, _clean=False):
        if terms is None:
            terms = {}
        elif not _clean:
            terms = {m: normalize(c) for m, c in terms.items() if c}
        self.terms = terms
        self.alphabet = alphabet

    # -- construction ---------------------------------------------------
    @classmethod
    def _raw(cls, terms, alphabet):
        obj = cls.__new__(cls)
        obj.terms = terms
        obj.alphabet = alphabet if terms else alphabet
        return obj

    def copy(self):
        return DiffPoly._raw(dict(self.terms), self.alphabet)

    # -- basic queries ---------------------------------------------------
    def __bool__(self):
        return bool(self.terms)

    def __len__(self):
        return len(self.terms)

    def is_zero(self):
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, DiffPoly):
            return self.terms == other.terms
        if _is_scalar_like(other):
            return self.terms == (const(other).terms)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def constant_term(self):
        return self.terms.get(0, mpq(0))

    def items(self):
        return self.terms.items()

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, DiffPoly):
            return other
        if _is_scalar_like(other):
            return const(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        alph = _combine_alphabet(self.alphabet, o.alphabet)
        if len(o.terms) > len(self.terms):
            big, small = o.terms, self.terms
        else:
            big, small = self.terms, o.terms
        d = dict(big)
        for m, c in small.items():
            _add_coeff(d, m, c)
        return DiffPoly._raw(d, alph)

    __radd__ = __add__

    def __neg__(self):
        return DiffPoly._raw({m: -c for m, c in self.terms.items()}, self.alphabet)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def scale(self, c):
        c = normalize(c)
        if not c:
            return DiffPoly._raw({}, self.alphabet)
        if isinstance(c, Scalar):
            return DiffPoly._raw({m: normalize(v * c) for m, v in self.terms.items()}, self.alphabet)
        return DiffPoly._raw({m: v * c for m, v in self.terms.items()}, self.alphabet)

    def __mul__(self, other):
        if _is_scalar_like(other):
            return self.scale(other)
        if not isinstance(other, DiffPoly):
            return NotImplemented
        alph = _combine_alphabet(self.alphabet, other.alphabet)
        a, b = self.terms, other.terms
        if len(a) < len(b):
            a, b = b, a
        if len(b) == 1:
            ((mb, cb),) = b.items()
            if cb == 1 and not isinstance(cb, Scalar):
                return DiffPoly._raw({m + mb: c for m, c in a.items()}, alph)
        d: dict = {}
        get = d.get
        for mb, cb in b.items():
            for ma, ca in a.items():
                k = ma + mb
                v = get(k)
                if v is None:
                    d[k] = ca * cb
                else:
                    d[k] = v + ca * cb
        d = {k: normalize(v) if isinstance(v, Scalar) else v for k, v in d.items() if v}
        return DiffPoly._raw(d, alph)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            if len(self.terms) != 1:
                raise ValueError("negative powers only of monomials")
            ((m, c),) = self.terms.items()
            return DiffPoly._raw({-m * (-k): normalize(to_scalar(c) ** k)}, self.alphabet)
        out = const(1)
        out.alphabet = self.alphabet
        base = self
        while k:
            if k & 1:
                out = out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def __truediv__(self, other):
        if _is_scalar_like(other):
            return self.scale(1 / to_scalar(other))
        return NotImplemented

    # -- views ---------------------------------------------------------------
    def monomials(self):
        """Yield (coefficient, eps power, hbar power, [(JetVariable, exp), ...])."""
        for m in sorted(self.terms, key=monomial_sort_key):
            yield (self.terms[m],) + monomial_parts(m)

    def eps_degree(self):
        return max((_digit(m, 0) for m in self.terms), default=0)

    def __repr__(self):
        from .parse import render

        return f"DiffPoly({render(self)!r})"

    def __str__(self):
        from .parse import render

        return render(self)

    # -- filters -----------------------------------------------------------
    def filter(self, pred: Callable[[int], bool]) -> "DiffPoly":
        return DiffPoly._raw({m: c for m, c in self.terms.items() if pred(m)}, self.alphabet)

    def eps_part(self, n: int) -> "DiffPoly":
        return self.filter(lambda m: _digit(m, 0) == n)

    def hbar_part(self, n: int) -> "DiffPoly":
        return self.filter(lambda m: _digit(m, 1) == n)

    def truncate(self, eps_max=None, hbar_max=None) -> "DiffPoly":
        def keep(m):
            if eps_max is not None and _digit(m, 0) > eps_max:
                return False
            if hbar_max is not None and _digit(m, 1) > hbar_max:
                return False
            return True

        return self.filter(keep)

    def shift(self, eps=0, hbar=0) -> "DiffPoly":
        """Multiply by eps^eps * hbar^hbar (negative shifts allowed if every term permits)."""
        delta = eps * _unit(0) + hbar * _unit(1)
        out = {m + delta: c for m, c in self.terms.items()}
        if eps < 0 or hbar < 0:
            for m in out:
                if _digit(m, 0) < 0 or _digit(m, 1) < 0:
                    raise ValueError("negative eps/hbar power produced by shift")
        return DiffPoly._raw(out, self.alphabet)

    def field_part(self) -> "DiffPoly":
        """Drop terms without jet variables (constants in eps, hbar)."""
        return self.filter(lambda m: any(p >= 2 for p, _ in decode(m)))

    def constant_part(self) -> "DiffPoly":
        return self.filter(lambda m: all(p < 2 for p, _ in decode(m)))

    def variables(self) -> set:
        out = set()
        for m in self.terms:
            for p, _ in decode(m):
                if p >= 2:
                    (tag, idx), k = _unpos(p)
                    out.add(JetVariable(tag, idx, k))
        return out

    def families(self) -> set:
        return {v.family for v in self.variables()}

    def max_jet(self, family=None) -> int:
        js = [v.order for v in self.variables() if family is None or v.family == family]
        return max(js, default=-1)

    def substitute_zero(self, families) -> "DiffPoly":
        """Set every jet of the given families to zero."""
        fams = {SLOT_INDEX[f] for f in families}

        def keep(m):
            return not any(p >= 2 and (p - 2) % NSLOT in fams for p, _ in decode(m))

        return self.filter(keep)


def _is_scalar_like(x) -> bool:
    return isinstance(x, (int, Scalar, type(mpq(0)), Fraction))


def _digit(m, p):
    """Balanced digit at position p (accounts for borrows from lower digits)."""
    if not m:
        return 0
    return (((m + _bias(p + 1)) >> (_BITS * p)) & _MASK) - _HALF


def monomial_parts(m):
    eps = hb = 0
    vs = []
    for p, e in decode(m):
        if p == 0:
            eps = e
        elif p == 1:
            hb = e
        else:
            (tag, idx), k = _unpos(p)
            vs.append((JetVariable(tag, idx, k), e))
    vs.sort(key=lambda t: (_TAG_ORDER[t[0].tag], t[0].index, t[0].order))
    return eps, hb, vs


def monomial_sort_key(m):
    eps, hb, vs = monomial_parts(m)
    return (hb, eps, len(vs), [(_TAG_ORDER[v.tag], v.index, v.order, e) for v, e in vs])


def const(c) -> DiffPoly:
    c = normalize(c if not isinstance(c, Fraction) else mpq(c.numerator, c.denominator))
    return DiffPoly._raw({0: c} if c else {}, None)


def var(tag: str, index: int = 0, k: int = 0) -> DiffPoly:
    if tag == "rho":
        index = 0
    v = JetVariable(tag, index, k)
    return DiffPoly._raw({_unit(v.position): mpq(1)}, _FAMILY[tag])


def monomial(eps=0, hbar=0, factors=(), coeff=1) -> DiffPoly:
    """Build coeff * eps^eps * hbar^hbar * prod v^e from ``factors = [(JetVariable, e), ...]``."""
    pairs = [(0, eps), (1, hbar)]
    alph = None
    for v, e in factors:
        v = v if isinstance(v, JetVariable) else JetVariable(*v)
        pairs.append((v.position, e))
        alph = _combine_alphabet(alph, _FAMILY[v.tag])
    c = normalize(coeff)
    return DiffPoly._raw({encode(pairs): c} if c else {}, alph)


EPS = DiffPoly._raw({_unit(0): mpq(1)}, None)
HBAR = DiffPoly._raw({_unit(1): mpq(1)}, None)


def with_alphabet(f: DiffPoly, alphabet) -> DiffPoly:
    return DiffPoly._raw(f.terms, _combine_alphabet(f.alphabet, alphabet))


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------

class Accumulator:
    """In-place sum of many DiffPolys (avoids quadratic copying)."""

    __slots__ = ("terms", "alphabet")

    def __init__(self, alphabet=None):
        self.terms: dict = {}
        self.alphabet = alphabet

    def add(self, f: DiffPoly, c=None):
        self.alphabet = _combine_alphabet(self.alphabet, f.alphabet)
        d = self.terms
        if c is None:
            for m, v in f.terms.items():
                _add_coeff(d, m, v)
        else:
            for m, v in f.terms.items():
                _add_coeff(d, m, v * c)
        return self

    def result(self) -> DiffPoly:
        return DiffPoly._raw({m: normalize(c) for m, c in self.terms.items() if c}, self.alphabet)


def d_x(f: DiffPoly) -> DiffPoly:
    """Total x-derivative (eps and hbar are constants)."""
    d: dict = {}
    shift = _BITS * NSLOT
    for m, c in f.terms.items():
        for p, e in decode(m):
            if p < 2:
                continue
            if p + NSLOT - 2 >= NSLOT * (MAX_JET + 1):
                raise OverflowError("jet order exceeds MAX_JET")
            u = 1 << (_BITS * p)
            _add_coeff(d, m - u + (u << shift), c * e)
    return DiffPoly._raw(d, f.alphabet)


def d_x_n(f: DiffPoly, n: int) -> DiffPoly:
    for _ in range(n):
        f = d_x(f)
    return f


def _as_var(v) -> JetVariable:
    if isinstance(v, JetVariable):
        return v
    if isinstance(v, DiffPoly):
        vs = v.variables()
        if len(v.terms) != 1 or len(vs) != 1:
            raise ValueError("expected a single jet variable")
        return next(iter(vs))
    return JetVariable(*v)


def partial(f: DiffPoly, v) -> DiffPoly:
    """Formal partial derivative with respect to the jet variable ``v``."""
    v = _as_var(v)
    p = v.position
    u = _unit(p)
    d: dict = {}
    for m, c in f.terms.items():
        for q, e in decode(m):
            if q == p:
                _add_coeff(d, m - u, c * e)
                break
    return DiffPoly._raw(d, f.alphabet)


def partial_eps(f: DiffPoly) -> DiffPoly:
    d = {}
    for m, c in f.terms.items():
        e = _digit(m, 0)
        if e:
            d[m - _unit(0)] = c * e
    return DiffPoly._raw(d, f.alphabet)


def variational_derivative(f, family) -> DiffPoly:
    """Euler operator: sum_k (-d_x)^k d f / d u_k for the family ``(tag, index)``."""
    if isinstance(f, LocalFunctional):
        f = f.density
    tag, idx = family if isinstance(family, tuple) else (family.tag, family.index)
    kmax = _family_max_jets(f).get((tag, idx), -1)
    if kmax < 0:
        return DiffPoly._raw({}, f.alphabet)
    acc = partial(f, JetVariable(tag, idx, kmax))
    for k in range(kmax - 1, -1, -1):
        acc = partial(f, JetVariable(tag, idx, k)) - d_x(acc)
    return acc


def variational_gradient(f, families=None) -> dict:
    if isinstance(f, LocalFunctional):
        f = f.density
    jets = _family_max_jets(f)
    fams = families if families is not None else sorted(jets, key=lambda t: (_TAG_ORDER[t[0]], t[1]))
    return {fam: variational_derivative(f, fam) for fam in fams}


# ---------------------------------------------------------------------------
# Gradings
# ---------------------------------------------------------------------------

#: CohFT weights of the D4 theory: |u1|=1, |u2|=|u4|=2/3, |u3|=1/3, |eps|=1/6, |hbar|=4/3
COHFT_WEIGHTS = {1: Fraction(1), 2: Fraction(2, 3), 3: Fraction(1, 3), 4: Fraction(2, 3)}
EPS_WEIGHT = Fraction(1, 6)
HBAR_WEIGHT = Fraction(4, 3)


def monomial_differential_degree(m) -> int:
    tot = 0
    for p, e in decode(m):
        if p == 0:
            tot -= e
        elif p == 1:
            tot -= 2 * e
        else:
            tot += ((p - 2) // NSLOT) * e
    return tot


def monomial_jet_count(m) -> int:
    """Total number of x-derivatives in a monomial (eps and hbar not counted)."""
    return sum(((p - 2) // NSLOT) * e for p, e in decode(m) if p >= 2)


def monomial_cohft_weight(m, weights=COHFT_WEIGHTS) -> Fraction:
    tot = Fraction(0)
    for p, e in decode(m):
        if p == 0:
            tot += EPS_WEIGHT * e
        elif p == 1:
            tot += HBAR_WEIGHT * e
        else:
            (tag, idx), _ = _unpos(p)
            if tag not in ("u", "ut"):
                raise ValueError("CohFT weight is defined on the u / ut alphabets only")
            tot += weights[idx] * e
    return tot


def monomial_field_count(m) -> int:
    return sum(e for p, e in decode(m) if p >= 2)


def monomial_dilaton(m, quantum=False) -> int:
    """Eigenvalue of the dilaton operator: #fields + eps power (+ 2 hbar power)."""
    out = 0
    for p, e in decode(m):
        if p == 0:
            out += e
        elif p == 1:
            out += 2 * e if quantum else 0
        else:
            out += e
    return out


@dataclass
class GradingReport:
    per_monomial: dict
    homogeneous: bool
    degree: object


def grading(f: DiffPoly, kind: str) -> GradingReport:
    fn = {"differential_deg": monomial_differential_degree, "cohft_weight": monomial_cohft_weight}[kind]
    per = {m: fn(m) for m in f.terms}
    vals = set(per.values())
    return GradingReport(per, len(vals) <= 1, next(iter(vals)) if len(vals) == 1 else None)


def differential_degree(f: DiffPoly):
    return grading(f, "differential_deg").degree


def cohft_weight(f: DiffPoly):
    return grading(f, "cohft_weight").degree


# ---------------------------------------------------------------------------
# Exactness
# ---------------------------------------------------------------------------


def homotopy(f: DiffPoly) -> DiffPoly:
    """Homotopy operator of the variational complex (linear, no exactness check).

    g = sum_{alpha, k>=1} sum_{i<k} u^alpha_i (-d_x)^{k-1-i} (df/du^alpha_k), applied
    to each component of fixed field degree N and divided by N. On a total
    derivative f without constant term this returns the unique antiderivative
    without constant term; being linear, it may also be applied termwise to
    parametric families whose exact combinations are only known later.
    """
    if not f.terms:
        return DiffPoly._raw({}, f.alphabet)
    by_deg: dict = {}
    for m, c in f.terms.items():
        by_deg.setdefault(monomial_field_count(m), {})[m] = c
    out: dict = {}
    for n, terms in sorted(by_deg.items()):
        fn = DiffPoly._raw(terms, f.alphabet)
        if n == 0:
            raise NotExactError("component of field degree 0 cannot be integrated polynomially")
        inv = mpq(1, n)
        jets = _family_max_jets(fn)
        for fam, kmax in jets.items():
            for k in range(1, kmax + 1):
                dk = partial(fn, JetVariable(fam[0], fam[1], k))
                if not dk:
                    continue
                cur = dk
                for i in range(k - 1, -1, -1):
                    u = _unit(_pos(fam[0], fam[1], i))
                    for m, c in cur.terms.items():
                        _add_coeff(out, m + u, c * inv)
                    if i:
                        cur = -d_x(cur)
    return DiffPoly._raw({m: normalize(c) for m, c in out.items()}, f.alphabet)


def _family_max_jets(f: DiffPoly) -> dict:
    """family -> highest jet order present (one pass over the monomials)."""
    out: dict = {}
    for m in f.terms:
        for p, _ in decode(m):
            if p >= 2:
                k, slot = divmod(p - 2, NSLOT)
                fam = SLOTS[slot]
                if out.get(fam, -1) < k:
                    out[fam] = k
    return out


def antiderivative(f: DiffPoly) -> DiffPoly:
    """Return g without constant term and with d_x(g) = f, or raise NotExactError."""
    if f.constant_term():
        raise ValueError("dx_exactness requires zero constant term")
    g = homotopy(f)
    if d_x(g) != f:
        raise NotExactError("density is not a total x-derivative", _witness(f))
    return g


def _witness(f):
    for fam, vd in variational_gradient(f).items():
        if vd:
            return (fam, vd)
    return None


@dataclass
class Exactness:
    exact: bool
    antiderivative: DiffPoly | None = None
    witness: tuple | None = None


def dx_exactness(f: DiffPoly) -> Exactness:
    """Decide whether ``f`` lies in Im d_x; return antiderivative or a witness."""
    if f.constant_term():
        raise ValueError("dx_exactness requires zero constant term (split constants off first)")
    w = _witness(f)
    if w is not None:
        return Exactness(False, None, w)
    return Exactness(True, antiderivative(f), None)


# ---------------------------------------------------------------------------
# Miura transformations
# ---------------------------------------------------------------------------


def apply_miura(f: DiffPoly, subst: Mapping, target_alphabet=None, check=True) -> DiffPoly:
    """Substitute u^alpha_k -> d_x^k(subst[alpha]) in ``f``.

    ``subst`` maps families ``(tag, index)`` to DiffPolys; families absent from
    the map (eps, hbar, delta symbols) are kept. Negative powers are allowed only
    for families whose image is a single monomial.
    """
    subst = {(_as_var(k).family if not isinstance(k, tuple) else k): v for k, v in subst.items()}
    if check:
        check_miura(subst)
    jets: dict = {}

    def image(fam, k):
        key = (fam, k)
        if key not in jets:
            jets[key] = subst[fam] if k == 0 else d_x(image(fam, k - 1))
        return jets[key]

    powers: dict = {}

    def power(fam, k, e):
        key = (fam, k, e)
        if key not in powers:
            base = image(fam, k)
            if e < 0:
                powers[key] = base ** e
            elif e == 1:
                powers[key] = base
            else:
                powers[key] = power(fam, k, e - 1) * base
        return powers[key]

    out: dict = {}
    alph = target_alphabet
    for m, c in f.terms.items():
        keep = []
        prod = None
        for p, e in decode(m):
            if p < 2:
                keep.append((p, e))
                continue
            fam, k = _unpos(p)
            if fam not in subst:
                keep.append((p, e))
                continue
            t = power(fam, k, e)
            prod = t if prod is None else prod * t
        base_m = encode(keep)
        if prod is None:
            _add_coeff(out, base_m, c)
            continue
        for mm, cc in prod.terms.items():
            _add_coeff(out, mm + base_m, normalize(cc * c))
        alph = _combine_alphabet(alph, prod.alphabet)
    return DiffPoly._raw(out, alph)


def check_miura(subst: Mapping):
    """Invertibility of the dispersionless Jacobian d subst_a / d u^b at eps = hbar = 0."""
    fams = list(subst)
    disp = {a: subst[a].filter(lambda m: _digit(m, 0) == 0 and _digit(m, 1) == 0) for a in fams}
    for a in fams:
        for v in disp[a].variables():
            if v.order:
                raise MiuraError("dispersionless part depends on jets")
    srcs = sorted({v.family for a in fams for v in disp[a].variables()}, key=lambda t: (_TAG_ORDER[t[0]], t[1]))
    if len(srcs) != len(fams):
        raise MiuraError("substitution is not square in the field variables")
    jac = [[partial(disp[a], JetVariable(s[0], s[1], 0)) for s in srcs] for a in fams]
    det = _poly_det(jac)
    if not det:
        raise MiuraError("non-invertible dispersionless Jacobian")


def _poly_det(mat):
    n = len(mat)
    if n == 0:
        return const(1)
    if n == 1:
        return mat[0][0]
    tot = const(0)
    for j in range(n):
        if not mat[0][j]:
            continue
        minor = [row[:j] + row[j + 1 :] for row in mat[1:]]
        term = mat[0][j] * _poly_det(minor)
        tot = tot + term if j % 2 == 0 else tot - term
    return tot


def invert_triangular_miura(forward: Mapping, source_order, target_alphabet) -> dict:
    """Invert a Miura map ``target^a = forward[a](source)`` that is triangular.

    ``forward`` maps target families to DiffPolys in the source alphabet;
    ``source_order`` lists pairs (target family, source family) in solving order:
    each ``forward[t]`` must equal ``c * source + R`` with constant ``c`` and
    ``R`` depending only on sources solved earlier. Returns source family -> DiffPoly
    in the target alphabet.
    """
    inv: dict = {}
    for tfam, sfam in source_order:
        f = forward[tfam]
        lin = f.filter(lambda m, p=JetVariable(sfam[0], sfam[1], 0).position: decode(m) == ((p, 1),))
        if len(lin.terms) != 1:
            raise MiuraError(f"{tfam} is not triangular in {sfam}")
        c = next(iter(lin.terms.values()))
        rest = f - lin
        for v in rest.variables():
            if v.family not in inv:
                raise MiuraError(f"{tfam} depends on unsolved {v.family}")
        rest_t = apply_miura(rest, inv, target_alphabet, check=False) if rest else const(0)
        inv[sfam] = with_alphabet((var(tfam[0], tfam[1]) - rest_t).scale(1 / to_scalar(c) if isinstance(c, Scalar) else 1 / c), target_alphabet)
    return inv


def rescale_eps(f: DiffPoly, sqrt2_power_per_eps: int = -1) -> DiffPoly:
    """Substitute eps -> eps * sqrt2**(sqrt2_power_per_eps): eps^n gets 2^(n*s/2)."""
    out = {}
    for m, c in f.terms.items():
        n = _digit(m, 0) * sqrt2_power_per_eps
        half, odd = divmod(n, 2)
        fac = mpq(2) ** half
        if odd:
            out[m] = normalize(to_scalar(c) * Scalar(0, 0, fac, 0))
        else:
            out[m] = c * fac
    return DiffPoly._raw(out, f.alphabet)


def rename_alphabet(f: DiffPoly, mapping: Mapping) -> DiffPoly:
    """Relabel variable families (e.g. u -> ut) without changing coefficients."""
    out = {}
    alph = None
    for m, c in f.terms.items():
        pairs = []
        for p, e in decode(m):
            if p >= 2:
                fam, k = _unpos(p)
                fam = mapping.get(fam, fam)
                alph = _combine_alphabet(alph, _FAMILY[fam[0]])
                p = _pos(fam[0], fam[1], k)
            pairs.append((p, e))
        out[encode(pairs)] = c
    return DiffPoly._raw(out, alph)


# ---------------------------------------------------------------------------
# Local functionals
# ---------------------------------------------------------------------------


class LocalFunctional:
    """A density modulo Im d_x and constants (eps/hbar-only terms).

    The constant part is carried separately (``constant``) for reporting, but
    equality is decided by the variational derivatives alone, since constants
    lie in the quotient's kernel.
    """

    __slots__ = ("density", "constant")

    def __init__(self, density: DiffPoly):
        self.density = density.field_part()
        self.constant = density.constant_part()

    def gradient(self, families=None):
        return variational_gradient(self.density, families)

    def __eq__(self, other):
        if not isinstance(other, LocalFunctional):
            return NotImplemented
        return functional_difference(self.density, other.density) is None

    def __add__(self, other):
        return LocalFunctional(self.density + other.density)

    def __sub__(self, other):
        return LocalFunctional(self.density - other.density)

    def scale(self, c):
        return LocalFunctional(self.density.scale(c))

    def __repr__(self):
        return f"LocalFunctional({self.density!r})"


def functional_difference(f: DiffPoly, g: DiffPoly):
    """None if f and g define the same local functional, else a witness (family, delta)."""
    return _witness((f - g).field_part())


# ---------------------------------------------------------------------------
# Quotient modulo Im d_x
# ---------------------------------------------------------------------------


def _block_key(m):
    """Invariants preserved by d_x: eps/hbar powers, field multiset, jet count."""
    eps = hb = 0
    fams = []
    jets = 0
    for p, e in decode(m):
        if p == 0:
            eps = e
        elif p == 1:
            hb = e
        else:
            k, slot = divmod(p - 2, NSLOT)
            fams.extend([slot] * e)
            jets += k * e
    return (eps, hb, tuple(sorted(fams)), jets)


def _partitions(total, parts, maxpart=None):
    """Non-increasing tuples of ``parts`` non-negative ints summing to ``total``."""
    if maxpart is None:
        maxpart = total
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(min(total, maxpart), -1, -1):
        if first * parts < total:
            break
        for rest in _partitions(total - first, parts - 1, first):
            yield (first,) + rest


def block_monomials(block) -> list:
    """All packed monomials in a block ``(eps, hbar, slot multiset, jet count)``."""
    eps, hb, slots, jets = block
    counts: dict = {}
    for s in slots:
        counts[s] = counts.get(s, 0) + 1
    items = sorted(counts.items())
    out = []

    def rec(i, left, acc):
        if i == len(items):
            if left == 0:
                out.append(acc)
            return
        slot, c = items[i]
        for j in range(left, -1, -1) if i < len(items) - 1 else (left,):
            for orders in _partitions(j, c):
                m = acc
                for k in orders:
                    m += _unit(2 + k * NSLOT + slot)
                rec(i + 1, left - j, m)

    rec(0, jets, (eps << 0) + (hb << _BITS))
    return out


def _jet_key(m):
    orders = []
    for p, e in decode(m):
        if p >= 2:
            orders.extend([(p - 2) // NSLOT] * e)
    return (tuple(sorted(orders, reverse=True)), m)


@functools.lru_cache(maxsize=4096)
def _block_echelon(block):
    """Echelon basis of d_x(block one jet lower); pivots are highest-jet monomials."""
    from .scalars import Echelon

    ech = Echelon(key=_jet_key)
    eps, hb, slots, jets = block
    if jets == 0 or not slots:
        return ech
    for m in block_monomials((eps, hb, slots, jets - 1)):
        ech.insert(dict(d_x(DiffPoly._raw({m: mpq(1)}, None)).terms))
    return ech


def quotient_basis(monomials) -> list:
    """Representatives of the classes of ``monomials`` modulo Im d_x.

    Blocks containing the given monomials are completed; within each block the
    exact relations d_x(m') eliminate the monomial with the highest jet order,
    and the surviving monomials form the basis (sorted canonically).
    """
    blocks = {_block_key(m) for m in monomials}
    out = []
    for b in sorted(blocks):
        piv = _block_echelon(b).pivots
        out.extend(m for m in block_monomials(b) if m not in piv)
    return sorted(out, key=monomial_sort_key)


def reduce_modulo_dx(f: DiffPoly) -> DiffPoly:
    """Canonical representative of the class of ``f`` in A / Im d_x.

    Two densities define the same local functional (up to constants) iff their
    reductions agree on the field part.
    """
    by_block: dict = {}
    for m, c in f.terms.items():
        by_block.setdefault(_block_key(m), {})[m] = c
    out: dict = {}
    for b, vec in by_block.items():
        if not b[2]:
            out.update(vec)
            continue
        out.update(_block_echelon(b).reduce(vec))
    return DiffPoly(out, f.alphabet)
