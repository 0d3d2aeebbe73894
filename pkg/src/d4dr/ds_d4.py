"""The D4 Drinfeld–Sokolov layer: Lax operators, tau-symmetric densities, normal
coordinates, and both Poisson brackets.

All internal computations use the raw product convention in which each
derivative moved through a coefficient carries one factor of eps. Results in
normal coordinates are *presented* after the global substitution
eps -> eps/sqrt2 (:func:`present`), which is the convention of the printed tables.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field

from .diffpoly import (
    DiffPoly,
    apply_miura,
    const,
    d_x,
    invert_triangular_miura,
    partial,
    rescale_eps,
    var,
    variational_derivative,
    with_alphabet,
)
from .psido import (
    PsiDO1,
    PsiDO2,
    StructureError,
    TruncationError,
    adjoint,
    nth_root_first,
    op_apply,
    psido_mul,
    sqrt_second,
)
from .scalars import mpq

__all__ = [
    "DSConfig",
    "LaxData",
    "DSData",
    "PoissonMatrix",
    "ETA_DS",
    "ETA_DS_INV",
    "build_lax",
    "ds_data",
    "present",
    "unpresent",
    "normal_coordinates",
    "res_Q3_reduced",
    "tau_density",
    "tau_density_s",
    "variational_differential",
    "bracket_density",
    "build_lax_v",
    "ut_of_v",
    "v_of_ut",
    "v_of_s",
    "s_of_v",
    "TABLE",
    "bracket_ds",
    "poisson_matrix_first",
    "flow_derivative",
]

#: DS metric eta^{alpha beta} and its inverse eta_{alpha beta}
ETA_DS = {(1, 3): mpq(6), (3, 1): mpq(6), (2, 2): mpq(6), (4, 4): mpq(2)}
ETA_DS_INV = {k: 1 / v for k, v in ETA_DS.items()}
SPECTRUM = {1: mpq(-1, 3), 2: mpq(0), 3: mpq(1, 3), 4: mpq(0)}


@dataclass(frozen=True)
class DSConfig:
    """Truncation budget for the DS pipeline.

    ``root_floor`` is the lowest order of the 6th root P that is computed; the
    deepest consumer (res P^13 = res L^2 P) needs -13. ``q_ceiling`` bounds the
    graded components of the square root Q.
    """

    root_floor: int = -13
    lax_floor: int = -14
    q_ceiling: int = 7
    q_floor: int = -8
    bracket_floor: int = -14


@dataclass
class LaxData:
    alphabet: str
    L: PsiDO1
    Lt: PsiDO1
    vt_of_v: dict | None = None  # v-alphabet only: vt^mu as DiffPoly in v


def _lax_s(floor: int) -> PsiDO1:
    """L = d^6 + d^-1 sum_mu (s^mu d^{2mu-1} + d^{2mu-1} s^mu) + d^-1 rho d^-1 rho."""
    inner = PsiDO1({}, None)
    for mu in (1, 2, 3):
        s = PsiDO1.mult(var("s", mu))
        inner = inner + psido_mul(s, PsiDO1.d(2 * mu - 1)) + psido_mul(PsiDO1.d(2 * mu - 1), s)
    rho = PsiDO1.mult(var("rho"))
    dm1 = PsiDO1.d(-1)
    tail = psido_mul(psido_mul(dm1, rho, floor - 2), psido_mul(dm1, rho, floor - 2), floor)
    L = PsiDO1({6: const(1)}, None) + psido_mul(dm1, inner, floor) + tail
    return PsiDO1({k: with_alphabet(v, "s") for k, v in L.coeffs.items()}, L.floor, True)


def _lt_s(floor: int) -> PsiDO1:
    """L~ = d o L = d^7 + sum_mu (s^mu d^{2mu-1} + d^{2mu-1} s^mu) + rho d^-1 rho."""
    out = PsiDO1({7: const(1)}, None)
    for mu in (1, 2, 3):
        s = PsiDO1.mult(var("s", mu))
        out = out + psido_mul(s, PsiDO1.d(2 * mu - 1)) + psido_mul(PsiDO1.d(2 * mu - 1), s)
    rho = PsiDO1.mult(var("rho"))
    out = out + psido_mul(rho, psido_mul(PsiDO1.d(-1), rho, floor), floor)
    return out


def v_of_s() -> dict:
    """Miura map v^mu(s) read off as the coefficient of d^{2mu-1} in L~ (raw eps)."""
    Lt = _lt_s(-2)
    return {("v", mu): with_alphabet(Lt.coeffs[2 * mu - 1], "s") for mu in (1, 2, 3)} | {("rho", 0): var("rho")}


@functools.lru_cache(maxsize=None)
def s_of_v() -> dict:
    fwd = v_of_s()
    inv = invert_triangular_miura(fwd, [(("v", 3), ("s", 3)), (("v", 2), ("s", 2)), (("v", 1), ("s", 1)), (("rho", 0), ("rho", 0))], "v")
    return inv


def build_lax(alphabet: str = "s", floor: int = -14) -> LaxData:
    """Construct L and L~ in the s- or v-alphabet and check L~* + L~ = 0."""
    if alphabet == "s":
        L = _lax_s(floor)
        Lt = _lt_s(floor)
        lt_check = Lt
        vt = None
    elif alphabet == "v":
        Lt_s = _lt_s(floor)
        sv = s_of_v()
        vt = {}
        for mu in (1, 2, 3):
            vt[mu] = apply_miura(Lt_s.coeffs.get(2 * mu - 2, const(0)), sv, "v", check=False)
        coeffs = {7: const(1)}
        for mu in (1, 2, 3):
            coeffs[2 * mu - 1] = var("v", mu)
            if vt[mu]:
                coeffs[2 * mu - 2] = vt[mu]
        rho = PsiDO1.mult(var("rho"))
        Lt = PsiDO1(coeffs, None) + psido_mul(rho, psido_mul(PsiDO1.d(-1), rho, floor), floor)
        Lt = PsiDO1({k: with_alphabet(v, "v") for k, v in Lt.coeffs.items()}, Lt.floor)
        L = psido_mul(PsiDO1.d(-1), Lt, floor - 1)
        lt_check = Lt
    else:
        raise ValueError(f"unsupported Lax alphabet {alphabet!r}")
    total = adjoint(lt_check) + lt_check
    if any(total.coeffs.values()):
        raise StructureError("construction bug: L~* + L~ does not vanish")
    return LaxData(alphabet, L, Lt, vt)


def present(f: DiffPoly) -> DiffPoly:
    """Presentation rescaling eps -> eps/sqrt2 used by the printed tables."""
    return rescale_eps(f, -1)


def unpresent(f: DiffPoly) -> DiffPoly:
    return rescale_eps(f, 1)


# ---------------------------------------------------------------------------
# Roots, normal coordinates, densities
# ---------------------------------------------------------------------------


@dataclass
class DSData:
    """Shared DS objects (computed once): L, the root P and its powers, and the
    forward/inverse normal-coordinate maps (raw eps)."""

    config: DSConfig
    lax: LaxData
    P: PsiDO1
    P_powers: dict
    ut_of_s: dict
    s_of_ut: dict
    _res_cache: dict = field(default_factory=dict)
    _Q: PsiDO2 | None = None

    def res_P(self, n: int) -> DiffPoly:
        """res P^n for odd n, via P^n = L^q P^r (n = 6q + r)."""
        if n in self._res_cache:
            return self._res_cache[n]
        q, r = divmod(n, 6)
        Pr = self.P_powers[r]
        need = -1 - 6 * q
        if Pr.floor is not None and Pr.floor > need:
            raise TruncationError(f"res P^{n}: root truncation too shallow (need P^{r} to order {need})")
        if q == 0:
            out = Pr.res()
        else:
            L = self.lax.L
            Lq = L.truncate(-1 - r - 6 * (q - 1))
            for j in range(q - 1):
                Lq = psido_mul(Lq, L, -1 - r - 6 * (q - 2 - j))
            out = psido_mul(Lq, Pr, -1).res()
        self._res_cache[n] = out
        return out

    @property
    def Q(self) -> PsiDO2:
        if self._Q is None:
            c = self.config
            L = _lax_s(c.q_floor - c.q_ceiling - 1)
            self._Q = sqrt_second(L, c.q_ceiling, c.q_floor)
        return self._Q

    def to_ut(self, f: DiffPoly, presented: bool = True) -> DiffPoly:
        out = apply_miura(f, self.s_of_ut, "ut", check=False)
        return present(out) if presented else out


@functools.lru_cache(maxsize=4)
def ds_data(config: DSConfig = DSConfig()) -> DSData:
    lax = build_lax("s", config.lax_floor)
    root = nth_root_first(lax.L.truncate(config.root_floor + 5), 6, config.root_floor)
    data = DSData(config, lax, root.P, root.powers, {}, {})
    fwd = {
        ("ut", 1): data.res_P(5).scale(mpq(6, 5)),
        ("ut", 2): data.res_P(3).scale(2),
        ("ut", 3): data.res_P(1).scale(6),
        ("ut", 4): var("rho").scale(2),
    }
    data.ut_of_s = fwd
    data.s_of_ut = invert_triangular_miura(
        fwd,
        [(("ut", 3), ("s", 3)), (("ut", 2), ("s", 2)), (("ut", 1), ("s", 1)), (("ut", 4), ("rho", 0))],
        "ut",
    )
    return data


def normal_coordinates(config: DSConfig = DSConfig(), presented: bool = True) -> tuple[dict, dict]:
    """Forward map ut(s) and inverse s(ut); presented with eps -> eps/sqrt2 if requested."""
    data = ds_data(config)
    fwd = {k: present(v) if presented else v for k, v in data.ut_of_s.items()}
    inv = {k: present(v) if presented else v for k, v in data.s_of_ut.items()}
    return fwd, inv


def res_Q3_reduced(data: DSData) -> DiffPoly:
    """res Q^3 = res(d^-1 rho L) + rho * (1/2) L_+(1) (raw eps, s-alphabet)."""
    rho = PsiDO1.mult(var("rho"))
    term1 = psido_mul(psido_mul(PsiDO1.d(-1), rho, -8), data.lax.L.truncate(-8), -1).res()
    half_lplus = op_apply(data.lax.L.plus(), const(1)).scale(mpq(1, 2))
    return term1 + var("rho") * half_lplus


TABLE = {(a, -1) for a in (1, 2, 3, 4)} | {(a, 0) for a in (1, 2, 3, 4)} | {(1, 1)}


def tau_density_s(alpha: int, p: int, config: DSConfig = DSConfig()) -> DiffPoly:
    """h_{alpha,p} in the s-alphabet with raw eps."""
    if (alpha, p) not in TABLE:
        raise NotImplementedError(f"density h_{{{alpha},{p}}} is outside the computed table")
    data = ds_data(config)
    pp = p + 1  # h_{alpha, pp-1}
    if alpha == 4:
        if pp == 0:
            return var("rho")
        return res_Q3_reduced(data).scale(mpq(2, 3))
    fac = mpq(6) ** pp
    for j in range(pp + 1):
        fac /= 2 * alpha - 1 + 6 * j
    return data.res_P(6 * pp + 2 * alpha - 1).scale(fac)


def tau_density(alpha: int, p: int, config: DSConfig = DSConfig(), presented: bool = True) -> DiffPoly:
    """h_{alpha,p} in normal coordinates ut."""
    data = ds_data(config)
    return data.to_ut(tau_density_s(alpha, p, config), presented)


# ---------------------------------------------------------------------------
# Brackets
# ---------------------------------------------------------------------------


def _vd_v4(f: DiffPoly) -> DiffPoly:
    """delta f / delta v^4 = (1 / (2 rho)) delta f / delta rho, since v^4 = rho^2."""
    d = variational_derivative(f, ("rho", 0))
    return d * (var("rho") ** -1).scale(mpq(1, 2)) if d else d


def variational_differential(f: DiffPoly, floor: int) -> PsiDO1:
    """X = df/dv^4 + 1/2 sum_mu (df/dv^mu d^{-2mu} + d^{-2mu} df/dv^mu), valid to ``floor``."""
    X = PsiDO1.mult(_vd_v4(f))
    for mu in (1, 2, 3):
        g = variational_derivative(f, ("v", mu))
        if not g:
            continue
        G = PsiDO1.mult(g)
        Dm = PsiDO1.d(-2 * mu)
        X = X + (psido_mul(G, Dm, floor) + psido_mul(Dm, G, floor)).scale(mpq(1, 2))
    return X.truncate(floor)


def _plus(X):
    return X.plus()


def _minus(X, floor):
    return X.minus().truncate(floor)


def bracket_density(f: DiffPoly, g: DiffPoly, which: int = 1, lax: LaxData | None = None, floor: int = -14) -> DiffPoly:
    """A density of {f, g}_which (v-alphabet, raw eps), including the eps^-1 prefactor."""
    lax = lax or build_lax("v", floor)
    Lt = lax.Lt.truncate(floor)
    X = variational_differential(f, floor)
    Y = variational_differential(g, floor)
    D = PsiDO1.d(1)
    if which == 1:
        Yp, Ym = Y.plus(), Y.minus()
        Z = (
            _minus(psido_mul(psido_mul(D, Yp), Lt, floor), floor)
            - _minus(psido_mul(psido_mul(Lt, Yp, floor), D, floor), floor)
            - psido_mul(psido_mul(D, Ym, floor), Lt, floor).plus()
            + psido_mul(psido_mul(Lt, Ym, floor), D, floor).plus()
        )
    elif which == 2:
        Z = psido_mul(psido_mul(Lt, Y, floor).plus(), Lt, floor) - psido_mul(Lt, psido_mul(Y, Lt, floor).plus(), floor)
    else:
        raise ValueError("which must be 1 or 2")
    r = psido_mul(X, Z.truncate(floor), -1).res()
    return r.shift(eps=-1)


def bracket_ds(f, g, which: int = 1, floor: int = -14):
    """{f, g}_which as a LocalFunctional (v-alphabet densities)."""
    from .diffpoly import LocalFunctional

    f = f.density if isinstance(f, LocalFunctional) else f
    g = g.density if isinstance(g, LocalFunctional) else g
    return LocalFunctional(bracket_density(f, g, which, build_lax_v(floor), floor))


@functools.lru_cache(maxsize=4)
def build_lax_v(floor: int = -14) -> LaxData:
    return build_lax("v", floor)


def ut_of_v(config: DSConfig = DSConfig()) -> dict:
    """Miura map ut(v) (raw eps): compose ut(s) with s(v)."""
    data = ds_data(config)
    sv = s_of_v()
    return {k: apply_miura(v, sv, "v", check=False) for k, v in data.ut_of_s.items()}


def v_of_ut(config: DSConfig = DSConfig()) -> dict:
    data = ds_data(config)
    fwd = v_of_s()
    return {k: apply_miura(v, data.s_of_ut, "ut", check=False) for k, v in fwd.items()}


# ---------------------------------------------------------------------------
# Poisson matrix
# ---------------------------------------------------------------------------


@dataclass
class PoissonMatrix:
    """Square table of differential operators ``{(a, b): {k: coefficient of d^k}}``."""

    indices: tuple
    entries: dict

    def entry(self, a, b) -> dict:
        return self.entries.get((a, b), {})

    def as_psido(self, a, b) -> PsiDO1:
        return PsiDO1(dict(self.entry(a, b)), None, False)

    def __eq__(self, other):
        if not isinstance(other, PoissonMatrix):
            return NotImplemented
        if self.indices != other.indices:
            return False
        for a in self.indices:
            for b in self.indices:
                x = {k: v for k, v in self.entry(a, b).items() if v}
                y = {k: v for k, v in other.entry(a, b).items() if v}
                if x != y:
                    return False
        return True

    def diff(self, other) -> list:
        """List of (a, b, k, difference) for mismatching coefficients."""
        out = []
        for a in self.indices:
            for b in self.indices:
                x, y = self.entry(a, b), other.entry(a, b)
                for k in sorted(set(x) | set(y)):
                    d = x.get(k, const(0)) - y.get(k, const(0))
                    if d:
                        out.append((a, b, k, d))
        return out

    def is_antisymmetric(self) -> bool:
        for a in self.indices:
            for b in self.indices:
                lhs = self.as_psido(b, a)
                rhs = -adjoint(self.as_psido(a, b))
                if any((lhs - rhs).coeffs.values()):
                    return False
        return True

    def map(self, fn) -> "PoissonMatrix":
        return PoissonMatrix(self.indices, {ab: {k: fn(v) for k, v in e.items()} for ab, e in self.entries.items()})

    def apply(self, a: int, vec: dict) -> DiffPoly:
        """sum_b K^{ab}(vec[b]) with bare derivatives."""
        out = const(0)
        for b in self.indices:
            for k, c in self.entry(a, b).items():
                f = vec.get(b)
                if f is None or not f:
                    continue
                for _ in range(k):
                    f = d_x(f)
                out = out + c * f
        return out


def _delta_var(tag, k=0):
    return var(tag, 0, k)


def poisson_matrix_first(config: DSConfig = DSConfig(), presented: bool = True) -> PoissonMatrix:
    """K^{ab} of {,}_1 in normal coordinates via the coordinate functionals
    ut^a(z) delta(x - z), ut^b(z) delta(y - z).

    The delta function and its z-derivatives are the jet family ``dx`` (resp.
    ``dy``); the residue density is integrated over z by moving derivatives off
    ``dx`` and the surviving ``dy_k`` is read as d^k.
    """
    utv = ut_of_v(config)
    lax = build_lax_v(config.bracket_floor)
    vu = v_of_ut(config)
    vu_full = dict(vu)
    vu_full[("rho", 0)] = var("ut", 4).scale(mpq(1, 2))
    entries = {}
    for a in (1, 2, 3, 4):
        fa = utv[("ut", a)] * _delta_var("dx")
        for b in (1, 2, 3, 4):
            gb = utv[("ut", b)] * _delta_var("dy")
            dens = bracket_density(fa, gb, 1, lax, config.bracket_floor)
            ops = _integrate_delta(dens)
            ops = {k: apply_miura(v, vu_full, "ut", check=False) for k, v in ops.items()}
            if presented:
                ops = {k: present(v) for k, v in ops.items()}
            entries[(a, b)] = {k: v for k, v in ops.items() if v}
    return PoissonMatrix((1, 2, 3, 4), entries)


def _integrate_delta(dens: DiffPoly) -> dict:
    """int c(z) dx_a dy_b dz -> sum_k K_k d^k (see :func:`poisson_matrix_first`)."""
    from .diffpoly import decode, _unpos, DiffPoly as DP, encode

    out: dict = {}
    by_a: dict = {}
    for m, c in dens.terms.items():
        a = None
        rest = []
        for p, e in decode(m):
            if p >= 2:
                fam, k = _unpos(p)
                if fam == ("dx", 0):
                    if e != 1 or a is not None:
                        raise StructureError("coordinate-functional density not linear in delta(x-z)")
                    a = k
                    continue
            rest.append((p, e))
        if a is None:
            raise StructureError("term without delta(x-z) in coordinate-functional density")
        by_a.setdefault(a, {})[encode(rest)] = c
    for a, terms in by_a.items():
        f = DP._raw(terms, dens.alphabet)
        for _ in range(a):
            f = -d_x(f)
        for m, c in f.terms.items():
            b = None
            rest = []
            for p, e in decode(m):
                if p >= 2:
                    fam, k = _unpos(p)
                    if fam == ("dy", 0):
                        if e != 1 or b is not None:
                            raise StructureError("density not linear in delta(y-z)")
                        b = k
                        continue
                rest.append((p, e))
            if b is None:
                raise StructureError("term without delta(y-z)")
            cur = out.setdefault(b, {})
            mm = encode(rest)
            cur[mm] = cur.get(mm, 0) + c
    res = {}
    for b, terms in out.items():
        p = DP({k: v for k, v in terms.items() if v}, dens.alphabet)
        if p:
            res[b] = p
    return res


# ---------------------------------------------------------------------------
# Flows and tau symmetry
# ---------------------------------------------------------------------------


def flow_derivative(h: DiffPoly, hamiltonian: DiffPoly, K: PoissonMatrix, family_tag: str = "ut") -> DiffPoly:
    """Time derivative of the density ``h`` along the flow of ``int hamiltonian``:
    sum_{a,k} dh/d u^a_k d_x^k (K^{ab} delta H / delta u^b)."""
    grad = {b: variational_derivative(hamiltonian, (family_tag, b)) for b in K.indices}
    vel = {a: K.apply(a, grad) for a in K.indices}
    out = const(0)
    for v in sorted(h.variables()):
        if v.tag != family_tag:
            continue
        dv = vel[v.index]
        for _ in range(v.order):
            dv = d_x(dv)
        out = out + partial(h, v) * dv
    return out
