"""Quantum double ramification hierarchy of the D4 CohFT.

The star-commutator quantizing eta^{ab} d_x is

    [f, g-bar] = sum_{n>=1} (-i)^{n-1} hbar^n / n!  sum  d^n f / du^{a_1}_{s_1}..du^{a_n}_{s_n}
                 (-1)^{sum r_k} prod eta^{a_k b_k}
                 sum_j C_j^{s_1+r_1+1, .., s_n+r_n+1} d_x^j d^n g / du^{b_1}_{r_1}..du^{b_n}_{r_n},

with C_j the signed polylogarithm product coefficients. The quantum dilaton
operator counts fields, eps and twice hbar.
"""
from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass

from .diffpoly import (
    HBAR,
    DiffPoly,
    LocalFunctional,
    const,
    d_x,
    dx_exactness,
    homotopy,
    monomial_dilaton,
    monomial_field_count,
    partial,
    quotient_basis,
    variational_derivative,
    with_alphabet,
)
from .dr_classical import (
    D4,
    Affine,
    AmbiguityError,
    CohftData,
    ModelError,
    NotDRTypeError,
    _VelocityJets,
    _dedupe,
    _field_monomials,
    _map_terms,
    _vd_rows,
    bracket_with_velocities,
    dr_hierarchy,
    is_trivial_functional,
    velocities,
)
from .scalars import I, InconsistentSystemError, LinearSystem, mpq, normalize, solve_linear_system

__all__ = [
    "polylog_ctilde",
    "polylog_signed",
    "polylog_series_check",
    "polylog_table",
    "commutator_term",
    "quantum_bracket",
    "quantum_dilaton_inverse",
    "quantum_recursion_step",
    "quantum_hierarchy",
    "quantum_commutativity_failures",
    "unit_derivative_defects",
    "QuantumHamiltonian",
    "QuantumSolveResult",
    "solve_quantum_g11",
]


# ---------------------------------------------------------------------------
# Polylogarithm product coefficients
# ---------------------------------------------------------------------------


def _series_coeff(ds: tuple, N: int) -> int:
    """Coefficient of z^N in prod_i Li_{-d_i}(z) = sum over compositions of N."""
    # dynamic programming over factors
    row = [k ** ds[0] for k in range(N + 1)]
    for d in ds[1:]:
        f = [k ** d for k in range(N + 1)]
        row = [sum(row[i] * f[m - i] for i in range(m + 1)) for m in range(N + 1)]
    return row[N]


@functools.lru_cache(maxsize=None)
def _ctilde_sorted(ds: tuple) -> tuple:
    n = len(ds)
    M = n - 1 + sum(ds)
    # coefficient of z^N is a polynomial p(N) of degree M with p(0) = 0:
    # solve the Vandermonde system p(N) = sum_j c_j N^j at N = 1..M
    matrix = [[mpq(N) ** j for j in range(1, M + 1)] for N in range(1, M + 1)]
    rhs = [mpq(_series_coeff(ds, N)) for N in range(1, M + 1)]
    sol = solve_linear_system(LinearSystem.from_dense(matrix, rhs))
    return tuple(sol.particular)


def polylog_ctilde(*ds) -> list:
    """C~_j, j = 1..(n - 1 + sum d_i), with prod Li_{-d_i} = sum_j C~_j Li_{-j}."""
    if len(ds) == 1 and isinstance(ds[0], (tuple, list)):
        ds = tuple(ds[0])
    if not ds or any(d < 1 for d in ds):
        raise ValueError("polylog_ctilde needs n >= 1 exponents, each >= 1")
    return list(_ctilde_sorted(tuple(sorted(ds))))


def polylog_signed(*a) -> list:
    """C_j (j = 1..M): (-1)^{(M - j)/2} C~_j when j = M mod 2, else 0 (M = n - 1 + sum a)."""
    if len(a) == 1 and isinstance(a[0], (tuple, list)):
        a = tuple(a[0])
    ct = polylog_ctilde(*a)
    M = len(a) - 1 + sum(a)
    out = []
    for j, c in enumerate(ct, 1):
        if (M - j) % 2:
            out.append(mpq(0))
        else:
            out.append(c if ((M - j) // 2) % 2 == 0 else -c)
    return out


def polylog_series_check(*ds, order: int | None = None) -> bool:
    """Compare both sides of the decomposition as power series up to z^order (default 2M)."""
    if len(ds) == 1 and isinstance(ds[0], (tuple, list)):
        ds = tuple(ds[0])
    ct = polylog_ctilde(*ds)
    M = len(ds) - 1 + sum(ds)
    order = 2 * M if order is None else order
    for N in range(order + 1):
        lhs = _series_coeff(tuple(ds), N)
        rhs = sum(c * mpq(N) ** j for j, c in enumerate(ct, 1))
        if lhs != rhs:
            return False
    return True


def polylog_table(max_n: int = 3, max_sum: int = 6) -> dict:
    """All C~ vectors for sorted tuples with n <= max_n and sum <= max_sum."""
    out = {}

    def rec(prefix, left):
        if prefix:
            out[tuple(prefix)] = polylog_ctilde(*prefix)
        if len(prefix) == max_n:
            return
        start = prefix[-1] if prefix else 1
        for d in range(start, left + 1):
            rec(prefix + [d], left - d)

    rec([], max_sum)
    return out


# ---------------------------------------------------------------------------
# Star commutator
# ---------------------------------------------------------------------------


class _DerivativeTable:
    """Cached mixed partial derivatives of a density and their x-derivatives."""

    def __init__(self, g: DiffPoly):
        self.g = g
        self.parts = {(): g}
        self.xders = {}

    def part(self, key: tuple) -> DiffPoly:
        key = tuple(sorted(key))
        out = self.parts.get(key)
        if out is None:
            out = partial(self.part(key[:-1]), key[-1])
            self.parts[key] = out
        return out

    def xder(self, key: tuple, j: int) -> DiffPoly:
        key = tuple(sorted(key))
        js = self.xders.get(key)
        if js is None:
            js = self.xders[key] = [self.part(key)]
        while len(js) <= j:
            js.append(d_x(js[-1]))
        return js[j]


def _u_vars(f: DiffPoly):
    return sorted(v for v in f.variables() if v.tag == "u")


def commutator_term(f: DiffPoly, g, n: int, cohft: CohftData = D4, gtable: _DerivativeTable | None = None) -> DiffPoly:
    """The n-th summand of [f, g-bar] without its hbar^n factor, i.e.
    (-i)^{n-1}/n! * (sum over derivative indices ...)."""
    g = g.density if isinstance(g, LocalFunctional) else g
    gt = gtable or _DerivativeTable(g)
    fvars = _u_vars(f)
    gvars = _u_vars(g)
    eta = cohft.eta_inv
    out = const(0)
    pref = (-I) ** (n - 1) if n > 1 else 1

    # f side: multisets of variables (each weighted by 1/prod mult!)
    def f_multisets(start, chosen, cur):
        if len(chosen) == n:
            yield tuple(chosen), cur
            return
        for i in range(start, len(fvars)):
            nxt = partial(cur, fvars[i])
            if nxt:
                yield from f_multisets(i, chosen + [fvars[i]], nxt)

    for fkey, fn in f_multisets(0, [], f):
        mult = 1
        for v in set(fkey):
            mult *= math.factorial(fkey.count(v))
        acc = const(0)

        # g side: ordered tuples paired position-by-position with fkey
        def g_tuples(k, chosen, sign, etaprod):
            if k == n:
                yield tuple(chosen), sign, etaprod
                return
            a = fkey[k].index
            for w in gvars:
                c = eta.get((a, w.index))
                if not c or not gt.part(tuple(chosen) + (w,)):
                    continue
                yield from g_tuples(k + 1, chosen + [w], sign * (-1) ** w.order, etaprod * c)

        for gkey, sign, etaprod in g_tuples(0, [], 1, mpq(1)):
            if not gt.part(gkey):
                continue
            avec = tuple(fkey[k].order + gkey[k].order + 1 for k in range(n))
            cs = polylog_signed(*avec)
            inner = const(0)
            for j, c in enumerate(cs, 1):
                if c:
                    dj = gt.xder(gkey, j)
                    if dj:
                        inner = inner + dj.scale(c)
            if inner:
                acc = acc + inner.scale(sign * etaprod)
        if acc:
            out = out + (fn * acc).scale(mpq(1, mult))
    # ordered f-tuples / n! = multisets / prod(mult!), already applied above
    return out.scale(pref) if n > 1 else out


def _max_degree(f: DiffPoly) -> int:
    return max((monomial_field_count(m) for m in f.terms), default=0)


def quantum_bracket(f: DiffPoly, g, cohft: CohftData = D4, hbar_cap: int | None = None) -> DiffPoly:
    """Density of [f, g-bar] (all n up to the polynomial degrees, or ``hbar_cap``)."""
    g = g.density if isinstance(g, LocalFunctional) else g
    gt = _DerivativeTable(g)
    nmax = min(_max_degree(f), _max_degree(g))
    if hbar_cap is not None:
        nmax = min(nmax, hbar_cap)
    out = const(0)
    hb = const(1)
    for n in range(1, nmax + 1):
        hb = hb * HBAR
        t = commutator_term(f, g, n, cohft, gt)
        if t:
            out = out + hb * t
    return out


def quantum_dilaton_inverse(f: DiffPoly) -> DiffPoly:
    """(D - 1)^{-1} for the quantum dilaton operator (fields + eps + 2 hbar)."""
    bad = f.filter(lambda m: monomial_dilaton(m, True) == 1)
    if bad:
        raise NotDRTypeError("input has a component in ker(D - 1)", bad)
    return _map_terms(f, lambda m: mpq(1, monomial_dilaton(m, True) - 1))


def _scaled_commutator(f: DiffPoly, gt: _DerivativeTable, vel: _VelocityJets, cohft, hbar_max=None) -> DiffPoly:
    """(1/hbar)[f, g-bar]: the n = 1 term through velocities, the rest through the star sum."""
    out = bracket_with_velocities(f, vel)
    nmax = min(_max_degree(f), _max_degree(gt.g))
    hb = const(1)
    for n in range(2, nmax + 1):
        hb = hb * HBAR
        t = commutator_term(f, gt.g, n, cohft, gt)
        if t:
            out = out + hb * t
    if hbar_max is not None:
        out = out.truncate(hbar_max=hbar_max)
    return out


def quantum_recursion_step(G_prev: DiffPoly, G11, cohft: CohftData = D4, hbar_max: int | None = None, _cache=None) -> DiffPoly:
    """Solve d_x (D - 1) G_next = (1/hbar)[G_prev, G11-bar] (kernel-free)."""
    G11 = G11.density if isinstance(G11, LocalFunctional) else G11
    gt, vel = _cache if _cache is not None else (_DerivativeTable(G11), _VelocityJets(velocities(G11, cohft)))
    rhs = _scaled_commutator(G_prev, gt, vel, cohft, hbar_max)
    ex = dx_exactness(rhs)
    if not ex.exact:
        raise NotDRTypeError("quantum DR recursion: commutator is not a total derivative", ex.witness)
    return quantum_dilaton_inverse(ex.antiderivative)


def quantum_hierarchy(G11, cohft: CohftData = D4, max_d: int = 1, hbar_max: int | None = None) -> dict:
    """Table (alpha, d) -> G_{alpha,d} from G_{alpha,-1} = eta_{alpha mu} u^mu."""
    G11 = G11.density if isinstance(G11, LocalFunctional) else G11
    cache = (_DerivativeTable(G11), _VelocityJets(velocities(G11, cohft)))
    table = {}
    for a in cohft.fields:
        G = cohft.eta_u(a)
        table[(a, -1)] = G
        for d in range(0, max_d + 1):
            G = quantum_recursion_step(G, G11, cohft, hbar_max, cache)
            table[(a, d)] = G
    return table


def quantum_commutativity_failures(table: dict, max_d: int = 1, cohft: CohftData = D4) -> list:
    """Pairs of quantum Hamiltonians G-bar_{alpha,p}, G-bar_{beta,q} (p, q <= max_d) whose commutator is nonzero."""
    keys = sorted(k for k in table if k[1] <= max_d)
    bad = []
    for i, k1 in enumerate(keys):
        for k2 in keys[i + 1 :]:
            if not is_trivial_functional(quantum_bracket(table[k1], table[k2], cohft), cohft):
                bad.append((k1, k2))
    return bad


def unit_derivative_defects(table: dict, cohft: CohftData = D4) -> dict:
    """dG_{alpha,d}/du^1 - G_{alpha,d-1} for every d >= 0, keeping only nonzero entries."""
    out = {}
    for (a, d), G in table.items():
        if d >= 0:
            diff = partial(G, ("u", cohft.unit, 0)) - table[(a, d - 1)]
            if diff:
                out[(a, d)] = diff
    return out


# ---------------------------------------------------------------------------
# Quantum DR-type solver
# ---------------------------------------------------------------------------


@dataclass
class QuantumHamiltonian:
    """G = classical + hbar-correction; ``correction`` holds the hbar terms."""

    classical: DiffPoly
    correction: DiffPoly

    @property
    def density(self) -> DiffPoly:
        return self.classical + self.correction

    @property
    def functional(self) -> LocalFunctional:
        return LocalFunctional(self.density)

    def classical_limit(self) -> DiffPoly:
        return self.density.truncate(hbar_max=0)


@dataclass
class QuantumSolveResult:
    hamiltonian: QuantumHamiltonian
    ansatz_size: int
    rows: int
    rank: int
    nullity_before_normalization: int
    normalization: dict
    seconds: float

    def report(self) -> dict:
        return {
            "ansatz_size": self.ansatz_size,
            "rows": self.rows,
            "rank": self.rank,
            "nullity_before_normalization": self.nullity_before_normalization,
            "normalization": {k: str(v) for k, v in self.normalization.items()},
            "seconds": self.seconds,
        }


def _quantum_ansatz(cohft: CohftData) -> list:
    """hbar * monomials of weight |g11| - |hbar| with differential degree <= 0."""
    total = cohft.hamiltonian_weight(cohft.unit, 1) - cohft.hbar_weight
    raw = []
    e = 0
    while total - e * cohft.eps_weight > 0:
        w = total - e * cohft.eps_weight
        for jets in range(0, e + 3):
            raw += _field_monomials(cohft, w, jets, e, 1)
        e += 1
    return [m for m in quotient_basis(raw) if monomial_field_count(m) >= 1]


def solve_quantum_g11(classical_g11, cohft: CohftData = D4, z_order_cap: int = 2, log=None) -> QuantumSolveResult:
    """Find the hbar-correction X with G11 = g11 + X of quantum DR type.

    |hbar| = 4/3 and |G11| = 7/3 force X to be linear in hbar. All conditions
    are imposed on the hbar^1 parts of the recursion, which are affine in X:

    (a) for every alpha and d = -1..cap-1, (1/hbar)[G_{alpha,d}, G11-bar] at
        hbar^1 is d_x-exact and misses ker(D - 1);
    (b) delta X / delta u^1 is a total derivative plus a constant;
    (c) G_{1,1} equals G11 as a local functional at hbar^1.

    Coefficients are sought in the form i*hbar*(rational). Remaining freedom is
    fixed by Coef_{u^1 i hbar} = -dim V / 24.
    """
    t0 = time.perf_counter()
    g11 = classical_g11.density if isinstance(classical_g11, LocalFunctional) else classical_g11
    cap = max(z_order_cap, 2)
    basis = _quantum_ansatz(cohft)
    lin = {i: DiffPoly({m: I}, "u") for i, m in enumerate(basis)}
    X = Affine(const(0), lin)
    # classical hierarchy (hbar^0 slices)
    table0 = dr_hierarchy(g11, cohft, cap)
    gt0 = _DerivativeTable(g11)
    vel0 = _VelocityJets(velocities(g11, cohft))
    grads = {b: X.map(lambda p, b=b: variational_derivative(p, ("u", b))) for b in cohft.fields}
    velX = {}
    for a in cohft.fields:
        acc = Affine()
        for b in cohft.fields:
            c = cohft.eta_inv.get((a, b))
            if c:
                acc = acc + grads[b].scale(c)
        velX[a] = acc.map(d_x)
    rows = []
    # (b)
    w = grads[cohft.unit].map(lambda p: p.field_part())
    rows += _vd_rows(w, cohft)
    # (a)
    G1 = {}
    for a in cohft.fields:
        cur = Affine()
        G1[(a, -1)] = cur
        for d in range(-1, cap):
            f0 = table0[(a, d)]
            br = cur.map(lambda p: bracket_with_velocities(p, vel0))
            lin_b = {}
            for i in set().union(*[velX[b].lin for b in velX]):
                vi = {b: velX[b].lin.get(i, const(0)) for b in velX}
                lin_b[i] = bracket_with_velocities(f0, vi)
            br = br + Affine(const(0), lin_b)
            t2 = commutator_term(f0, g11, 2, cohft, gt0) if _max_degree(f0) >= 2 else const(0)
            br = br + (HBAR * t2)
            rows += _vd_rows(br, cohft)
            Gn = br.map(homotopy)
            rows += Gn.map(lambda p: p.filter(lambda m: monomial_dilaton(m, True) == 1)).vanishing_rows()
            cur = Gn.map(lambda p: _map_terms(p.filter(lambda m: monomial_dilaton(m, True) != 1), lambda m: mpq(1, monomial_dilaton(m, True) - 1)))
            G1[(a, d + 1)] = cur
    # (c)
    rows += _vd_rows(G1[(cohft.unit, 1)] - X, cohft)
    rows = _dedupe(rows)
    system = LinearSystem([r for r, _ in rows], [b for _, b in rows], list(range(len(basis))))
    try:
        sol = solve_linear_system(system)
    except InconsistentSystemError as exc:
        raise ModelError("quantum DR-type conditions are inconsistent") from exc
    from .diffpoly import monomial

    target = next(iter(monomial(0, 1, [(("u", cohft.unit, 0), 1)]).terms))
    j = basis.index(target)
    want = mpq(-cohft.dim_V, 24)  # coefficient of i*hbar*u^1
    values = list(sol.particular)
    normalization = {"monomial": "I*hbar*u1_0", "coefficient": want}
    if sol.nullity:
        free = [v for v in sol.nullspace if v[j]]
        others = [v for v in sol.nullspace if not v[j]]
        if len(free) != 1 or others:
            raise AmbiguityError(f"quantum solve: nullity {sol.nullity} beyond the normalization direction")
        vec = free[0]
        t = (want - values[j]) / vec[j]
        values = [normalize(values[i] + t * vec[i]) for i in range(len(values))]
        normalization["shift"] = t
    elif values[j] != want:
        raise ModelError(f"normalization conflict: Coef_(u1 i hbar) = {values[j]}, expected {want}")
    correction = with_alphabet(DiffPoly({m: values[i] * I for i, m in enumerate(basis) if values[i]}, "u"), "u")
    ham = QuantumHamiltonian(g11, correction)
    res = QuantumSolveResult(ham, len(basis), len(rows), len(basis) - sol.nullity, sol.nullity, normalization, round(time.perf_counter() - t0, 3))
    if log:
        log(f"quantum: basis {len(basis)}, rows {len(rows)}, nullity {sol.nullity}, {res.seconds}s")
    return res
