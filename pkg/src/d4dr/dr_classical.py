"""Classical double ramification (DR) hierarchy of the D4 CohFT.

Conventions: the DR metric ``eta`` has entries 1/6 (pairs 1-3, 2-2) and 1/2
(pair 4-4); the Poisson structure is ``eta^{ab} d_x`` with plain derivatives
(no eps in the product rule). The dilaton operator is
``D = sum u^a_k d/du^a_k + eps d/deps``.

The DR-type solver determines the eps-dispersive part of ``g_{1,1}`` order by
order in eps^2: at order eps^{2k} every object of the recursion depends
affinely on the unknown eps^{2k} coefficients of the Hamiltonian (products of
two unknowns would sit at eps^{4k} or higher), so the DR-type conditions become exact
linear equations.
"""
from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field
from fractions import Fraction

from .diffpoly import (
    Accumulator,
    DiffPoly,
    LocalFunctional,
    const,
    d_x,
    dx_exactness,
    homotopy,
    invert_triangular_miura,
    apply_miura,
    block_monomials,
    monomial_dilaton,
    monomial_parts,
    partial,
    quotient_basis,
    var,
    variational_derivative,
    with_alphabet,
)
from .ds_d4 import PoissonMatrix
from .psido import PsiDO1, adjoint, psido_mul
from .scalars import LinearSystem, mpq, normalize, solve_linear_system, InconsistentSystemError

__all__ = [
    "CohftData",
    "D4",
    "d4_cohft",
    "NotDRTypeError",
    "AmbiguityError",
    "ModelError",
    "Affine",
    "eta_bracket",
    "functional_bracket",
    "gradient",
    "is_trivial_functional",
    "velocities",
    "bracket_with_velocities",
    "dilaton_D",
    "inverse_dilaton_minus_one",
    "dr_recursion_step",
    "DrDensityTable",
    "dr_hierarchy",
    "genus0_g11",
    "SolverConfig",
    "OrderReport",
    "DRSolveResult",
    "solve_dr_g11",
    "eta_operator",
    "normal_miura",
    "transform_hamiltonian_operator",
    "to_normal_coordinates",
    "RestrictedHierarchy",
    "restrict_subhierarchy",
    "SYMMETRIES",
    "apply_linear_symmetry",
    "parity_scan",
]


class NotDRTypeError(ValueError):
    """The DR recursion does not close: a bracket is not exact or hits ker(D-1)."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness


class AmbiguityError(RuntimeError):
    """The DR-type conditions leave more freedom than the eps-rescaling."""


class ModelError(RuntimeError):
    """The DR-type conditions are inconsistent for the given genus-0 data."""


# ---------------------------------------------------------------------------
# CohFT data
# ---------------------------------------------------------------------------


def _invert_matrix(mat: dict, idx: tuple) -> dict:
    rows = [[mat.get((a, b), 0) for b in idx] for a in idx]
    inv = {}
    for j, b in enumerate(idx):
        rhs = [1 if i == j else 0 for i in range(len(idx))]
        try:
            sol = solve_linear_system(LinearSystem.from_dense(rows, rhs))
        except InconsistentSystemError:
            raise ValueError("metric is degenerate") from None
        if sol.nullity:
            raise ValueError("metric is degenerate")
        for i, a in enumerate(idx):
            if sol.particular[i]:
                inv[(a, b)] = sol.particular[i]
    return inv


@dataclass(frozen=True)
class CohftData:
    """Genus-0 data of a homogeneous CohFT as consumed by the DR machinery.

    ``eta`` holds the nonzero entries of the metric (lower indices); ``weights``
    are the CohFT degrees |u^a_k| (independent of k); ``potential_fixture`` names
    the stored Frobenius potential (written in u-variables).
    """

    fields: tuple = (1, 2, 3, 4)
    eta: tuple = (((1, 3), Fraction(1, 6)), ((3, 1), Fraction(1, 6)), ((2, 2), Fraction(1, 6)), ((4, 4), Fraction(1, 2)))
    unit: int = 1
    weights: tuple = ((1, Fraction(1)), (2, Fraction(2, 3)), (3, Fraction(1, 3)), (4, Fraction(2, 3)))
    eps_weight: Fraction = Fraction(1, 6)
    hbar_weight: Fraction = Fraction(4, 3)
    delta: Fraction = Fraction(2, 3)
    potential_fixture: str = "frobenius_potential"
    killed: tuple = ()

    @property
    def N(self) -> int:
        return len(self.fields)

    @property
    def dim_V(self) -> int:
        return len(self.fields)

    @functools.cached_property
    def eta_lower(self) -> dict:
        return {k: mpq(v.numerator, v.denominator) for k, v in self.eta}

    @functools.cached_property
    def eta_inv(self) -> dict:
        return _invert_matrix(self.eta_lower, self.fields)

    @functools.cached_property
    def weight(self) -> dict:
        return dict(self.weights)

    @functools.cached_property
    def potential(self) -> DiffPoly:
        from .fixtures import load

        F = load(self.potential_fixture)
        return F.substitute_zero([("u", a) for a in self.killed]) if self.killed else F

    def hamiltonian_weight(self, alpha: int, d: int) -> Fraction:
        """|g_{alpha,d}| = d + 3 - delta - |u^alpha|."""
        return d + 3 - self.delta - self.weight[alpha]

    def eta_u(self, alpha: int) -> DiffPoly:
        """g_{alpha,-1} = eta_{alpha mu} u^mu."""
        out = const(0)
        for (a, b), c in self.eta_lower.items():
            if a == alpha:
                out = out + var("u", b).scale(c)
        return with_alphabet(out, "u")

    def quadratic(self) -> DiffPoly:
        """(1/2) eta_{mu nu} u^mu u^nu."""
        out = const(0)
        for (a, b), c in self.eta_lower.items():
            out = out + (var("u", a) * var("u", b)).scale(c / 2)
        return out

    def restrict(self, kill) -> "CohftData":
        """Restriction to the coordinate subspace u^a = 0, a in ``kill``."""
        kill = tuple(sorted(set(kill) | set(self.killed)))
        alive = tuple(a for a in self.fields if a not in kill)
        eta = tuple((k, v) for k, v in self.eta if k[0] in alive and k[1] in alive)
        w = tuple((a, v) for a, v in self.weights if a in alive)
        return CohftData(alive, eta, self.unit, w, self.eps_weight, self.hbar_weight, self.delta, self.potential_fixture, kill)


D4 = CohftData()


def d4_cohft() -> CohftData:
    return D4


# ---------------------------------------------------------------------------
# Affine families of differential polynomials
# ---------------------------------------------------------------------------


class Affine:
    """``const + sum_i c_i * lin[i]`` with unknown scalars c_i."""

    __slots__ = ("const", "lin")

    def __init__(self, const_part: DiffPoly | None = None, lin: dict | None = None):
        self.const = const_part if const_part is not None else const(0)
        self.lin = {i: p for i, p in (lin or {}).items() if p}

    def __add__(self, other):
        if isinstance(other, DiffPoly):
            return Affine(self.const + other, self.lin)
        lin = dict(self.lin)
        for i, p in other.lin.items():
            lin[i] = lin[i] + p if i in lin else p
        return Affine(self.const + other.const, lin)

    def __neg__(self):
        return self.map(lambda p: -p)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return self.map(lambda p: p.scale(c))

    def map(self, fn) -> "Affine":
        """Apply a linear map to every component."""
        return Affine(fn(self.const) if self.const else self.const, {i: fn(p) for i, p in self.lin.items()})

    def evaluate(self, values) -> DiffPoly:
        out = self.const
        for i, p in self.lin.items():
            if values[i]:
                out = out + p.scale(values[i])
        return out

    def is_zero(self):
        return not self.const and not self.lin

    def vanishing_rows(self) -> list:
        """Rows ({i: coefficient}, rhs) expressing that the family vanishes."""
        mons = set(self.const.terms)
        for p in self.lin.values():
            mons.update(p.terms)
        rows = []
        for m in mons:
            row = {i: p.terms[m] for i, p in self.lin.items() if m in p.terms}
            rhs = -self.const.terms.get(m, 0)
            if row or rhs:
                rows.append((row, rhs))
        return rows


# ---------------------------------------------------------------------------
# Bracket, dilaton, recursion
# ---------------------------------------------------------------------------


def _density(g):
    return g.density if isinstance(g, LocalFunctional) else g


def velocities(g, cohft: CohftData = D4) -> dict:
    """V^a = eta^{ab} d_x (delta g / delta u^b) for every field a."""
    g = _density(g)
    grad = {b: variational_derivative(g, ("u", b)) for b in cohft.fields}
    vel = {}
    for a in cohft.fields:
        acc = const(0)
        for b in cohft.fields:
            c = cohft.eta_inv.get((a, b))
            if c and grad[b]:
                acc = acc + grad[b].scale(c)
        vel[a] = d_x(acc)
    return vel


class _VelocityJets:
    """Cache of d_x^k V^a."""

    def __init__(self, vel: dict):
        self.jets = {a: [v] for a, v in vel.items()}

    def get(self, a, k):
        js = self.jets.get(a)
        if js is None:
            return const(0)
        while len(js) <= k:
            js.append(d_x(js[-1]))
        return js[k]


def bracket_with_velocities(f: DiffPoly, vel) -> DiffPoly:
    """sum_{a,k} df/du^a_k * d_x^k V^a for precomputed velocities."""
    jets = vel if isinstance(vel, _VelocityJets) else _VelocityJets(vel)
    out = Accumulator()
    for v in sorted(f.variables()):
        if v.tag != "u":
            continue
        dv = jets.get(v.index, v.order)
        if dv:
            out.add(partial(f, v) * dv)
    return out.result()


def eta_bracket(f: DiffPoly, g, cohft: CohftData = D4) -> DiffPoly:
    """Density of {f, g-bar} for the operator eta^{ab} d_x."""
    return bracket_with_velocities(f, velocities(g, cohft))


def gradient(g, cohft: CohftData = D4) -> dict:
    """delta g / delta u^a for every field a."""
    g = _density(g)
    return {a: variational_derivative(g, ("u", a)) for a in cohft.fields}


def functional_bracket(f, g, cohft: CohftData = D4, grad_f=None, grad_g=None) -> DiffPoly:
    """Density eta^{ab} (delta f/delta u^a) d_x (delta g/delta u^b) of {f-bar, g-bar}.

    Differs from ``eta_bracket`` by a total derivative; it is much cheaper for
    large f because only gradients are multiplied.
    """
    gf = grad_f if grad_f is not None else gradient(f, cohft)
    gg = grad_g if grad_g is not None else gradient(g, cohft)
    out = Accumulator()
    for (a, b), c in sorted(cohft.eta_inv.items()):
        if c and gf[a] and gg[b]:
            out.add((gf[a] * d_x(gg[b])).scale(c))
    return out.result()


def is_trivial_functional(f: DiffPoly, cohft: CohftData = D4) -> bool:
    """True iff the field part of f lies in Im d_x (all Euler derivatives vanish)."""
    f = _density(f).field_part()
    return all(not variational_derivative(f, ("u", a)) for a in cohft.fields)


def _map_terms(f: DiffPoly, fn) -> DiffPoly:
    return DiffPoly({m: c * fn(m) for m, c in f.terms.items()}, f.alphabet)


def dilaton_D(f: DiffPoly, quantum: bool = False) -> DiffPoly:
    """Euler grading: each monomial times (#fields + eps power [+ 2 hbar power])."""
    return _map_terms(f, lambda m: monomial_dilaton(m, quantum))


def _eigen_one(f: DiffPoly, quantum: bool) -> DiffPoly:
    return f.filter(lambda m: monomial_dilaton(m, quantum) == 1)


def inverse_dilaton_minus_one(f: DiffPoly, quantum: bool = False) -> DiffPoly:
    """(D - 1)^{-1} on inputs without dilaton-eigenvalue-1 components."""
    bad = _eigen_one(f, quantum)
    if bad:
        raise NotDRTypeError("input has a component in ker(D - 1)", bad)
    return _map_terms(f, lambda m: mpq(1, monomial_dilaton(m, quantum) - 1))


def dr_recursion_step(g_prev: DiffPoly, g11, cohft: CohftData = D4, vel=None) -> DiffPoly:
    """Solve d_x (D - 1) g_next = {g_prev, g11-bar} with kernel-free normalization."""
    rhs = bracket_with_velocities(g_prev, vel if vel is not None else velocities(g11, cohft))
    ex = dx_exactness(rhs)
    if not ex.exact:
        raise NotDRTypeError("DR recursion: bracket is not a total derivative", ex.witness)
    return inverse_dilaton_minus_one(ex.antiderivative)


@dataclass
class DrDensityTable:
    """Densities g_{alpha,d} produced by the DR recursion."""

    cohft: CohftData
    g11: DiffPoly
    table: dict = field(default_factory=dict)

    def __getitem__(self, key) -> DiffPoly:
        return self.table[key]

    def functional(self, alpha, d) -> LocalFunctional:
        return LocalFunctional(self.table[(alpha, d)])

    @property
    def max_d(self) -> int:
        return max(d for _, d in self.table)

    def check_unit_derivative(self) -> list:
        """Pairs (alpha, d) violating d g_{alpha,d} / d u^1 = g_{alpha,d-1}."""
        bad = []
        u = self.cohft.unit
        for (a, d), g in self.table.items():
            if d >= 0 and partial(g, ("u", u, 0)) != self.table[(a, d - 1)]:
                bad.append((a, d))
        return bad

    def commutativity_failures(self, max_d: int | None = None) -> list:
        """Pairs of Hamiltonians g-bar_{alpha,p}, g-bar_{beta,q} (p, q <= max_d) that fail to commute."""
        top = self.max_d if max_d is None else max_d
        keys = sorted(k for k in self.table if k[1] <= top)
        grads = {k: gradient(self.table[k], self.cohft) for k in keys}
        bad = []
        for i, k1 in enumerate(keys):
            for k2 in keys[i + 1 :]:
                br = functional_bracket(None, None, self.cohft, grads[k1], grads[k2])
                if not is_trivial_functional(br, self.cohft):
                    bad.append((k1, k2))
        return bad


def dr_hierarchy(g11, cohft: CohftData = D4, max_d: int = 2) -> DrDensityTable:
    """Run the DR recursion from g_{a,-1} = eta_{a mu} u^mu up to d = max_d."""
    g11 = _density(g11)
    vel = _VelocityJets(velocities(g11, cohft))
    table = {}
    for a in cohft.fields:
        g = cohft.eta_u(a)
        table[(a, -1)] = g
        for d in range(0, max_d + 1):
            g = dr_recursion_step(g, g11, cohft, vel)
            table[(a, d)] = g
    return DrDensityTable(cohft, g11, table)


def genus0_g11(cohft: CohftData = D4) -> LocalFunctional:
    """Dispersionless Hamiltonian (D - 2) F with t -> u (dilaton equation)."""
    F = cohft.potential
    return LocalFunctional(_map_terms(F, lambda m: monomial_dilaton(m) - 2))


# ---------------------------------------------------------------------------
# DR-type solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    """``z_order_cap``: condition (a) is imposed for recursion steps d = -1..cap-1.
    ``cap_retries``: extra steps tried when an order is under-determined."""

    z_order_cap: int = 3
    cap_retries: int = 1
    eps_max: int | None = None  # default: largest order with a non-trivial ansatz


@dataclass
class OrderReport:
    eps_order: int
    ansatz_monomials: int
    quotient_size: int
    rows: int
    rank: int
    nullity: int
    z_order_cap: int
    seconds: float


@dataclass
class DRSolveResult:
    g11: LocalFunctional
    density: DiffPoly
    nullity_before_normalization: int
    orders: list
    normalization: dict

    def report(self) -> dict:
        return {
            "nullity_before_normalization": self.nullity_before_normalization,
            "normalization": {k: str(v) for k, v in self.normalization.items()},
            "orders": [vars(o) for o in self.orders],
        }


def _field_monomials(cohft: CohftData, weight: Fraction, jets: int, eps: int, hbar: int = 0) -> list:
    """Monomials u-content of total ``weight``, with ``jets`` derivatives."""
    from .diffpoly import SLOT_INDEX

    fields = sorted(cohft.fields, key=lambda a: -cohft.weight[a])
    out = []

    def rec(i, left, acc):
        if left == 0:
            if acc:
                out.append(tuple(acc))
            return
        if i == len(fields):
            return
        w = cohft.weight[fields[i]]
        n = 0
        while n * w <= left:
            rec(i + 1, left - n * w, acc + [fields[i]] * n)
            n += 1

    rec(0, weight, [])
    mons = []
    for combo in out:
        slots = tuple(sorted(SLOT_INDEX[("u", a)] for a in combo))
        mons.extend(block_monomials((eps, hbar, slots, jets)))
    return mons


def _ansatz(cohft: CohftData, eps: int, total_weight: Fraction) -> tuple:
    w = total_weight - eps * cohft.eps_weight
    if w <= 0:
        return [], []
    raw = _field_monomials(cohft, w, eps, eps)
    basis = [m for m in quotient_basis(raw) if _nontrivial(m)]
    return raw, basis


def _nontrivial(m) -> bool:
    _, _, vs = monomial_parts(m)
    return sum(e for _, e in vs) >= 2


def _vd_rows(aff: Affine, cohft: CohftData) -> list:
    rows = []
    for b in cohft.fields:
        rows += aff.map(lambda p, b=b: variational_derivative(p, ("u", b))).vanishing_rows()
    return rows


def _dedupe(rows):
    seen = {}
    for row, rhs in rows:
        if not row:
            if rhs:
                raise ModelError("DR-type conditions are inconsistent (0 = nonzero)")
            continue
        k0 = min(row)
        piv = row[k0]
        key = (tuple(sorted((k, normalize(v / piv)) for k, v in row.items())), normalize(rhs / piv))
        seen.setdefault(key, (row, rhs))
    return list(seen.values())


def _affine_bracket(f: Affine, vel0: _VelocityJets, f0: DiffPoly, vel_e: dict) -> Affine:
    """eps^e slice of {f, h}: B(f_e, V_0) + B(f_0, V_e) where V_e is affine."""
    out = f.map(lambda p: bracket_with_velocities(p, vel0))
    if f0:
        # B(f_0, V_e) is linear in V_e: evaluate per unknown
        lin = {}
        fams = {a: vel_e[a] for a in vel_e}
        idxs = set()
        for a in fams:
            idxs.update(fams[a].lin)
        for i in idxs:
            vi = {a: fams[a].lin.get(i, const(0)) for a in fams}
            lin[i] = bracket_with_velocities(f0, vi)
        cst = {a: fams[a].const for a in fams}
        out = out + Affine(bracket_with_velocities(f0, cst), lin)
    return out


def solve_dr_g11(cohft: CohftData = D4, z_order_cap: int = 3, config: SolverConfig | None = None, log=None) -> DRSolveResult:
    """Determine g_{1,1} from its genus-0 part by the DR-type conditions.

    Order eps^0 is the dilaton-equation Hamiltonian. For each even order
    2k >= 2 the unknowns are the coefficients of a basis of weight-7/3
    monomials with 2k derivatives modulo Im d_x. Constraints:

    (b) delta g / delta u^1 at eps^{2k} lies in Im d_x^2 (two exactness tests);
    (a) for every alpha and d = -1..cap-1 the bracket {g_{alpha,d}, g11} at
        eps^{2k} is d_x-exact and misses ker(D - 1).

    At the first dispersive order the system is homogeneous (eps-rescaling); the
    one-dimensional solution is normalized by Coef_{(u^1_1)^2 eps^2} = -dim V/24.
    """
    config = config or SolverConfig(z_order_cap=z_order_cap)
    cap = config.z_order_cap
    total_w = cohft.hamiltonian_weight(cohft.unit, 1)
    h0 = genus0_g11(cohft).density
    # condition (b) at eps^0
    w0 = variational_derivative(h0, ("u", cohft.unit))
    if w0 != cohft.quadratic():
        raise ModelError("genus-0 Hamiltonian violates delta g / delta u^1 = eta(u,u)/2")
    eps_max = config.eps_max
    if eps_max is None:
        eps_max = 0
        while total_w - (eps_max + 2) * cohft.eps_weight > 0:
            eps_max += 2
    h_slices = {0: h0}
    vel_slices = {0: velocities(h0, cohft)}
    vel0 = _VelocityJets(vel_slices[0])
    max_steps = cap + config.cap_retries
    # g slices: (alpha, d) -> {eps order: DiffPoly}, known for d <= extent
    g_slices = {}
    for a in cohft.fields:
        g = cohft.eta_u(a)
        g_slices[(a, -1)] = {0: g}
        for d in range(0, cap + 1):
            g = dr_recursion_step(g, h0, cohft, vel0)
            g_slices[(a, d)] = {0: g}
    extent = [cap]

    def extend(target):
        while extent[0] < target:
            d = extent[0]
            for a in cohft.fields:
                g_slices[(a, d + 1)] = {0: dr_recursion_step(g_slices[(a, d)][0], h0, cohft, vel0)}
            for eo in sorted(h_slices):
                if eo:
                    _fill_missing_slices(cohft, eo, g_slices, h_slices, vel_slices, vel0, d + 1)
            extent[0] += 1
    orders = []
    normalization = {}
    total_nullity = 0
    for e in range(2, eps_max + 1, 2):
        t0 = time.perf_counter()
        raw, basis = _ansatz(cohft, e, total_w)
        if not basis:
            h_slices[e] = const(0)
            vel_slices[e] = {a: const(0) for a in cohft.fields}
            for key in g_slices:
                g_slices[key][e] = const(0)
            orders.append(OrderReport(e, len(raw), 0, 0, 0, 0, cap, 0.0))
            continue
        expected = 1 if e == 2 else 0
        used_cap = cap
        while True:
            extend(used_cap)
            sol, nrows, aff_g = _solve_order(cohft, e, basis, h_slices, vel_slices, vel0, g_slices, used_cap)
            if sol.nullity <= expected or used_cap >= max_steps:
                break
            used_cap += 1
        if sol.nullity != expected:
            raise AmbiguityError(f"eps^{e}: nullity {sol.nullity}, expected {expected} (cap {used_cap})")
        total_nullity += sol.nullity
        values = list(sol.particular)
        if e == 2:
            target = _normalization_monomial(cohft)
            j = basis.index(target)
            vec = sol.nullspace[0]
            if not vec[j]:
                raise ModelError("normalization monomial has zero coefficient on the solution line")
            scale = mpq(-cohft.dim_V, 24) / vec[j]
            values = [normalize(v * scale) for v in vec]
            normalization = {"monomial": "eps^2*u1_1^2", "coefficient": mpq(-cohft.dim_V, 24), "scale": scale}
        he = DiffPoly({m: values[i] for i, m in enumerate(basis) if values[i]}, "u")
        h_slices[e] = he
        vel_slices[e] = velocities(he, cohft)
        for key, aff in aff_g.items():
            g_slices[key][e] = aff.evaluate(values)
        for key in g_slices:
            g_slices[key].setdefault(e, None)
        _fill_missing_slices(cohft, e, g_slices, h_slices, vel_slices, vel0, extent[0])
        orders.append(OrderReport(e, len(raw), len(basis), nrows, len(basis) - sol.nullity, sol.nullity, used_cap, round(time.perf_counter() - t0, 3)))
        if log:
            log(f"eps^{e}: basis {len(basis)}, rows {nrows}, nullity {sol.nullity}, {orders[-1].seconds}s")
    density = const(0)
    for e in sorted(h_slices):
        density = density + h_slices[e]
    density = with_alphabet(density, "u")
    return DRSolveResult(LocalFunctional(density), density, total_nullity, orders, normalization)


def _normalization_monomial(cohft):
    from .diffpoly import monomial

    m = monomial(2, 0, [(("u", cohft.unit, 1), 2)])
    return next(iter(m.terms))


def _slice_rhs(key, e, g_slices, vel_slices):
    """Known part of the eps^e slice of {g, h}: sum over 0 < a < e."""
    out = const(0)
    for a in range(2, e, 2):
        ga = g_slices[key].get(a)
        vb = vel_slices.get(e - a)
        if ga and vb:
            out = out + bracket_with_velocities(ga, vb)
    return out


def _solve_order(cohft, e, basis, h_slices, vel_slices, vel0, g_slices, cap):
    lin_h = {i: DiffPoly({m: mpq(1)}, "u") for i, m in enumerate(basis)}
    h_e = Affine(const(0), lin_h)
    vel_e = {}
    grads = {b: h_e.map(lambda p, b=b: variational_derivative(p, ("u", b))) for b in cohft.fields}
    for a in cohft.fields:
        acc = Affine()
        for b in cohft.fields:
            c = cohft.eta_inv.get((a, b))
            if c:
                acc = acc + grads[b].scale(c)
        vel_e[a] = acc.map(d_x)
    rows = []
    # condition (b): delta h / delta u^1 in Im d_x^2
    w = grads[cohft.unit]
    rows += _vd_rows(w, cohft)
    r1 = w.map(homotopy)
    rows += _vd_rows(r1, cohft)
    # condition (a)
    aff_g = {}
    for a in cohft.fields:
        cur = Affine()  # eps^e slice of g_{a,-1} is zero
        aff_g[(a, -1)] = cur
        for d in range(-1, cap):
            f0 = g_slices[(a, d)][0]
            br = _affine_bracket(cur, vel0, f0, vel_e) + _slice_rhs((a, d), e, g_slices, vel_slices)
            rows += _vd_rows(br, cohft)
            G = br.map(homotopy)
            rows += G.map(lambda p: _eigen_one(p, False)).vanishing_rows()
            cur = G.map(lambda p: _map_terms(p.filter(lambda m: monomial_dilaton(m) != 1), lambda m: mpq(1, monomial_dilaton(m) - 1)))
            aff_g[(a, d + 1)] = cur
    rows = _dedupe(rows)
    system = LinearSystem([r for r, _ in rows], [b for _, b in rows], list(range(len(basis))))
    try:
        sol = solve_linear_system(system)
    except InconsistentSystemError as exc:
        raise ModelError(f"eps^{e}: DR-type conditions are inconsistent") from exc
    return sol, len(rows), aff_g


def _fill_missing_slices(cohft, e, g_slices, h_slices, vel_slices, vel0, max_steps):
    """Compute eps^e slices of g_{a,d} for steps not covered by the solve."""
    for a in cohft.fields:
        for d in range(-1, max_steps):
            if g_slices[(a, d + 1)].get(e) is not None:
                continue
            cur = g_slices[(a, d)][e] or const(0)
            br = bracket_with_velocities(cur, vel0) + bracket_with_velocities(g_slices[(a, d)][0], vel_slices[e])
            br = br + _slice_rhs((a, d), e, g_slices, vel_slices)
            g_slices[(a, d + 1)][e] = inverse_dilaton_minus_one(homotopy(br)) if br else const(0)


# ---------------------------------------------------------------------------
# Hamiltonian operators and Miura transformations
# ---------------------------------------------------------------------------


def eta_operator(cohft: CohftData = D4) -> PoissonMatrix:
    """K = eta^{ab} d_x as a PoissonMatrix over the u alphabet."""
    entries = {}
    for (a, b), c in cohft.eta_inv.items():
        entries[(a, b)] = {1: with_alphabet(const(c), "u")}
    return PoissonMatrix(cohft.fields, entries)


def normal_miura(table: DrDensityTable) -> dict:
    """Normal coordinates of the DR tau structure: ut^a = eta^{a mu} delta g_{mu,0} / delta u^1."""
    cohft = table.cohft
    out = {}
    grads = {m: variational_derivative(table[(m, 0)], ("u", cohft.unit)) for m in cohft.fields}
    for a in cohft.fields:
        acc = const(0)
        for m in cohft.fields:
            c = cohft.eta_inv.get((a, m))
            if c:
                acc = acc + grads[m].scale(c)
        out[("ut", a)] = with_alphabet(acc, "u")
    return out


def _linearization(miura: dict, fields, src_tag: str) -> dict:
    """L^a_b = sum_k d ut^a / d u^b_k d_x^k (plain derivatives)."""
    L = {}
    for a in fields:
        f = miura[("ut", a)] if ("ut", a) in miura else miura[a]
        for b in fields:
            coeffs = {}
            for v in f.variables():
                if v.tag == src_tag and v.index == b:
                    coeffs[v.order] = partial(f, v)
            if coeffs:
                L[(a, b)] = PsiDO1(coeffs, None, False)
    return L


def transform_hamiltonian_operator(K: PoissonMatrix, miura: dict, src_tag: str = "u", dst_tag: str = "ut") -> PoissonMatrix:
    """Transport K to new coordinates ut = ut(u): K_ut = L o K o L^dagger.

    ``miura`` maps ("ut", a) -> DiffPoly in the u alphabet. The resulting
    coefficients are rewritten in the new alphabet with the inverse map, found
    by triangular inversion.
    """
    fields = K.indices
    L = _linearization(miura, fields, src_tag)
    Ld = {(b, a): adjoint(op) for (a, b), op in L.items()}
    Kops = {(a, b): PsiDO1(dict(e), None, False) for (a, b), e in K.entries.items() if e}
    # triangular inversion order: identity-like components first
    forward = {(dst_tag, a): miura[(dst_tag, a)] for a in fields}
    order = sorted(fields, key=lambda a: (len(forward[(dst_tag, a)].terms), a))
    inv = invert_triangular_miura(forward, [((dst_tag, a), (src_tag, a)) for a in order], dst_tag)
    entries = {}
    for a in fields:
        for b in fields:
            acc = None
            for m in fields:
                if (a, m) not in L:
                    continue
                for n in fields:
                    if (m, n) not in Kops:
                        continue
                    left = psido_mul(L[(a, m)], Kops[(m, n)])
                    if (n, b) not in Ld:
                        continue
                    t = psido_mul(left, Ld[(n, b)])
                    acc = t if acc is None else acc + t
            if acc is None:
                continue
            ops = {k: apply_miura(c, inv, dst_tag, check=False) for k, c in acc.coeffs.items()}
            ops = {k: with_alphabet(v, dst_tag) for k, v in ops.items() if v}
            if ops:
                entries[(a, b)] = ops
    return PoissonMatrix(fields, entries)


def to_normal_coordinates(f: DiffPoly, miura: dict, src_tag: str = "u", dst_tag: str = "ut") -> DiffPoly:
    """Rewrite a u-density in normal coordinates via the inverse of ``miura``."""
    fields = sorted({fam[1] for fam in miura})
    forward = {(dst_tag, a): miura[(dst_tag, a)] for a in fields}
    order = sorted(fields, key=lambda a: (len(forward[(dst_tag, a)].terms), a))
    inv = invert_triangular_miura(forward, [((dst_tag, a), (src_tag, a)) for a in order], dst_tag)
    return with_alphabet(apply_miura(f, inv, dst_tag, check=False), dst_tag)


# ---------------------------------------------------------------------------
# Symmetries and foldings
# ---------------------------------------------------------------------------

#: action of the generators on the basis e_1..e_4: e_b -> sum_a M[b][a] e_a
SYMMETRIES = {
    "Z2": {1: {1: 1}, 2: {2: 1}, 3: {3: 1}, 4: {4: -1}},
    "Z3": {
        1: {1: 1},
        2: {2: Fraction(-1, 2), 4: Fraction(-3, 2)},
        3: {3: 1},
        4: {2: Fraction(1, 2), 4: Fraction(-1, 2)},
    },
}


def apply_linear_symmetry(f: DiffPoly, action: dict, transpose: bool = True) -> DiffPoly:
    """Pull back ``f`` along a linear symmetry given on the basis vectors.

    The coordinates u^a form the dual basis, so by default they transform with
    the transposed matrix: u^a -> sum_b M[a][b] u^b, where e_a -> sum_b M[a][b] e_b.
    ``transpose=False`` applies u^a -> sum_b M[b][a] u^b instead.
    """
    subst = {}
    for a in (1, 2, 3, 4):
        acc = const(0)
        for b in (1, 2, 3, 4):
            c = action[b].get(a, 0) if not transpose else action[a].get(b, 0)
            if c:
                acc = acc + var("u", b).scale(mpq(c.numerator, c.denominator) if isinstance(c, Fraction) else c)
        subst[("u", a)] = with_alphabet(acc, "u")
    return with_alphabet(apply_miura(f, subst, "u", check=False), "u")


def parity_scan(f: DiffPoly, index: int = 4) -> list:
    """Monomials of ``f`` with odd total degree in u^index (empty iff Z2-even)."""
    bad = []
    for m in f.terms:
        _, _, vs = monomial_parts(m)
        if sum(e for v, e in vs if v.tag == "u" and v.index == index) % 2:
            bad.append(m)
    return bad


@dataclass
class RestrictedHierarchy:
    cohft: CohftData
    g11: DiffPoly
    table: DrDensityTable
    operator: PoissonMatrix
    closure_violations: list

    @property
    def reduced_operator(self) -> PoissonMatrix:
        """The operator with the surviving fields relabelled 1..n in order."""
        pos = {a: i for i, a in enumerate(self.operator.indices, 1)}
        entries = {(pos[a], pos[b]): e for (a, b), e in self.operator.entries.items()}
        return PoissonMatrix(tuple(range(1, len(pos) + 1)), entries)


def restrict_subhierarchy(g11, kill, cohft: CohftData = D4, max_d: int = 2, full_table: DrDensityTable | None = None) -> RestrictedHierarchy:
    """Restrict the hierarchy to the locus u^a_k = 0 (a in ``kill``).

    Closure: the flows of the full hierarchy generated by the restricted
    Hamiltonians must not move the killed coordinates, i.e. for every alive
    alpha and d <= max_d, (eta^{b c} d_x delta g_{alpha,d} / delta u^c) restricted
    to the locus vanishes for each killed b. The restricted hierarchy itself is
    recomputed by the recursion in the reduced alphabet.
    """
    kill = set(kill)
    if not kill or not kill <= set(cohft.fields):
        raise ValueError("kill must be a non-empty subset of the fields")
    g11 = _density(g11)
    sub = cohft.restrict(kill)
    killed = [("u", a) for a in kill]
    g11r = g11.substitute_zero(killed)
    table = dr_hierarchy(g11r, sub, max_d)
    violations = []
    if full_table is None:
        full_table = dr_hierarchy(g11, cohft, max_d)
    for a in sub.fields:
        for d in range(-1, max_d + 1):
            vel = velocities(full_table[(a, d)], cohft)
            for b in kill:
                if vel[b].substitute_zero(killed):
                    violations.append((a, d, b))
            if full_table[(a, d)].substitute_zero(killed) != table[(a, d)]:
                violations.append((a, d, "density"))
    if violations:
        raise NotDRTypeError(f"restriction to kill={sorted(kill)} is not closed", violations)
    return RestrictedHierarchy(sub, g11r, table, eta_operator(sub), violations)
