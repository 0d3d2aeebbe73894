"""Verification suite: every stored reference formula is compared with its
computed counterpart.

Comparisons are exact. Density-level objects (Miura maps, operator entries)
are compared as DiffPolys term by term; Hamiltonians are compared as local
functionals (modulo Im d_x and constants). Each check names the fixtures it
consumes, so the fixture set can be audited for dead entries.
"""
from __future__ import annotations

import functools
import time
from dataclasses import dataclass, field

from .diffpoly import DiffPoly, monomial, reduce_modulo_dx
from .fixtures import FIXTURES, load
from .parse import render
from .scalars import I, mpq

__all__ = ["Check", "CheckResult", "CHECKS", "SUITES", "run_suite", "consumed_fixtures", "Context"]


@dataclass
class CheckResult:
    name: str
    suite: str
    passed: bool
    detail: str = ""
    offending: list = field(default_factory=list)
    seconds: float = 0.0

    def lines(self) -> list:
        out = [f"[{'PASS' if self.passed else 'FAIL'}] {self.suite}/{self.name}" + (f": {self.detail}" if self.detail else "")]
        for o in self.offending:
            out.append(f"    {o}")
        return out


@dataclass(frozen=True)
class Check:
    name: str
    suite: str
    fixtures: tuple
    fn: object
    description: str = ""


class Context:
    """Lazily computed shared objects (one per process)."""

    def __init__(self, ds_config=None, z_order_cap: int = 3):
        from .ds_d4 import DSConfig

        self.ds_config = ds_config or DSConfig()
        self.z_order_cap = z_order_cap

    @functools.cached_property
    def dr_solution(self):
        from .dr_classical import solve_dr_g11

        return solve_dr_g11(z_order_cap=self.z_order_cap)

    @functools.cached_property
    def dr_table(self):
        from .dr_classical import dr_hierarchy

        return dr_hierarchy(self.dr_solution.density, max_d=2)

    @functools.cached_property
    def dr_miura(self):
        from .dr_classical import normal_miura

        return normal_miura(self.dr_table)

    @functools.cached_property
    def quantum_solution(self):
        from .dr_quantum import solve_quantum_g11

        return solve_quantum_g11(self.dr_solution.density)


def _poly_diff(computed: DiffPoly, expected: DiffPoly) -> list:
    d = computed - expected
    return [f"computed - expected: {render(d)}"] if d else []


def _functional_diff(computed: DiffPoly, expected: DiffPoly) -> list:
    d = reduce_modulo_dx((computed - expected).field_part())
    return [f"computed - expected (mod Im d_x): {render(d)}"] if d else []


def _matrix_diff(computed, expected) -> list:
    if computed.indices != expected.indices:
        return [f"index sets differ: {computed.indices} vs {expected.indices}"]
    return [f"K^({a},{b}) coefficient of d^{k}: computed - expected = {render(d)}" for a, b, k, d in computed.diff(expected)]


# ---------------------------------------------------------------------------
# DS checks
# ---------------------------------------------------------------------------


def _check_ds_miura(ctx):
    from .ds_d4 import normal_coordinates

    _, inv = normal_coordinates(ctx.ds_config)
    off = []
    names = {("s", 1): "ds_miura_s1", ("s", 2): "ds_miura_s2", ("s", 3): "ds_miura_s3", ("rho", 0): None}
    for fam, fx in names.items():
        if fx is None:
            continue
        off += [f"{fx}: {o}" for o in _poly_diff(inv[fam], load(fx))]
    # s^4 = rho^2
    s4 = inv[("rho", 0)] ** 2
    off += [f"ds_miura_s4: {o}" for o in _poly_diff(s4, load("ds_miura_s4"))]
    return off


def _check_ds_normal_from_v(ctx):
    from .ds_d4 import present, ut_of_v

    uv = ut_of_v(ctx.ds_config)
    off = []
    for a in (1, 2, 3, 4):
        off += [f"ds_normal_from_v{a}: {o}" for o in _poly_diff(present(uv[("ut", a)]), load(f"ds_normal_from_v{a}"))]
    return off


def _check_ds_vtilde(ctx):
    from .ds_d4 import build_lax_v, present

    lv = build_lax_v(ctx.ds_config.bracket_floor)
    off = []
    for mu in (1, 2, 3):
        off += [f"ds_vtilde{mu}: {o}" for o in _poly_diff(present(lv.vt_of_v[mu]), load(f"ds_vtilde{mu}"))]
    return off


def _check_ds_h0(ctx):
    from .ds_d4 import tau_density

    off = []
    for a in (1, 2, 3, 4):
        off += [f"h_{a},0: {o}" for o in _functional_diff(tau_density(a, 0, ctx.ds_config), load(f"ds_h{a}_0"))]
    return off


def _check_ds_h11(ctx):
    from .ds_d4 import tau_density

    return _functional_diff(tau_density(1, 1, ctx.ds_config), load("ds_h1_1"))


def _check_ds_poisson(ctx):
    from .ds_d4 import poisson_matrix_first

    K = poisson_matrix_first(ctx.ds_config)
    off = _matrix_diff(K, load("ds_poisson_first"))
    if not K.is_antisymmetric():
        off.append("computed operator is not antisymmetric")
    return off


# ---------------------------------------------------------------------------
# DR checks
# ---------------------------------------------------------------------------


def _check_dr_genus0(ctx):
    from .dr_classical import D4, genus0_g11

    off = _poly_diff(genus0_g11(D4).density, load("dr_g11_genus0"))
    if D4.potential != load("frobenius_potential"):
        off.append("CohFT potential differs from the stored potential")
    return off


def _check_dr_solve(ctx):
    res = ctx.dr_solution
    off = _functional_diff(res.density, load("dr_g11"))
    if res.nullity_before_normalization != 1:
        off.append(f"nullity before normalization = {res.nullity_before_normalization}, expected 1")
    m = next(iter(monomial(2, 0, [(("u", 1, 1), 2)]).terms))
    c = reduce_modulo_dx(res.density).terms.get(m)
    if c != mpq(-1, 6):
        off.append(f"Coef_(u1_1^2 eps^2) = {c}, expected -1/6")
    return off


def _check_dr_normal_miura(ctx):
    off = []
    for a in (1, 2, 3, 4):
        off += [f"ut{a}: {o}" for o in _poly_diff(ctx.dr_miura[("ut", a)], load(f"dr_normal_miura{a}"))]
    return off


def _check_dr_operator(ctx):
    from .dr_classical import eta_operator, transform_hamiltonian_operator
    from .ds_d4 import poisson_matrix_first

    K = transform_hamiltonian_operator(eta_operator(), ctx.dr_miura)
    off = _matrix_diff(K, load("dr_normal_operator"))
    off += [f"vs DS first bracket: {o}" for o in _matrix_diff(K, poisson_matrix_first(ctx.ds_config))]
    return off


def _check_dr_ds_equivalence(ctx):
    from .dr_classical import to_normal_coordinates
    from .ds_d4 import tau_density

    gn = to_normal_coordinates(ctx.dr_solution.density, ctx.dr_miura)
    off = [f"vs stored normal form: {o}" for o in _functional_diff(gn, load("dr_g11_normal"))]
    off += [f"vs DS h_1,1: {o}" for o in _functional_diff(gn, tau_density(1, 1, ctx.ds_config))]
    return off


def _check_dr_foldings(ctx):
    from .dr_classical import SYMMETRIES, apply_linear_symmetry, parity_scan, restrict_subhierarchy

    g11 = ctx.dr_solution.density
    off = []
    for kill, fx in (({4}, "b3_operator"), ({2, 4}, "g2_operator")):
        r = restrict_subhierarchy(g11, kill, max_d=2, full_table=ctx.dr_table)
        off += [f"{fx}: {o}" for o in _matrix_diff(r.reduced_operator, load(fx))]
    bad = parity_scan(reduce_modulo_dx(g11))
    if bad:
        off.append(f"{len(bad)} monomials odd in u4")
    F = load("frobenius_potential")
    for name in ("Z2", "Z3"):
        if apply_linear_symmetry(F, SYMMETRIES[name]) != F:
            off.append(f"potential not invariant under {name}")
    return off


# ---------------------------------------------------------------------------
# Quantum checks
# ---------------------------------------------------------------------------


def _check_quantum(ctx):
    res = ctx.quantum_solution
    ham = res.hamiltonian
    off = _functional_diff(ham.correction, load("quantum_correction"))
    off += [f"classical limit: {o}" for o in _functional_diff(ham.classical_limit(), load("dr_g11"))]
    m = next(iter(monomial(0, 1, [(("u", 1, 0), 1)]).terms))
    if ham.correction.terms.get(m) != I * mpq(-1, 6):
        off.append("Coef_(u1 i hbar) != -1/6")
    return off


def _check_polylog(ctx):
    from .dr_quantum import polylog_ctilde, polylog_series_check, polylog_table
    off = []
    for ds in polylog_table(3, 6):
        if not polylog_series_check(*ds):
            off.append(f"series mismatch for {ds}")
    if polylog_ctilde(1, 1) != [mpq(-1, 6), 0, mpq(1, 6)]:
        off.append(f"C~^(1,1) = {polylog_ctilde(1, 1)}")
    return off


CHECKS = (
    Check("inverse_normal_miura", "ds", ("ds_miura_s1", "ds_miura_s2", "ds_miura_s3", "ds_miura_s4"), _check_ds_miura),
    Check("normal_from_v", "ds", tuple(f"ds_normal_from_v{a}" for a in (1, 2, 3, 4)), _check_ds_normal_from_v),
    Check("vtilde_from_v", "ds", ("ds_vtilde1", "ds_vtilde2", "ds_vtilde3"), _check_ds_vtilde),
    Check("densities_h_alpha_0", "ds", tuple(f"ds_h{a}_0" for a in (1, 2, 3, 4)), _check_ds_h0),
    Check("density_h_1_1", "ds", ("ds_h1_1",), _check_ds_h11),
    Check("first_poisson_matrix", "ds", ("ds_poisson_first",), _check_ds_poisson),
    Check("genus0_hamiltonian", "dr", ("dr_g11_genus0", "frobenius_potential"), _check_dr_genus0),
    Check("dr_type_solve", "dr", ("dr_g11",), _check_dr_solve),
    Check("dr_normal_miura", "dr", tuple(f"dr_normal_miura{a}" for a in (1, 2, 3, 4)), _check_dr_normal_miura),
    Check("dr_normal_operator", "dr", ("dr_normal_operator",), _check_dr_operator),
    Check("dr_ds_equivalence", "dr", ("dr_g11_normal",), _check_dr_ds_equivalence),
    Check("foldings", "dr", ("b3_operator", "g2_operator", "frobenius_potential"), _check_dr_foldings),
    Check("quantum_solve", "quantum", ("quantum_correction", "dr_g11"), _check_quantum),
    Check("polylog_oracle", "quantum", (), _check_polylog),
)

SUITES = ("ds", "dr", "quantum")


def consumed_fixtures() -> set:
    return {f for c in CHECKS for f in c.fixtures}


def _run_one(check: Check, ctx: Context) -> CheckResult:
    t0 = time.perf_counter()
    try:
        off = check.fn(ctx)
        passed = not off
        detail = "" if passed else f"{len(off)} difference(s)"
    except Exception as exc:  # reported, not swallowed: the check fails with the error text
        off = [f"{type(exc).__name__}: {exc}"]
        passed = False
        detail = "error"
    return CheckResult(check.name, check.suite, passed, detail, off, round(time.perf_counter() - t0, 3))


def _run_group(args):
    """Worker: run the named checks in one process so they share one Context."""
    names, trunc, zcap = args
    ctx = Context(None if trunc is None else _ds_config(trunc), zcap)
    return [_run_one(c, ctx) for c in CHECKS if c.name in names]


def _ds_config(trunc: int):
    from .ds_d4 import DSConfig

    return DSConfig(root_floor=-trunc, lax_floor=-trunc - 1, bracket_floor=-trunc - 1)


def run_suite(suite: str = "all", ctx: Context | None = None, jobs: int = 1, trunc: int | None = None) -> list:
    """Run the checks of ``suite`` ('ds', 'dr', 'quantum' or 'all'); results in check order."""
    if suite != "all" and suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}")
    selected = [c for c in CHECKS if suite == "all" or c.suite == suite]
    if jobs > 1:
        # Checks sharing expensive state (the DR solve) stay in one worker;
        # results are reassembled in check order, so output does not depend on jobs.
        from concurrent.futures import ProcessPoolExecutor

        zcap = ctx.z_order_cap if ctx else 3
        groups = [frozenset(c.name for c in selected if c.suite == s) for s in SUITES]
        groups = [g for g in groups if g]
        with ProcessPoolExecutor(max_workers=min(jobs, len(groups))) as ex:
            done = {r.name: r for rs in ex.map(_run_group, [(g, trunc, zcap) for g in groups]) for r in rs}
        return [done[c.name] for c in selected]
    ctx = ctx or Context(_ds_config(trunc) if trunc is not None else None)
    return [_run_one(c, ctx) for c in selected]


def all_fixture_names() -> set:
    return {f.name for f in FIXTURES}
