"""Check pairwise commutativity of the classical (and optionally quantum) DR Hamiltonians.

Prints one line per pair with its bracket size and timing.

Usage::

    python3 scripts/commutativity.py [--max-d 2] [--quantum-max-d 1]
"""
from __future__ import annotations

import argparse
import time

from d4dr.dr_classical import dr_hierarchy, functional_bracket, gradient, is_trivial_functional, solve_dr_g11
from d4dr.dr_quantum import quantum_bracket, quantum_hierarchy, solve_quantum_g11


def classical(table, max_d):
    keys = sorted(k for k in table.table if k[1] <= max_d)
    grads = {k: gradient(table[k]) for k in keys}
    bad = []
    for i, k1 in enumerate(keys):
        for k2 in keys[i + 1 :]:
            t = time.perf_counter()
            br = functional_bracket(None, None, grad_f=grads[k1], grad_g=grads[k2])
            ok = is_trivial_functional(br)
            print(f"classical {k1} {k2}: {'ok' if ok else 'FAIL'} ({len(br.terms)} terms, {time.perf_counter() - t:.2f} s)", flush=True)
            if not ok:
                bad.append((k1, k2))
    return bad


def quantum(table, max_d):
    keys = sorted(k for k in table if k[1] <= max_d)
    bad = []
    for i, k1 in enumerate(keys):
        for k2 in keys[i + 1 :]:
            t = time.perf_counter()
            ok = is_trivial_functional(quantum_bracket(table[k1], table[k2]))
            print(f"quantum {k1} {k2}: {'ok' if ok else 'FAIL'} ({time.perf_counter() - t:.2f} s)", flush=True)
            if not ok:
                bad.append((k1, k2))
    return bad


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-d", type=int, default=2)
    ap.add_argument("--quantum-max-d", type=int, default=-2, help="-2 skips the quantum check")
    args = ap.parse_args(argv)
    res = solve_dr_g11()
    bad = classical(dr_hierarchy(res.density, max_d=args.max_d), args.max_d)
    if args.quantum_max_d >= -1:
        q = solve_quantum_g11(res.density)
        bad += quantum(quantum_hierarchy(q.hamiltonian.density, max_d=max(args.quantum_max_d, 0)), args.quantum_max_d)
    print("non-commuting pairs:", bad)
    return 1 if bad else 0


if __name__ == "__main__":
    raise SystemExit(main())
