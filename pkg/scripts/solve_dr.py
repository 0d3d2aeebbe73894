"""Solve the classical and quantum DR-type problems and print the reports.

Usage::

    python3 scripts/solve_dr.py [--zcap 3] [--quantum] [--out report.json]
"""
from __future__ import annotations

import argparse
import json
import sys
import time

from d4dr.diffpoly import reduce_modulo_dx
from d4dr.dr_classical import solve_dr_g11
from d4dr.dr_quantum import solve_quantum_g11
from d4dr.parse import render


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--zcap", type=int, default=3, help="recursion steps imposed by condition (a)")
    ap.add_argument("--quantum", action="store_true", help="also solve for the hbar-correction")
    ap.add_argument("--out", help="write a JSON report here")
    args = ap.parse_args(argv)

    t0 = time.perf_counter()
    res = solve_dr_g11(z_order_cap=args.zcap, log=lambda m: print(m, file=sys.stderr))
    report = {"classical": res.report(), "g11_reduced": render(reduce_modulo_dx(res.density))}
    print(f"g_1,1 = {render(res.density)}")
    print(f"nullity before normalization: {res.nullity_before_normalization}")
    if args.quantum:
        q = solve_quantum_g11(res.density)
        print(f"G_1,1 - g_1,1 = {render(q.hamiltonian.correction)}")
        report["quantum"] = q.report()
        report["correction"] = render(q.hamiltonian.correction)
    report["seconds"] = round(time.perf_counter() - t0, 2)
    print(f"total {report['seconds']} s", file=sys.stderr)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=1, sort_keys=True)


if __name__ == "__main__":
    main()
