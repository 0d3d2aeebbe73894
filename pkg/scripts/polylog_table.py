"""Print the polylogarithm product coefficients C~ and signed C for small tuples.

Usage::

    python3 scripts/polylog_table.py [--max-n 3] [--max-sum 6]
"""
from __future__ import annotations

import argparse

from d4dr.dr_quantum import polylog_series_check, polylog_signed, polylog_table


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-n", type=int, default=3)
    ap.add_argument("--max-sum", type=int, default=6)
    args = ap.parse_args(argv)
    ok = True
    for ds, ct in sorted(polylog_table(args.max_n, args.max_sum).items()):
        series = polylog_series_check(*ds)
        ok &= series
        print(f"{ds}: C~ = {[str(c) for c in ct]}  C = {[str(c) for c in polylog_signed(*ds)]}  series {'ok' if series else 'MISMATCH'}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
