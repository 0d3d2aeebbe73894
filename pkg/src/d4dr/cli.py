"""Command-line front end.

    d4dr ds densities | ds poisson
    d4dr dr solve | dr quantum | dr restrict --kill 4|2,4
    d4dr verify [--suite ds|dr|quantum|all]
    d4dr export --what NAME --format canonical_text|latex|json

Global flags (accepted before or after the command): ``--trunc N`` (DS
truncation depth), ``--zcap K`` (recursion steps used by the DR solver),
``--out DIR`` (write JSON artifacts plus ``manifest.json``), ``--jobs J``
(parallel verify checks; output is identical for every J).

Exit codes: 0 success, 1 a check failed, 2 usage error, 3 internal or
truncation error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# rendering helpers
# ---------------------------------------------------------------------------


def _render(f, fmt="canonical_text"):
    from .parse import render, to_json

    return to_json(f) if fmt == "json" else render(f, fmt)


def render_operator_entry(entry: dict) -> str:
    """Text of sum_k c_k d_x^k, e.g. ``2*dx`` or ``(1/6*eps^2)*dx^3 + 2*u1_0*dx``."""
    from .parse import render

    parts = []
    for k in sorted(entry, reverse=True):
        c = entry[k]
        if not c:
            continue
        ct = render(c)
        d = "1" if k == 0 else ("dx" if k == 1 else f"dx^{k}")
        if k == 0:
            parts.append(ct if len(c) == 1 else f"({ct})")
        elif ct == "1":
            parts.append(d)
        elif ct == "-1":
            parts.append(f"-{d}")
        else:
            parts.append(f"{ct}*{d}" if len(c) == 1 and "+" not in ct[1:] and " - " not in ct else f"({ct})*{d}")
    return " + ".join(parts) if parts else "0"


def operator_to_json(K) -> dict:
    from .parse import to_json

    return {
        f"{a},{b}": {str(k): to_json(c) for k, c in sorted(K.entry(a, b).items()) if c}
        for a in K.indices
        for b in K.indices
    }


def operator_text(K) -> str:
    return "\n".join(f"K^({a},{b}) = {render_operator_entry(K.entry(a, b))}" for a in K.indices for b in K.indices)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


class Artifacts:
    """Writes JSON artifacts under ``--out`` and a manifest listing their hashes."""

    def __init__(self, out: str | None):
        self.dir = Path(out) if out else None
        self.files: dict = {}

    def write(self, name: str, payload) -> None:
        if self.dir is None:
            return
        self.dir.mkdir(parents=True, exist_ok=True)
        data = json.dumps(payload, indent=1, sort_keys=True) + "\n"
        (self.dir / name).write_text(data)
        self.files[name] = hashlib.sha256(data.encode()).hexdigest()

    def close(self, command: str) -> None:
        if self.dir is None or not self.files:
            return
        from . import __version__

        manifest = {"command": command, "version": __version__, "files": dict(sorted(self.files.items()))}
        (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _ds_config(args):
    from .ds_d4 import DSConfig
    from .verify import _ds_config

    return DSConfig() if args.trunc is None else _ds_config(args.trunc)


def cmd_ds(args, art: Artifacts) -> int:
    from .ds_d4 import TABLE, poisson_matrix_first, tau_density

    cfg = _ds_config(args)
    if args.what == "densities":
        payload = {}
        for a, p in sorted(TABLE):
            if p < 0:
                continue
            h = tau_density(a, p, cfg)
            print(f"h_{a},{p} = {_render(h)}")
            payload[f"h_{a},{p}"] = _render(h, "json")
        art.write("ds_densities.json", payload)
    else:
        K = poisson_matrix_first(cfg)
        print(operator_text(K))
        art.write("ds_poisson.json", operator_to_json(K))
    return EXIT_OK


def _classical(args):
    from .dr_classical import solve_dr_g11

    log = (lambda msg: print(msg, file=sys.stderr)) if args.verbose else None
    return solve_dr_g11(z_order_cap=args.zcap, log=log)


def _deterministic(report):
    """Drop wall-clock fields so stdout and artifacts are reproducible byte for byte."""
    if isinstance(report, dict):
        return {k: _deterministic(v) for k, v in report.items() if k != "seconds"}
    if isinstance(report, list):
        return [_deterministic(v) for v in report]
    return report


def cmd_dr(args, art: Artifacts) -> int:
    kill = _parse_kill(args.kill) if args.what == "restrict" else None  # validate before the solve
    res = _classical(args)
    if args.what == "solve":
        rep = _deterministic(res.report())
        print(f"g_1,1 = {_render(res.density)}")
        print(json.dumps(rep, sort_keys=True))
        art.write("dr_classical.json", {"g11": _render(res.density, "json"), "report": rep})
    elif args.what == "quantum":
        from .dr_quantum import solve_quantum_g11

        q = solve_quantum_g11(res.density)
        print(f"G_1,1 - g_1,1 = {_render(q.hamiltonian.correction)}")
        rep = _deterministic(q.report())
        print(json.dumps(rep, sort_keys=True))
        art.write(
            "dr_quantum.json",
            {"correction": _render(q.hamiltonian.correction, "json"), "classical": _render(res.density, "json"), "report": rep},
        )
    else:
        from .dr_classical import restrict_subhierarchy

        r = restrict_subhierarchy(res.density, kill)
        K = r.reduced_operator
        print(f"restricted to the locus u^a = 0 for a in {sorted(kill)}; closure violations: {len(r.closure_violations)}")
        print(operator_text(K))
        tag = "b3" if kill == {4} else "g2" if kill == {2, 4} else "_".join(map(str, sorted(kill)))
        art.write(f"dr_restrict_{tag}.json", {"kill": sorted(kill), "operator": operator_to_json(K), "g11": _render(r.g11, "json")})
        if r.closure_violations:
            return EXIT_FAIL
    return EXIT_OK


def _parse_kill(text) -> set:
    if not text:
        raise UsageError("dr restrict requires --kill (e.g. --kill 4 or --kill 2,4)")
    try:
        kill = {int(t) for t in text.split(",")}
    except ValueError:
        raise UsageError(f"--kill: expected comma-separated field indices, got {text!r}") from None
    if not kill <= {1, 2, 3, 4} or 1 in kill:
        raise UsageError("--kill: indices must lie in 2..4")
    return kill


def cmd_verify(args, art: Artifacts) -> int:
    from .verify import Context, run_suite

    ctx = None if args.jobs > 1 else Context(_ds_config(args) if args.trunc is not None else None, args.zcap)
    results = run_suite(args.suite, ctx, jobs=args.jobs, trunc=args.trunc)
    for r in results:
        for line in r.lines():
            print(line)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    art.write(
        f"verify_{args.suite}.json",
        [{"suite": r.suite, "name": r.name, "passed": r.passed, "offending": r.offending} for r in results],
    )
    if any(r.detail == "error" and "TruncationError" in " ".join(r.offending) for r in failed):
        return EXIT_INTERNAL
    return EXIT_FAIL if failed else EXIT_OK


def cmd_export(args, art: Artifacts) -> int:
    from .fixtures import FIXTURES, get

    what, fmt = args.what, args.format
    if what in ("polylog", "polylog_coeffs"):
        from .dr_quantum import polylog_signed, polylog_table

        table = polylog_table(3, 6)
        payload = {
            ",".join(map(str, ds)): {"ctilde": [str(c) for c in v], "signed": [str(c) for c in polylog_signed(*ds)]}
            for ds, v in sorted(table.items())
        }
        print(json.dumps(payload, indent=1, sort_keys=True))
        art.write("polylog_coeffs.json", payload)
        return EXIT_OK
    if what == "fixtures":
        for f in FIXTURES:
            print(f"{f.name}\t{f.anchor}")
        return EXIT_OK
    try:
        fx = get(what)
    except KeyError:
        raise UsageError(f"export: unknown object {what!r} (a fixture name, 'fixtures' or 'polylog')") from None
    obj = fx.load()
    if fx.kind == "matrix":
        payload = operator_to_json(obj) if fmt == "json" else operator_text(obj)
    else:
        payload = _render(obj, fmt)
    print(json.dumps(payload, indent=1, sort_keys=True) if fmt == "json" else payload)
    art.write(f"{what}.json", {"name": what, "anchor": fx.anchor, "format": fmt, "value": payload})
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--trunc", type=int, default=d, help="DS truncation depth (deepest order of the Lax root)")
    p.add_argument("--zcap", type=int, default=argparse.SUPPRESS if suppress else 3, help="recursion steps imposed by the DR solver")
    p.add_argument("--out", default=d, help="directory for JSON artifacts and manifest.json")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1, help="parallel verify checks")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="d4dr", description="Exact CAS for the D4 DS and DR hierarchies.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("ds", help="Drinfeld-Sokolov computations")
    ds.add_argument("what", choices=["densities", "poisson"])
    _global_flags(ds, suppress=True)

    dr = sub.add_parser("dr", help="double ramification computations")
    dr.add_argument("what", choices=["solve", "quantum", "restrict"])
    dr.add_argument("--kill", help="field indices to kill, e.g. 4 or 2,4")
    _global_flags(dr, suppress=True)

    ver = sub.add_parser("verify", help="run the verification suite")
    ver.add_argument("--suite", choices=["ds", "dr", "quantum", "all"], default="all")
    _global_flags(ver, suppress=True)

    ex = sub.add_parser("export", help="export fixtures or tables")
    ex.add_argument("--what", required=True, help="fixture name, 'fixtures' or 'polylog'")
    ex.add_argument("--format", choices=["canonical_text", "latex", "json"], default="canonical_text")
    _global_flags(ex, suppress=True)
    return p


def _canonical_command(args) -> str:
    """Command description independent of --jobs/--out (keeps the manifest deterministic)."""
    parts = [args.command]
    for key in ("what", "suite", "kill", "format", "trunc"):
        v = getattr(args, key, None)
        if v is not None:
            parts.append(f"{key}={v}")
    if args.command in ("dr", "verify"):
        parts.append(f"zcap={args.zcap}")
    return " ".join(parts)


COMMANDS = {"ds": cmd_ds, "dr": cmd_dr, "verify": cmd_verify, "export": cmd_export}


def main(argv=None) -> int:
    from .psido import TruncationError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.jobs < 1 or args.zcap < 0 or (args.trunc is not None and args.trunc < 1):
        print("error: --jobs must be >= 1, --zcap >= 0, --trunc >= 1", file=sys.stderr)
        return EXIT_USAGE
    art = Artifacts(args.out)
    try:
        code = COMMANDS[args.command](args, art)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # internal failure: report and map to exit code 3
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    art.close(_canonical_command(args))
    return code


if __name__ == "__main__":
    sys.exit(main())
