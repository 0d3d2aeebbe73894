"""Convert a typeset LaTeX formula to the text grammar of `d4dr.parse`.

Used once to transcribe the reference formulas stored in ``d4dr.fixtures``; kept
so that every fixture can be re-derived from its LaTeX source and audited.

Usage::

    python scripts/latex_to_grammar.py [--plain-u ut|u] < formula.tex
"""
from __future__ import annotations

import argparse
import re
import sys

_DROP = [
    r"\textstyle", r"\displaystyle", r"\small", r"\normalsize", r"\smash", r"\int",
    r"\left.", r"\right.", r"\\", "&", r"\,", r"\ ", r"\nonumber", r"\right\}", r"\left\{",
]
_TOKEN = re.compile(r"\s*(\\[A-Za-z]+|\d+|[A-Za-z]|\S)")


def _preprocess(src: str) -> str:
    src = src.replace(r"{\widetilde u}", r"\UT").replace(r"\tilde{v}", r"\VT").replace(r"\tilde{u}", r"\UT")
    src = src.replace(r"{\partial}", r"\partial")
    src = src.replace(r"\left(", "(").replace(r"\right)", ")").replace(r"\left[", "(").replace(r"\right]", ")")
    for d in _DROP:
        src = src.replace(d, " ")
    src = re.sub(r"\{\s*\}", "", src)
    src = re.sub(r"\)\s*dx\s*$", ")", src)
    return src


class _Conv:
    def __init__(self, src: str, plain_u: str):
        self.toks = _TOKEN.findall(_preprocess(src))
        self.i = 0
        self.plain_u = plain_u

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def group_text(self) -> str:
        """Read a braced group (or a single token) and return its raw token text."""
        t = self.take()
        if t != "{":
            return t
        depth, out = 1, []
        while True:
            t = self.take()
            if t is None:
                raise ValueError("unbalanced braces")
            if t == "{":
                depth += 1
            elif t == "}":
                depth -= 1
                if depth == 0:
                    return "".join(out)
            out.append(t)

    def group(self) -> str:
        """Convert a braced group recursively."""
        if self.peek() != "{":
            return self.seq(single=True)
        self.take()
        out = self.seq(stop="}")
        self.take()
        return out

    def scripts(self):
        sup = sub = None
        while self.peek() in ("^", "_"):
            which = self.peek()
            if which == "^" and sup is not None:
                break
            if which == "_" and sub is not None:
                break
            self.take()
            val = self.group_text()
            if which == "^":
                sup = val
            else:
                sub = val
        return sup, sub

    def seq(self, stop=None, single=False) -> str:
        out = []
        operand = False

        def emit(text, starts_operand=True, ends_operand=True):
            nonlocal operand
            if operand and starts_operand:
                out.append("*")
            out.append(text)
            operand = ends_operand

        while True:
            t = self.peek()
            if t is None or t == stop:
                break
            self.take()
            if t in ("+", "-"):
                out.append(f" {t} ")
                operand = False
            elif t == "(":
                emit("(", True, False)
            elif t == ")":
                out.append(")")
                operand = True
            elif t == "{":
                self.i -= 1
                emit("(" + self.group() + ")")
            elif t == "^":
                e = self.group_text()
                out.append(f"^{e}")
                operand = True
            elif t.isdigit():
                emit(t)
            elif t == r"\frac":
                num = self.group()
                den = self.group()
                if den.strip().isdigit():
                    num = num.strip()
                    emit(f"{num}/{den.strip()}" if num.isdigit() else f"({num})/{den.strip()}")
                else:
                    emit(f"({num})*({den})^-1")
            elif t == r"\sqrt":
                arg = self.group()
                if arg.strip() != "2":
                    raise ValueError(f"unsupported square root of {arg!r}")
                emit("sqrt2")
            elif t in (r"\varepsilon", r"\epsilon"):
                emit("eps")
            elif t == r"\hbar":
                emit("hbar")
            elif t == "i":
                emit("I")
            elif t == r"\partial":
                sup, sub = self.scripts()
                emit(f"delx_{sup or 1}")
            elif t in (r"\UT", r"\VT", "u", "v", "s", "t"):
                sup, sub = self.scripts()
                prefix = {r"\UT": "ut", r"\VT": "vt", "u": self.plain_u, "v": "v", "s": "s", "t": "u"}[t]
                emit(f"{prefix}{sup}_{sub or 0}")
            else:
                raise ValueError(f"unsupported token {t!r}")
            if single:
                break
        return "".join(out)


def latex_to_grammar(src: str, plain_u: str = "u") -> str:
    c = _Conv(src, plain_u)
    text = c.seq()
    if c.peek() is not None:
        raise ValueError(f"trailing input at token {c.peek()!r}")
    return re.sub(r"\s+", " ", text).strip()


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--plain-u", default="u", choices=["u", "ut"], help="alphabet for bare u^a_k")
    args = ap.parse_args(argv)
    print(latex_to_grammar(sys.stdin.read(), args.plain_u))


if __name__ == "__main__":
    main()
