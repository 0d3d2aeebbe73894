"""Text grammar for differential polynomials, and renderers.

Grammar (LL(1))::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' unary) | ('/' INT))*
    unary   := '-' unary | power
    power   := atom ('^' ['-'] INT)?
    atom    := INT | 'I' | 'sqrt2' | 'eps' | 'hbar' | VAR | 'dx' '(' expr ')' | '(' expr ')'
    VAR     := ('s'|'v'|'vt'|'u'|'ut') INDEX ['_' INT] | 'rho' ['_' INT] | ('delx'|'dely') ['_' INT]

``u3_2`` is the jet variable u^3_2; ``ut3_2`` is its normal-coordinate counterpart;
``rho`` is the DS variable with s^4 = v^4 = rho^2 (so ``s4_k`` lowers to
``dx^k(rho^2)``); ``delx_k``/``dely_k`` are the auxiliary delta-function jets.
A rational literal is simply ``p/q`` (division by an integer).
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .diffpoly import (
    EPS,
    HBAR,
    DiffPoly,
    JetVariable,
    const,
    d_x,
    d_x_n,
    monomial_parts,
    monomial_sort_key,
    var,
)
from .scalars import I, SQRT2, mpq, scalar_to_json, to_scalar

__all__ = ["ParseError", "parse", "render", "Token"]

_INDEX_RANGE = {"s": (1, 4), "v": (1, 4), "vt": (1, 3), "u": (1, 4), "ut": (1, 4)}
_VAR_RE = re.compile(r"(ut|vt|s|v|u)(\d+)(?:_(\d+))?$")
_SPECIAL_RE = re.compile(r"(rho|delx|dely)(?:_(\d+))?$")


class ParseError(ValueError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} at position {pos}")
        self.pos = pos


@dataclass
class Token:
    kind: str  # 'int', 'name', 'op', 'end'
    text: str
    pos: int


_TOKEN_RE = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9_]*)|(.))")


def tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            break
        if m.group(1) is not None:
            out.append(Token("int", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            out.append(Token("name", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", m.start(3))
            out.append(Token("op", ch, m.start(3)))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def eat(self, kind, text=None):
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise ParseError(f"expected {want!r}, found {t.text or 'end of input'!r}", t.pos)
        self.i += 1
        return t

    def at(self, kind, text=None):
        t = self.tok
        return t.kind == kind and (text is None or t.text == text)

    def parse(self):
        e = self.expr()
        if not self.at("end"):
            raise ParseError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return e

    def expr(self):
        e = self.term()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.eat("op").text
            t = self.term()
            e = e + t if op == "+" else e - t
        return e

    def term(self):
        e = self.unary()
        while self.at("op", "*") or self.at("op", "/"):
            op = self.eat("op").text
            if op == "*":
                e = e * self.unary()
            else:
                t = self.eat("int")
                n = int(t.text)
                if n == 0:
                    raise ParseError("division by zero", t.pos)
                e = e.scale(mpq(1, n))
        return e

    def unary(self):
        if self.at("op", "-"):
            self.eat("op")
            return -self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.at("op", "^"):
            self.eat("op")
            neg = False
            if self.at("op", "-"):
                self.eat("op")
                neg = True
            t = self.eat("int")
            k = int(t.text)
            if neg:
                k = -k
            try:
                base = base ** k
            except ValueError as exc:
                raise ParseError(str(exc), t.pos) from None
        return base

    def atom(self):
        t = self.tok
        if t.kind == "int":
            self.eat("int")
            return const(int(t.text))
        if t.kind == "op" and t.text == "(":
            self.eat("op")
            e = self.expr()
            self.eat("op", ")")
            return e
        if t.kind == "name":
            self.eat("name")
            name = t.text
            if name == "I":
                return const(I)
            if name == "sqrt2":
                return const(SQRT2)
            if name == "eps":
                return EPS
            if name == "hbar":
                return HBAR
            if name == "dx":
                self.eat("op", "(")
                e = self.expr()
                self.eat("op", ")")
                return d_x(e)
            return _lower_var(name, t.pos)
        raise ParseError(f"unexpected token {t.text or 'end of input'!r}", t.pos)


def _lower_var(name, pos):
    m = _SPECIAL_RE.match(name)
    if m:
        k = int(m.group(2) or 0)
        tag = {"rho": "rho", "delx": "dx", "dely": "dy"}[m.group(1)]
        return var(tag, 0, k)
    m = _VAR_RE.match(name)
    if not m:
        raise ParseError(f"unknown symbol or alphabet prefix {name!r}", pos)
    tag, idx, k = m.group(1), int(m.group(2)), int(m.group(3) or 0)
    lo, hi = _INDEX_RANGE[tag]
    if not lo <= idx <= hi:
        raise ParseError(f"index out of range: {name!r}", pos)
    if idx == 4 and tag in ("s", "v"):
        return d_x_n(var("rho") ** 2, k)
    return var(tag, idx, k)


def parse(text: str, alphabet=None) -> DiffPoly:
    """Parse ``text`` to a DiffPoly; optionally assert its alphabet."""
    f = _Parser(text).parse()
    if alphabet is not None and f.terms and f.alphabet not in (None, alphabet):
        if not (alphabet in ("s", "v") and f.alphabet == "rho"):
            raise ParseError(f"expected alphabet {alphabet!r}, got {f.alphabet!r}", 0)
    if alphabet is not None and f.alphabet is None:
        f = DiffPoly._raw(f.terms, alphabet)
    return f


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_TEXT_NAME = {"s": "s", "v": "v", "vt": "vt", "u": "u", "ut": "ut"}


def _var_text(v: JetVariable) -> str:
    if v.tag == "rho":
        return f"rho_{v.order}"
    if v.tag in ("dx", "dy"):
        return f"del{v.tag[1]}_{v.order}"
    return f"{_TEXT_NAME[v.tag]}{v.index}_{v.order}"


def _coeff_text(c) -> tuple:
    """Return (sign, text) with text '' for unit magnitude rationals."""
    s = to_scalar(c)
    if s.is_real_rational():
        q = s.a
        sign = "-" if q < 0 else "+"
        q = abs(q)
        if q == 1:
            return sign, ""
        return sign, f"{q.numerator}/{q.denominator}" if q.denominator != 1 else f"{q.numerator}"
    from .scalars import scalar_text

    return "+", f"({scalar_text(s)})"


def render(f: DiffPoly, fmt: str = "canonical_text") -> str:
    if fmt == "canonical_text":
        return _render_text(f)
    if fmt == "latex":
        return _render_latex(f)
    if fmt == "json":
        return json.dumps(to_json(f))
    raise ValueError(f"unknown render format {fmt!r}")


def _render_text(f: DiffPoly) -> str:
    if not f.terms:
        return "0"
    pieces = []
    for m in sorted(f.terms, key=monomial_sort_key):
        eps, hb, vs = monomial_parts(m)
        sign, ctext = _coeff_text(f.terms[m])
        factors = []
        if eps:
            factors.append("eps" if eps == 1 else f"eps^{eps}")
        if hb:
            factors.append("hbar" if hb == 1 else f"hbar^{hb}")
        for v, e in vs:
            factors.append(_var_text(v) if e == 1 else f"{_var_text(v)}^{e}")
        body = "*".join(([ctext] if ctext else []) + factors) or (ctext or "1")
        if ctext and "/" in ctext and factors and not ctext.startswith("("):
            num, den = ctext.split("/")
            body = "*".join(([num] if num != "1" else []) + factors) + f"/{den}"
            if num == "1" and not factors:
                body = f"1/{den}"
        pieces.append((sign, body))
    out = ("-" if pieces[0][0] == "-" else "") + pieces[0][1]
    for sign, body in pieces[1:]:
        out += f" {sign} {body}"
    return out


_LATEX_BASE = {"s": "s", "v": "v", "vt": r"{\widetilde v}", "u": "u", "ut": r"{\widetilde u}"}


def _var_latex(v: JetVariable) -> str:
    if v.tag == "rho":
        base = r"\varrho"
        return base if v.order == 0 else f"{base}_{{{v.order}}}"
    if v.tag in ("dx", "dy"):
        return rf"\delta^{{({v.order})}}_{v.tag[1]}"
    sub = "" if v.order == 0 else (f"_{v.order}" if v.order < 10 else f"_{{{v.order}}}")
    return f"{_LATEX_BASE[v.tag]}^{v.index}{sub}"


def _render_latex(f: DiffPoly) -> str:
    if not f.terms:
        return "0"
    out = []
    for n, m in enumerate(sorted(f.terms, key=monomial_sort_key)):
        eps, hb, vs = monomial_parts(m)
        s = to_scalar(f.terms[m])
        if s.is_real_rational():
            q = s.a
            sign = "-" if q < 0 else "+"
            q = abs(q)
            if q == 1 and (vs or eps or hb):
                ctext = ""
            elif q.denominator == 1:
                ctext = str(q.numerator)
            else:
                ctext = rf"\frac{{{q.numerator}}}{{{q.denominator}}}"
        else:
            from .scalars import scalar_text

            sign, ctext = "+", "(" + scalar_text(s).replace("*I", "i").replace("I", "i").replace("sqrt2", r"\sqrt{2}").replace("*", "") + ")"
        factors = []
        for v, e in vs:
            t = _var_latex(v)
            factors.append(t if e == 1 else rf"\left({t}\right)^{{{e}}}")
        if eps:
            factors.append(r"\varepsilon" if eps == 1 else rf"\varepsilon^{{{eps}}}")
        if hb:
            factors.append(r"\hbar" if hb == 1 else rf"\hbar^{{{hb}}}")
        body = ctext + "".join(factors)
        if n == 0:
            out.append(("-" if sign == "-" else "") + body)
        else:
            out.append(f" {sign} {body}")
    return "".join(out)


def to_json(f: DiffPoly) -> list:
    rows = []
    for m in sorted(f.terms, key=monomial_sort_key):
        eps, hb, vs = monomial_parts(m)
        rows.append(
            {
                "coeff": scalar_to_json(f.terms[m]),
                "eps": eps,
                "hbar": hb,
                "vars": [[v.tag, v.index, v.order, e] for v, e in vs],
            }
        )
    return rows


def from_json(rows) -> DiffPoly:
    from .diffpoly import monomial
    from .scalars import scalar_from_json

    out = const(0)
    for r in rows:
        out = out + monomial(r["eps"], r["hbar"], [((t, a, k), e) for t, a, k, e in r["vars"]], scalar_from_json(r["coeff"]))
    return out
