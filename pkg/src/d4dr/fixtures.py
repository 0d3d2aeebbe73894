"""Reference formulas, stored as audit-friendly text in the expression grammar.

Each fixture is a formula transcribed from its LaTeX source with
``scripts/latex_to_grammar.py`` and kept verbatim (including any printed
misprints), together with a neutral anchor tag naming the formula it reproduces.
Matrix fixtures list operator entries in which ``delx_k`` stands for d_x^k.
The verification suite (:mod:`d4dr.verify`) consumes every fixture; the test
suite checks that no fixture is dead.
"""
from __future__ import annotations

from dataclasses import dataclass

from .diffpoly import DiffPoly, const, monomial, monomial_parts
from .parse import parse

__all__ = ["Fixture", "FIXTURES", "get", "load", "load_matrix", "by_anchor"]


@dataclass(frozen=True)
class Fixture:
    name: str
    alphabet: str
    text: object  # str, or tuple of row tuples for kind == "matrix"
    anchor: str
    kind: str = "poly"

    def load(self):
        if self.kind == "matrix":
            return load_matrix(self)
        return parse(self.text, self.alphabet)


FIXTURES: tuple = (
    Fixture(
        'ds_miura_s1',
        'ut',
        (
            '1/2*ut1_0 + 1/12*ut2_0*ut3_0 + 1/216*(ut3_0)^3 + ( - 1/8*(ut3_1)^2 - 1/6*ut2_2 '
            '- 1/9*ut3_0*ut3_2)*eps^2 + 23/90*ut3_4*eps^4'
        ),
        'ds-inverse-normal-miura',
    ),
    Fixture(
        'ds_miura_s2',
        'ut',
        (
            '1/2*ut2_0 + 1/8*(ut3_0)^2 - 1/2*ut3_2*eps^2'
        ),
        'ds-inverse-normal-miura',
    ),
    Fixture(
        'ds_miura_s3',
        'ut',
        (
            '1/2*ut3_0'
        ),
        'ds-inverse-normal-miura',
    ),
    Fixture(
        'ds_miura_s4',
        'ut',
        (
            '1/4*(ut4_0)^2'
        ),
        'ds-inverse-normal-miura',
    ),
    Fixture(
        'ds_h1_0',
        'ut',
        (
            '(1/12*(ut2_0)^2 + 1/6*ut1_0*ut3_0 + 1/4*(ut4_0)^2) + (1/72*ut3_0*(ut3_1)^2 + '
            '1/3*ut1_2 + 1/216*(ut3_0)^2*ut3_2)*eps^2 + (1/216*(ut3_2)^2 + 1/72*ut3_1*ut3_3 '
            '+ 1/180*ut3_0*ut3_4)*eps^4 + 1/840*ut3_6*eps^6'
        ),
        'ds-densities-h-alpha-0',
    ),
    Fixture(
        'ds_h2_0',
        'ut',
        (
            '(1/6*ut1_0*ut2_0 - 1/72*(ut2_0)^2*ut3_0 + 1/648*ut2_0*(ut3_0)^3 + '
            '1/24*ut3_0*(ut4_0)^2) + ( - 1/24*(ut2_1)^2 + 1/24*ut3_0*ut2_1*ut3_1 + '
            '1/72*ut2_0*(ut3_1)^2 + 1/8*(ut4_1)^2 - 1/18*ut2_0*ut2_2 + 1/72*(ut3_0)^2*ut2_2 '
            '+ 1/54*ut2_0*ut3_0*ut3_2 + 1/6*ut4_0*ut4_2)*eps^2 + (1/12*ut2_2*ut3_2 + '
            '5/72*ut3_1*ut2_3 + 1/18*ut2_1*ut3_3 + 1/36*ut3_0*ut2_4 + '
            '2/135*ut2_0*ut3_4)*eps^4 + 1/72*ut2_6*eps^6'
        ),
        'ds-densities-h-alpha-0',
    ),
    Fixture(
        'ds_h3_0',
        'ut',
        (
            '(1/12*(ut1_0)^2 - 1/216*(ut2_0)^3 + 1/432*(ut2_0)^2*(ut3_0)^2 + '
            '1/233280*(ut3_0)^6 + 1/24*ut2_0*(ut4_0)^2 + 1/144*(ut3_0)^2*(ut4_0)^2) + '
            '(5/432*ut3_0*(ut2_1)^2 + 1/108*ut3_0*ut1_1*ut3_1 + 1/36*ut2_0*ut2_1*ut3_1 + '
            '1/1296*(ut3_0)^3*(ut3_1)^2 + 1/12*ut4_0*ut3_1*ut4_1 + 5/144*ut3_0*(ut4_1)^2 + '
            '1/216*(ut3_0)^2*ut1_2 + 1/54*ut2_0*ut3_0*ut2_2 + 1/108*(ut2_0)^2*ut3_2 + '
            '1/3888*(ut3_0)^4*ut3_2 + 1/36*(ut4_0)^2*ut3_2 + 1/18*ut3_0*ut4_0*ut4_2)*eps^2 '
            '+ (5/2592*(ut3_1)^4 + 13/720*(ut2_2)^2 + 55/3888*ut3_0*(ut3_1)^2*ut3_2 + '
            '29/1080*ut1_2*ut3_2 + 67/15552*(ut3_0)^2*(ut3_2)^2 + 13/240*(ut4_2)^2 + '
            '1/30*ut3_1*ut1_3 + 31/1080*ut2_1*ut2_3 + 11/1080*ut1_1*ut3_3 + '
            '49/7776*(ut3_0)^2*ut3_1*ut3_3 + 31/360*ut4_1*ut4_3 + 1/60*ut3_0*ut1_4 + '
            '2/135*ut2_0*ut2_4 + 1/1296*(ut3_0)^3*ut3_4 + 2/45*ut4_0*ut4_4)*eps^4 + '
            '(1129/116640*(ut3_2)^3 + 1601/38880*ut3_1*ut3_2*ut3_3 + 1/120*ut3_0*(ut3_3)^2 '
            '+ 19/1620*(ut3_1)^2*ut3_4 + 29/2160*ut3_0*ut3_2*ut3_4 + '
            '13/1944*ut3_0*ut3_1*ut3_5 + 11/1080*ut1_6 + 17/19440*(ut3_0)^2*ut3_6)*eps^6 + '
            '(191/43200*(ut3_4)^2 + 1501/194400*ut3_3*ut3_5 + 949/194400*ut3_2*ut3_6 + '
            '127/64800*ut3_1*ut3_7 + 13/32400*ut3_0*ut3_8)*eps^8 + 7/118800*ut3_10*eps^10'
        ),
        'ds-densities-h-alpha-0',
    ),
    Fixture(
        'ds_h4_0',
        'ut',
        (
            '(1/2*ut1_0*ut4_0 + 1/12*ut2_0*ut3_0*ut4_0 + 1/216*(ut3_0)^3*ut4_0) + '
            '(1/24*ut4_0*(ut3_1)^2 + 1/4*ut2_1*ut4_1 + 1/8*ut3_0*ut3_1*ut4_1 + '
            '1/6*ut4_0*ut2_2 + 1/18*ut3_0*ut4_0*ut3_2 + 1/6*ut2_0*ut4_2 + '
            '1/24*(ut3_0)^2*ut4_2)*eps^2 + (1/4*ut3_2*ut4_2 + 1/6*ut4_1*ut3_3 + '
            '5/24*ut3_1*ut4_3 + 2/45*ut4_0*ut3_4 + 1/12*ut3_0*ut4_4)*eps^4 + '
            '1/24*ut4_6*eps^6'
        ),
        'ds-densities-h-alpha-0',
    ),
    Fixture(
        'ds_h1_1',
        'ut',
        (
            '(1/12*ut1_0*(ut2_0)^2 + 1/12*(ut1_0)^2*ut3_0 - 1/108*(ut2_0)^3*ut3_0 + '
            '1/432*(ut2_0)^2*(ut3_0)^3 + 1/326592*(ut3_0)^7 + 1/4*ut1_0*(ut4_0)^2 + '
            '1/12*ut2_0*ut3_0*(ut4_0)^2 + 1/144*(ut3_0)^3*(ut4_0)^2) + (1/6*(ut1_1)^2 + '
            '1/3*ut1_2*ut1_0 - 5/72*(ut2_1)^2*ut2_0 + 5/24*(ut4_1)^2*ut2_0 - '
            '1/18*ut2_2*(ut2_0)^2 + 1/54*(ut3_1)^2*(ut2_0)^2 + 1/72*(ut3_1)^2*ut1_0*ut3_0 + '
            '19/216*ut2_1*ut3_1*ut2_0*ut3_0 + 1/36*ut3_2*(ut2_0)^2*ut3_0 + '
            '1/54*(ut2_1)^2*(ut3_0)^2 + 1/72*ut1_1*ut3_1*(ut3_0)^2 + '
            '1/18*(ut4_1)^2*(ut3_0)^2 + 1/216*ut3_2*ut1_0*(ut3_0)^2 + '
            '7/216*ut2_2*ut2_0*(ut3_0)^2 + 1/216*ut1_2*(ut3_0)^3 + '
            '7/7776*(ut3_1)^2*(ut3_0)^4 + 1/3888*ut3_2*(ut3_0)^5 + 5/12*ut2_1*ut4_1*ut4_0 + '
            '1/3*ut4_2*ut2_0*ut4_0 + 19/72*ut3_1*ut4_1*ut3_0*ut4_0 + '
            '7/72*ut4_2*(ut3_0)^2*ut4_0 + 1/6*ut2_2*(ut4_0)^2 + 1/18*(ut3_1)^2*(ut4_0)^2 + '
            '1/12*ut3_2*ut3_0*(ut4_0)^2)*eps^2 + (7/24*ut2_1*ut2_2*ut3_1 + '
            '5/72*ut1_2*(ut3_1)^2 + 31/216*(ut2_1)^2*ut3_2 + 13/216*ut1_1*ut3_1*ut3_2 + '
            '31/72*ut3_2*(ut4_1)^2 + 7/8*ut3_1*ut4_1*ut4_2 + 1/216*(ut3_2)^2*ut1_0 + '
            '1/72*ut3_1*ut3_3*ut1_0 + 35/216*ut2_3*ut3_1*ut2_0 + 23/108*ut2_2*ut3_2*ut2_0 + '
            '4/27*ut2_1*ut3_3*ut2_0 + 7/270*ut3_4*(ut2_0)^2 + 13/144*(ut2_2)^2*ut3_0 + '
            '29/216*ut2_1*ut2_3*ut3_0 + 1/9*ut1_3*ut3_1*ut3_0 + 7/648*(ut3_1)^4*ut3_0 + '
            '19/216*ut1_2*ut3_2*ut3_0 + 7/216*ut1_1*ut3_3*ut3_0 + 13/48*(ut4_2)^2*ut3_0 + '
            '29/72*ut4_1*ut4_3*ut3_0 + 1/180*ut3_4*ut1_0*ut3_0 + 7/108*ut2_4*ut2_0*ut3_0 + '
            '1/36*ut1_4*(ut3_0)^2 + 53/1296*(ut3_1)^2*ut3_2*(ut3_0)^2 + '
            '133/15552*(ut3_2)^2*(ut3_0)^3 + 97/7776*ut3_1*ut3_3*(ut3_0)^3 + '
            '1/864*ut3_4*(ut3_0)^4 + 4/9*ut3_3*ut4_1*ut4_0 + 23/36*ut3_2*ut4_2*ut4_0 + '
            '35/72*ut3_1*ut4_3*ut4_0 + 7/36*ut4_4*ut3_0*ut4_0 + 7/90*ut3_4*(ut4_0)^2)*eps^4 '
            '+ (349/3024*(ut2_3)^2 + 4/21*ut2_2*ut2_4 + 17/168*ut2_1*ut2_5 + '
            '65/504*ut1_5*ut3_1 + 151/756*ut1_4*ut3_2 + 473/2592*(ut3_1)^2*(ut3_2)^2 + '
            '31/168*ut1_3*ut3_3 + 19/216*(ut3_1)^3*ut3_3 + 19/210*ut1_2*ut3_4 + '
            '149/7560*ut1_1*ut3_5 + 349/1008*(ut4_3)^2 + 4/7*ut4_2*ut4_4 + '
            '17/56*ut4_1*ut4_5 + 1/840*ut3_6*ut1_0 + 53/1512*ut2_6*ut2_0 + '
            '65/1512*ut1_6*ut3_0 + 1741/23328*(ut3_2)^3*ut3_0 + '
            '2507/7776*ut3_1*ut3_2*ut3_3*ut3_0 + 593/6480*(ut3_1)^2*ut3_4*ut3_0 + '
            '271/7776*(ut3_3)^2*(ut3_0)^2 + 2141/38880*ut3_2*ut3_4*(ut3_0)^2 + '
            '341/12960*ut3_1*ut3_5*(ut3_0)^2 + 43/19440*ut3_6*(ut3_0)^3 + '
            '53/504*ut4_6*ut4_0)*eps^6 + (1/54*ut1_8 + 653/1944*ut3_2*(ut3_3)^2 + '
            '17803/68040*(ut3_2)^2*ut3_4 + 11129/30240*ut3_1*ut3_3*ut3_4 + '
            '65141/272160*ut3_1*ut3_2*ut3_5 + 145/3024*(ut3_1)^2*ut3_6 + '
            '17503/302400*(ut3_4)^2*ut3_0 + 977/10080*ut3_3*ut3_5*ut3_0 + '
            '15103/272160*ut3_2*ut3_6*ut3_0 + 1831/90720*ut3_1*ut3_7*ut3_0 + '
            '19/9720*ut3_8*(ut3_0)^2)*eps^8 + (9973/340200*(ut3_5)^2 + '
            '1301/25200*ut3_4*ut3_6 + 347/10080*ut3_3*ut3_7 + 4427/272160*ut3_2*ut3_8 + '
            '89/18144*ut3_1*ut3_9 + 1/1296*ut3_10*ut3_0)*eps^10 + 41/393120*ut3_12*eps^12'
        ),
        'ds-density-h-1-1',
    ),
    Fixture(
        'ds_vtilde1',
        'v',
        (
            '(1)*(2*sqrt2)^-1*v1_1*eps - (1)*(8*sqrt2)^-1*v2_3*eps^3 + '
            '(1)*(8*sqrt2)^-1*v3_5*eps^5'
        ),
        'ds-vtilde-from-v',
    ),
    Fixture(
        'ds_vtilde2',
        'v',
        (
            '(3)*(2*sqrt2)^-1*v2_1*eps - (5)*(4*sqrt2)^-1*v3_3*eps^3'
        ),
        'ds-vtilde-from-v',
    ),
    Fixture(
        'ds_vtilde3',
        'v',
        (
            '(5)*(2*sqrt2)^-1*v3_1*eps'
        ),
        'ds-vtilde-from-v',
    ),
    Fixture(
        'ds_normal_from_v1',
        'v',
        (
            'v1_0 - 1/6*v2_0*v3_0 + 7/216*(v3_0)^3 + (1/12*(v3_1)^2 - 5/12*v2_2 + '
            '11/36*v3_0*v3_2)*eps^2 + 89/90*v3_4*eps^4'
        ),
        'ds-normal-from-v',
    ),
    Fixture(
        'ds_normal_from_v2',
        'v',
        (
            'v2_0 - 1/4*(v3_0)^2 - 3/2*v3_2*eps^2'
        ),
        'ds-normal-from-v',
    ),
    Fixture(
        'ds_normal_from_v3',
        'v',
        (
            'v3_0'
        ),
        'ds-normal-from-v',
    ),
    Fixture(
        'ds_normal_from_v4',
        'v',
        (
            '2*rho'
        ),
        'ds-normal-from-v',
    ),
    Fixture(
        'ds_poisson_first',
        'ut',
        (
            ('(1/6*ut3_2*delx_1 + 1/2*ut3_1*delx_2 + 1/3*ut3_0*delx_3)*eps^2 + 4/15*delx_5*eps^4', '0', '6*delx_1', '0'),
            ('0', '6*delx_1', '0', '0'),
            ('6*delx_1', '0', '0', '0'),
            ('0', '0', '0', '2*delx_1'),
        ),
        'ds-first-poisson-matrix',
        kind="matrix",
    ),
    Fixture(
        'frobenius_potential',
        'u',
        (
            '(u1_0*(u2_0)^2)/12 + ((u1_0)^2*u3_0)/12 - ((u2_0)^3*u3_0)/216 + '
            '((u2_0)^2*(u3_0)^3)/1296 + ((u3_0)^7)/1632960 + (u1_0*(u4_0)^2)/4 + '
            '(u2_0*u3_0*(u4_0)^2)/24 + ((u3_0)^3*(u4_0)^2)/432'
        ),
        'frobenius-potential',
    ),
    Fixture(
        'dr_g11_genus0',
        'u',
        (
            '((u1_0*(u2_0)^2)/12 + ((u1_0)^2*u3_0)/12 - ((u2_0)^3*u3_0)/108 + '
            '((u2_0)^2*(u3_0)^3)/432 + ((u3_0)^7)/326592 + (u1_0*(u4_0)^2)/4 + '
            '(u2_0*u3_0*(u4_0)^2)/12 + ((u3_0)^3*(u4_0)^2)/144)'
        ),
        'dr-dispersionless-hamiltonian',
    ),
    Fixture(
        'dr_g11',
        'u',
        (
            '((1/12*u1_0*(u2_0)^2 + 1/12*(u1_0)^2*u3_0 - 1/108*(u2_0)^3*u3_0 + '
            '1/432*(u2_0)^2*(u3_0)^3 + 1/326592*(u3_0)^7 + 1/4*u1_0*(u4_0)^2 + '
            '1/12*u2_0*u3_0*(u4_0)^2 + 1/144*(u3_0)^3*(u4_0)^2) + ( - 1/6*(u1_1)^2 + '
            '1/24*u2_0*(u2_1)^2 - 1/72*(u3_0)^2*(u2_1)^2 - 1/108*(u3_0)^2*u1_1*u3_1 - '
            '1/27*u2_0*u3_0*u2_1*u3_1 - 1/108*(u2_0)^2*(u3_1)^2 - 1/2592*(u3_0)^4*(u3_1)^2 '
            '- 1/36*(u4_0)^2*(u3_1)^2 - 1/4*u4_0*u2_1*u4_1 - 1/9*u3_0*u4_0*u3_1*u4_1 - '
            '1/8*u2_0*(u4_1)^2 - 1/24*(u3_0)^2*(u4_1)^2)*eps^2 + ( - 35/46656*u3_0*(u3_1)^4 '
            '+ 1/144*(u3_1)^2*u1_2 + 5/216*u2_1*u3_1*u2_2 + 1/48*u3_0*(u2_2)^2 + '
            '1/54*u3_0*u1_2*u3_2 + 5/216*u2_0*u2_2*u3_2 + 7/7776*(u3_0)^3*(u3_2)^2 + '
            '5/72*u3_1*u4_1*u4_2 + 5/72*u4_0*u3_2*u4_2 + 1/16*u3_0*(u4_2)^2)*eps^4 + '
            '(1/486*(u3_1)^2*(u3_2)^2 + 13/5832*u3_0*(u3_2)^3 - 1/112*(u2_3)^2 - '
            '13/1512*u1_3*u3_3 - 1/972*(u3_0)^2*(u3_3)^2 - 3/112*(u4_3)^2)*eps^6 + ( - '
            '5/1728*u3_2*(u3_3)^2 + 1/1728*u3_0*(u3_4)^2)*eps^8 - 1/7776*(u3_5)^2*eps^10)'
        ),
        'dr-hamiltonian',
    ),
    Fixture(
        'dr_normal_miura1',
        'u',
        (
            'u1_0 + (1/36*(u3_1)^2 + 1/36*u3_0*u3_2)*eps^2 + 1/45*u3_4*eps^4'
        ),
        'dr-normal-miura',
    ),
    Fixture(
        'dr_normal_miura2',
        'u',
        (
            'u2_0'
        ),
        'dr-normal-miura',
    ),
    Fixture(
        'dr_normal_miura3',
        'u',
        (
            'u3_0'
        ),
        'dr-normal-miura',
    ),
    Fixture(
        'dr_normal_miura4',
        'u',
        (
            'u4_0'
        ),
        'dr-normal-miura',
    ),
    Fixture(
        'dr_normal_operator',
        'ut',
        (
            ('eps^2*(1/3*ut3_0*delx_3 + 1/2*ut3_1*delx_2 + 1/6*ut3_2*delx_1) + eps^4*4/15*delx_5', '0', '6*delx_1', '0'),
            ('0', '6*delx_1', '0', '0'),
            ('6*delx_1', '0', '0', '0'),
            ('0', '0', '0', '2*delx_1'),
        ),
        'dr-normal-operator',
        kind="matrix",
    ),
    Fixture(
        'dr_g11_normal',
        'ut',
        (
            '((1/12*ut1_0*(ut2_0)^2 + 1/12*(ut1_0)^2*ut3_0 - 1/108*(ut2_0)^3*ut3_0 + '
            '1/432*(ut2_0)^2*(ut3_0)^3 + 1/326592*(ut3_0)^7 + 1/4*ut1_0*(ut4_0)^2 + '
            '1/12*ut2_0*ut3_0*(ut4_0)^2 + 1/144*(ut3_0)^3*(ut4_0)^2) + ( - 1/6*(ut1_1)^2 + '
            '1/24*ut2_0*(ut2_1)^2 - 1/72*(ut3_0)^2*(ut2_1)^2 - 1/108*(ut3_0)^2*ut1_1*ut3_1 '
            '- 1/27*ut2_0*ut3_0*ut2_1*ut3_1 - 5/432*(ut2_0)^2*(ut3_1)^2 - '
            '1/216*ut1_0*ut3_0*(ut3_1)^2 - 1/2592*(ut3_0)^4*(ut3_1)^2 - '
            '5/144*(ut4_0)^2*(ut3_1)^2 - 1/4*ut4_0*ut2_1*ut4_1 - '
            '1/9*ut3_0*ut4_0*ut3_1*ut4_1 - 1/8*ut2_0*(ut4_1)^2 - 1/24*(ut3_0)^2*(ut4_1)^2 - '
            '1/432*(ut2_0)^2*ut3_0*ut3_2 - 1/216*ut1_0*(ut3_0)^2*ut3_2 - '
            '1/144*ut3_0*(ut4_0)^2*ut3_2)*eps^2 + ( - 1/1458*ut3_0*(ut3_1)^4 + '
            '1/144*(ut3_1)^2*ut1_2 + 5/216*ut2_1*ut3_1*ut2_2 + 1/48*ut3_0*(ut2_2)^2 + '
            '1/36*ut1_1*ut3_1*ut3_2 + 7/7776*(ut3_0)^2*(ut3_1)^2*ut3_2 + '
            '1/54*ut3_0*ut1_2*ut3_2 + 5/216*ut2_0*ut2_2*ut3_2 + 5/5184*(ut3_0)^3*(ut3_2)^2 '
            '+ 5/72*ut3_1*ut4_1*ut4_2 + 5/72*ut4_0*ut3_2*ut4_2 + 1/16*ut3_0*(ut4_2)^2 + '
            '1/108*ut3_0*ut1_1*ut3_3 + 1/3888*(ut3_0)^3*ut3_1*ut3_3 - 1/540*(ut2_0)^2*ut3_4 '
            '- 1/270*ut1_0*ut3_0*ut3_4 - 1/180*(ut4_0)^2*ut3_4)*eps^4 + '
            '(5/15552*(ut3_1)^2*(ut3_2)^2 + 1/1458*ut3_0*(ut3_2)^3 - 1/112*(ut2_3)^2 - '
            '1/1296*(ut3_1)^3*ut3_3 - 11/3888*ut3_0*ut3_1*ut3_2*ut3_3 - 13/1512*ut1_3*ut3_3 '
            '- 1/864*(ut3_0)^2*(ut3_3)^2 - 3/112*(ut4_3)^2 - 7/77760*ut3_0*(ut3_1)^2*ut3_4 '
            '- 1/2430*(ut3_0)^2*ut3_2*ut3_4 + 1/135*ut1_1*ut3_5 + '
            '1/4860*(ut3_0)^2*ut3_1*ut3_5)*eps^6 + ( - 55/108864*ut3_2*(ut3_3)^2 + '
            '65/54432*ut3_1*ut3_3*ut3_4 + 241/388800*ut3_0*(ut3_4)^2 - '
            '1/1620*ut3_1*ut3_2*ut3_5 + 1/30240*ut3_0*ut3_3*ut3_5 - 1/6480*(ut3_1)^2*ut3_6 '
            '- 1/2430*ut3_0*ut3_2*ut3_6)*eps^8 + ( - 41/194400*(ut3_5)^2 + '
            '13/68040*ut3_3*ut3_7)*eps^10)'
        ),
        'dr-hamiltonian-normal',
    ),
    Fixture(
        'quantum_correction',
        'u',
        (
            'I*hbar*(( - (13*u3_0*eps^4)/9072 + ( - 1/540*(u3_0)^2 + 1/108*(u3_1)^2 - '
            '1/135*(u3_2)^2)*eps^2 - 1/432*(u3_0)^3 + 1/144*u3_0*(u3_1)^2 - (u1_0)/6))'
        ),
        'quantum-correction',
    ),
    Fixture(
        'b3_operator',
        'u',
        (
            ('0', '0', '6*delx_1'),
            ('0', '6*delx_1', '0'),
            ('6*delx_1', '0', '0'),
        ),
        'folding-b3-operator',
        kind="matrix",
    ),
    Fixture(
        'g2_operator',
        'u',
        (
            ('0', '6*delx_1'),
            ('6*delx_1', '0'),
        ),
        'folding-g2-operator',
        kind="matrix",
    ),
)

_BY_NAME = {f.name: f for f in FIXTURES}


def get(name: str) -> Fixture:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}") from None


def load(name: str):
    """Parsed fixture: a DiffPoly, or an operator table for matrix fixtures."""
    return get(name).load()


def by_anchor(anchor: str) -> list:
    return [f for f in FIXTURES if f.anchor == anchor]


def load_matrix(fx: Fixture):
    """Operator table ``{(a, b): {k: coefficient of d^k}}`` from a matrix fixture."""
    from .ds_d4 import PoissonMatrix

    entries = {}
    rows = fx.text
    for a, row in enumerate(rows, 1):
        for b, text in enumerate(row, 1):
            f = parse(text, fx.alphabet)
            ops: dict = {}
            for m, c in f.terms.items():
                eps, hb, vs = monomial_parts(m)
                orders = [v.order for v, e in vs if v.tag == "dx" for _ in range(e)]
                if len(orders) != 1:
                    raise ValueError(f"fixture {fx.name}: entry ({a},{b}) is not linear in delx")
                rest = [((v.tag, v.index, v.order), e) for v, e in vs if v.tag != "dx"]
                ops[orders[0]] = ops.get(orders[0], const(0)) + monomial(eps, hb, rest, c)
            entries[(a, b)] = {k: DiffPoly(v.terms, fx.alphabet) for k, v in ops.items() if v}
    return PoissonMatrix(tuple(range(1, len(rows) + 1)), entries)
