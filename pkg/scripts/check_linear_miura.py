"""Independent oracle for the linear part of the DS normal-coordinate map.

Linearising L = d^6 + d^{-1} sum_mu (s^mu d^{2mu-1} + d^{2mu-1} s^mu) at d^6 and
acting on plane waves, a perturbation s = exp(qx) turns every operator into a
rational symbol in (p, q); res L^{n/6} is the p^{-1} coefficient of

    ((p+eq)^n - p^n) / ((p+eq)^6 - p^6) * (p^{2mu-1} + (p+eq)^{2mu-1}) / (p+eq).

The script inverts the resulting triangular linear map u~(s) and prints the
coefficient of u~^3 in s^1 (raw and presented with eps -> eps/sqrt2), to compare
with ``d4dr.ds_d4.normal_coordinates``. Requires sympy (not a runtime dependency).
"""
import sympy as sp

p, q, e, t = sp.symbols("p q e t")


def linear_residue(n, mu, order=16):
    sym = ((p + e * q) ** n - p ** n) / ((p + e * q) ** 6 - p ** 6)
    sym *= (p ** (2 * mu - 1) + (p + e * q) ** (2 * mu - 1)) / (p + e * q)
    ser = sp.series(sym.subs(p, 1 / t), t, 0, order).removeO()
    return sp.expand(ser).coeff(t, 1)


def main():
    factors = {1: sp.Rational(6, 5), 2: 2, 3: 6}
    powers = {1: 5, 2: 3, 3: 1}
    M = sp.Matrix(3, 3, lambda a, mu: sp.simplify(factors[a + 1] * linear_residue(powers[a + 1], mu + 1)))
    print("linear u~(s) symbol matrix:", M)
    s1 = sp.expand(sp.series(sp.simplify(M.inv())[0, 2], q, 0, 8).removeO())
    print("s^1 coefficient of u~^3 (raw):      ", s1)
    print("s^1 coefficient of u~^3 (presented):", sp.expand(s1.subs(e, e / sp.sqrt(2))))


if __name__ == "__main__":
    main()
