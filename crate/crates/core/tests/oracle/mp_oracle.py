"""Arbitrary-precision reference values frozen into the Rust tests.

Run with `python3 mp_oracle.py`; every printed constant is pasted verbatim
into the test that consumes it. Nothing here shares code with the crate.
"""
from mpmath import mp, mpf, coth, log, sinh, cosh, tanh, exp, quad, inf, findroot, cos, pi, acos, sqrt, nsum, diff

mp.dps = 50


def V(r):
    r = mpf(r)
    return r * coth(r) - log(abs(2 * sinh(r)))


def W(r, a):
    r, a = mpf(r), mpf(a)
    return log(2 * (cosh(2 * r) + a)) / 2 - r * sinh(2 * r) / (cosh(2 * r) + a)


def Wp(r, a):
    r, a = mpf(r), mpf(a)
    return -2 * r * (1 + a * cosh(2 * r)) / (cosh(2 * r) + a) ** 2


def Wpp(r, a):
    r, a = mpf(r), mpf(a)
    c = cosh(2 * r) + a
    return 4 * r * sinh(2 * r) * (a * cosh(2 * r) + 2 - a * a) / c ** 3 - 2 * (1 + a * cosh(2 * r)) / c ** 2


def show(name, x):
    print(f"{name} = {mp.nstr(x, 25)}")


show("V(1)", V(1))
show("V(10)", V(10))
show("V(0.001)", V(mpf("0.001")))
show("V(25)", V(25))
show("Vp(2)", -2 / sinh(2) ** 2)
show("Vpp(1)", (2 * coth(1) - 1) / sinh(1) ** 2)
show("W(1,0)", W(1, 0))
show("W(0.3,0.5)", W(mpf("0.3"), mpf("0.5")))
show("W(7,0.25)", W(7, mpf("0.25")))
show("Wp(1.5,0.5)", Wp(mpf("1.5"), mpf("0.5")))
show("Wpp(0.8,0.75)", Wpp(mpf("0.8"), mpf("0.75")))
show("Wpp(0.8,0.75) by differentiation", diff(lambda r: W(r, mpf("0.75")), mpf("0.8"), 2))
show("Veff(1) k<=200", sum(V(k) for k in range(1, 201)))
show("sum|V'(1.98k)|", nsum(lambda k: mpf("1.98") * k / sinh(mpf("1.98") * k) ** 2, [1, inf]))
rs = findroot(lambda r: 2 * r * tanh(r) - 1, 0.77)
show("rstar(1)", rs)
show("|W1'(rstar)|", rs / cosh(rs) ** 2)
show("sum|V'(2k)|", nsum(lambda k: mpf(2) * k / sinh(mpf(2) * k) ** 2, [1, inf]))
rsh = findroot(lambda r: Wpp(r, mpf("0.5")), (mpf("0.5"), mpf("2")), solver="anderson")
show("rstar(0.5)", rsh)
show("|W_0.5'(rstar)|", -Wp(rsh, mpf("0.5")))
show("int V", quad(V, [0, mpf(1) / 1000, 1, 5, 30, inf]))
for a in ["0", "0.5", "1"]:
    show(f"int W_{a}", quad(lambda r: W(r, mpf(a)), [0, 1, 5, 15, 30, 45, 60]))
show("Vpp(5)-W1pp(5)", (2 * 5 * coth(5) - 1) / sinh(5) ** 2 - Wpp(5, 1))


def what(a, w):
    a, w = mpf(a), mpf(w)
    return 2 * quad(lambda r: W(r, a) * cos(2 * pi * r * w), [0, 1, 2, 4, 8, 16, 40])


for a, w in [("0", "0.5"), ("0", "1"), ("0.5", "1"), ("1", "0.5"), ("1", "1"), ("0.25", "2")]:
    show(f"What({a},{w})", what(a, w))
show("F[1/(cosh2r)](1)", 2 * quad(lambda r: cos(2 * pi * r) / cosh(2 * r), [0, 1, 2, 4, 8, 16, 40]))
show("rstar(0) = rstar(1)/2 check: |W0'(rstar(1)/2)|", -Wp(rs / 2, 0))
show("4*What(0,1) vs What(1,0.5)", 4 * what(0, 1) - what(1, mpf("0.5")))
# energy of the two-particle example: n+=n-=1, x+=0, x-=1, alpha=1, a=1
show("E two-particle", W(1, 1) / 4)
# psi upper bound sigma*V_eff(1/sigma) at sigma=1
show("Veff(1) full", nsum(lambda k: V(k), [1, inf]))
