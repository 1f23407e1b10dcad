"""Symbolic expressions: parse, differentiate, bracket, zero-test.

The expression layer is small on purpose. It handles exactly what the
constraint analysis needs, and every derivative it produces can be checked
against a finite difference.
"""
from hjflow import expr as ex

h = ex.parse("-((p_x1 + e*A1)^2 + p_x2^2 + m^2)/(2*p_xp)")
print("H       =", ex.to_string(h))
print("dH/dp_x1 =", ex.to_string(ex.differentiate(h, "p_x1")))

# substitute a concrete field, then evaluate
hc = ex.substitute(h, {"A1": ex.parse("0.3*cos(xm)"), "e": ex.parse("1"), "m": ex.parse("1")})
print("H(cos)  =", ex.to_string(ex.fold(hc)))
val = ex.evaluate(hc, {"p_x1": 0.2, "p_x2": 0.0, "p_xp": -1.0, "xm": 0.0})
print("H at a point:", val)

# Poisson bracket of two functions on the pair (q, p_q)
pb = ex.poisson_bracket(ex.parse("q^2/2"), ex.parse("p_q^2/2"), [("q", "p_q")])
print("{q^2/2, p_q^2/2} =", ex.to_string(pb))
dom = {"q": ex.Interval(-2, 2), "p_q": ex.Interval(-2, 2)}
test = ex.is_zero(pb, dom)
print("zero?", test.verdict, " witness:", test.witness)

# a bracket that does vanish identically
pb0 = ex.poisson_bracket(ex.parse("p_q + q"), ex.parse("p_q + q"), [("q", "p_q")])
print("{p_q + q, p_q + q} =", ex.to_string(pb0), "->", ex.is_zero(pb0, dom).verdict)
