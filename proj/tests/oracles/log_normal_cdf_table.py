"""Regenerates the ln Phi(z) reference table frozen in gauss_test.cpp.

Two independent 60-digit routes are required to agree before a value is
printed: the closed form via erfc, and direct quadrature of the Gaussian
density shifted to the tail.
"""
import mpmath as mp

mp.mp.dps = 60
ZS = [-40, -37, -30, -20, -10, -7, -6, -5, -2, -1, 0, 1, 3, 5, 8]

for z in ZS:
    z = mp.mpf(z)
    closed = mp.log(mp.erfc(-z / mp.sqrt(2)) / 2)
    a = abs(z) + 1
    pts = [0] + [k / a for k in (0.5, 1, 2, 4, 8, 16, 32, 64)] + [mp.inf]
    integral = mp.quad(lambda s: mp.exp(z * s - s * s / 2), pts)
    quad = -z * z / 2 + mp.log(integral) - mp.log(mp.sqrt(2 * mp.pi))
    assert abs(closed - quad) <= mp.mpf(10) ** -40 * abs(closed)
    print("    {%s, %s}," % (mp.nstr(z, 3), mp.nstr(closed, 25, min_fixed=-30, max_fixed=30)))
