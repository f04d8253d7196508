"""High-precision oracle for the cutoff indifference residual.

Evaluates delta*R*P(state=1|x)*P(opponent signal >= x | x) - w with
50-digit arithmetic, the posterior as a direct density ratio and the
normal CDF from mpmath.  Frozen test values come from running this.
"""
import mpmath as mp

mp.mp.dps = 50


def residual(q, R, delta, w, eps, lam, x):
    q, R, delta, w = map(mp.mpf, (q, R, delta, w))
    s = mp.sqrt(mp.mpf(eps) * mp.mpf(lam))
    x = mp.mpf(x)
    a = q * mp.npdf((x - 1) / s)
    b = (1 - q) * mp.npdf(x / s)
    p1 = a / (a + b)
    cont = p1 * (1 - mp.ncdf((x - 1) / s)) + (1 - p1) * (1 - mp.ncdf(x / s))
    return delta * R * p1 * cont - w


CASES = [
    (0.4, 1.0, 0.9, 0.2, 0.04, 1.0, 0.5),
    (0.4, 1.0, 0.9, 0.2, 0.04, 1.0, 0.55),
    (0.25, 2.0, 0.8, 0.3, 0.09, 2.0, 0.7),
]

if __name__ == "__main__":
    for case in CASES:
        print(f"{case}: {mp.nstr(residual(*case), 22)}")
