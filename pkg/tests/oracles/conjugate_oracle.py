"""Exact-rational oracle for the scalar conjugate filtering step.

The predict/update equations are rational in their inputs, so Fraction
arithmetic gives the exact posterior mean and variance.  Frozen test
values come from running this script.
"""
from fractions import Fraction as F


def update(mean, std, alpha, x, shock_std, obs_std, y):
    mean, std, alpha, x, shock_std, obs_std, y = (
        F(str(v)) for v in (mean, std, alpha, x, shock_std, obs_std, y))
    m_pred = mean - alpha * x
    v_pred = std ** 2 + shock_std ** 2
    gain = v_pred / (v_pred + obs_std ** 2)
    m_post = m_pred + gain * (y - m_pred)
    v_post = (1 - gain) * v_pred
    return m_post, v_post


CASES = [
    (0.6, 0.1, 0.1, 0.5, 0.05, 0.1, 0.52),
    (0.8, 0.2, 0.06, 0.3, 0.02, 0.15, 0.75),
]

if __name__ == "__main__":
    for case in CASES:
        m, v = update(*case)
        print(f"{case}:")
        print(f"  mean = {m} = {float(m)!r}")
        print(f"  var  = {v} = {float(v)!r}")
        import math
        print(f"  std  = {math.sqrt(float(v))!r}")
