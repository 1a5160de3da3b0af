"""Independent brute-force reference implementations used by the tests.

Nothing here imports from ``covstat``; every formula is re-derived directly.
"""

from fractions import Fraction
import math

import numpy as np


def rademacher(j, x):
    """``r_j(x) = (-1)**floor(2**j x)`` on exact rationals."""
    return -1 if math.floor(Fraction(2) ** j * Fraction(x)) % 2 else 1


def walsh_gray(n, x):
    """Sequency-ordered Walsh from Rademacher products over the Gray code of ``n``."""
    g = n ^ (n >> 1)
    v, j = 1, 1
    while g:
        if g & 1:
            v *= rademacher(j, x)
        g >>= 1
        j += 1
    return v


def mother(x):
    x = Fraction(x)
    if 0 <= x < Fraction(1, 2):
        return 1
    if Fraction(1, 2) <= x < 1:
        return -1
    return 0


def haar_sum(k, x):
    """``sum_m psi(2**(k-1) x - m)`` over all shifts, evaluated term by term."""
    s = 2 ** (k - 1)
    return sum(mother(s * Fraction(x) - m) for m in range(s))


def basis_rows(kind, K, T):
    f = walsh_gray if kind == "walsh" else haar_sum
    return np.array([[f(k, Fraction(t - 1, T)) for t in range(1, T + 1)]
                     for k in range(1, K + 1)], dtype=float)


def gamma(x, h, b=None):
    """``(1/T) sum_{t=1}^{T-h} x_t x_{t+h} w_t`` with ``w_t = 1`` or ``1 + b_t``."""
    T = len(x)
    total = 0.0
    for t in range(T - h):
        w = 1.0 if b is None else 1.0 + b[t]
        total += x[t] * x[t + h] * w
    return total / T


def hac(x, h, b, kernel, beta):
    """Double-sum long-run variance of ``x_t x_{t+h} b_t`` scaled by ``gamma_0**-2``."""
    T = len(x)
    a = [x[t] * x[t + h] * b[t] for t in range(T - h)]
    mean = sum(a) / T
    z = [v - mean for v in a]
    n = len(z)

    def v(i):
        return sum(z[t] * z[t + i] for t in range(n - i)) / T

    total = v(0) + 2 * sum(kernel(i / beta) * v(i) for i in range(1, n))
    g0 = sum(xi * xi for xi in x) / T
    return total / g0 ** 2


def delta(x, h, b, phi, centering="own"):
    """Bootstrapped covariance difference evaluated term by term."""
    T = len(x)
    if centering == "own":
        a = [x[t] * x[t + h] * b[t] for t in range(T - h)]
        m = sum(a) / T
        return sum(phi[t] * (a[t] - m) for t in range(T - h)) / T
    p = [x[t] * x[t + h] for t in range(T - h)]
    m = sum(p) / T
    return sum(phi[t] * (p[t] - m) * b[t] for t in range(T - h)) / T


def quad_form(d, G, T):
    """``T d' G^{-1} d`` via an explicit inverse."""
    d = np.asarray(d, dtype=float)
    return float(T * d @ np.linalg.inv(G) @ d)
