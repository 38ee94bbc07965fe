"""Quadrature rules on the reference triangle and on segments."""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

# sigma times two hats is a degree-6 polynomial inside an m=4 layer
DEFAULT_DEGREE = 6


@lru_cache(maxsize=None)
def triangle_rule(degree: int = 5):
    """Barycentric points ``(n, 3)`` and weights summing to one.

    Degree <= 5 uses the classical 7-point rule; higher degrees use a
    collapsed (Duffy) tensor Gauss-Legendre product.
    """
    if degree <= 5:
        a1, b1 = 0.059715871789770, 0.470142064105115
        a2, b2 = 0.797426985353087, 0.101286507323456
        w1, w2 = 0.132394152788506, 0.125939180544827
        pts = [(1 / 3, 1 / 3, 1 / 3),
               (a1, b1, b1), (b1, a1, b1), (b1, b1, a1),
               (a2, b2, b2), (b2, a2, b2), (b2, b2, a2)]
        w = [0.225] + [w1] * 3 + [w2] * 3
        return np.array(pts), np.array(w)
    n = math.ceil((degree + 2) / 2)
    g, gw = np.polynomial.legendre.leggauss(n)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw
    u, v = np.meshgrid(g, g, indexing="ij")
    wu, wv = np.meshgrid(gw, gw, indexing="ij")
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    w = (wu * wv * (1.0 - u)).ravel() * 2.0
    bary = np.column_stack([1.0 - x - y, x, y])
    return bary, w


@lru_cache(maxsize=None)
def segment_rule(n: int = 4):
    """Gauss points on ``[0, 1]`` and weights summing to one."""
    g, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (g + 1.0), 0.5 * w
