"""Finite-difference weights and dense differentiation matrices on nonuniform grids."""

import numpy as np


def fd_weights(x, x0, m):
    """Weights of the order-m derivative at x0 from samples at nodes x.

    Fornberg's recursion; exact for polynomials of degree len(x)-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 = c2 * c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, m]


def diff_matrix(x, order, stencil=7):
    """Dense differentiation matrix of given derivative order on nodes x.

    Uses sliding stencils of `stencil` points (one-sided near the ends), so the
    result is exact for polynomials of degree stencil-1.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    if stencil > n:
        stencil = n
    if stencil <= order:
        raise ValueError("stencil must exceed derivative order")
    D = np.zeros((n, n))
    half = stencil // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - stencil)
        idx = np.arange(lo, lo + stencil)
        D[i, idx] = fd_weights(x[idx], x[i], order)
    return D


def clustered_grid(x_max, n, ratio=1.05, max_stretch=32.0):
    """Geometrically clustered nodes on [0, x_max], finest spacing at 0.

    Spacings grow by `ratio` per step until they reach max_stretch times the
    first spacing, then stay uniform.  The stretch cap keeps the finest cell
    from shrinking to where fourth-derivative stencils amplify round-off
    (weights scale like 1/h^4).
    """
    if n < 2:
        raise ValueError("need at least two points")
    steps = ratio ** np.arange(n - 1)
    steps = np.minimum(steps, max_stretch)
    nodes = np.concatenate(([0.0], np.cumsum(steps)))
    return nodes * (x_max / nodes[-1])


def trapezoid_weights(x):
    """Trapezoidal quadrature weights for nodes x."""
    x = np.asarray(x, dtype=float)
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w
