"""Independent reference computations used by the tests."""

import itertools

import numpy as np


def p_entry(p0, y, mult):
    """One P entry from the scalar definition z * (p0 - p1)."""
    z = -mult if y == 0 else mult
    p1 = 1.0 - p0
    return z * (p0 - p1)


def objective_loops(P, w, lam):
    total = 0.0
    for row in P:
        m = sum(a * b for a, b in zip(row, w))
        total += max(0.0, m) ** 2
    return total + lam * sum(v * v for v in w)


def simplex_grid(T, step):
    """All points of the unit simplex on a regular grid (T in {2, 3})."""
    k = int(round(1.0 / step))
    if T == 2:
        a = np.arange(k + 1) / k
        return np.stack([a, 1.0 - a], axis=1)
    if T == 3:
        i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
        keep = i + j <= k
        a, b = i[keep] / k, j[keep] / k
        return np.stack([a, b, 1.0 - a - b], axis=1)
    raise ValueError("grid oracle supports T = 2 or 3")


def grid_minimum(P, lam, step=1e-3):
    W = simplex_grid(P.shape[1], step)
    M = np.maximum(W @ np.asarray(P, dtype=float).T, 0.0)
    J = (M * M).sum(axis=1) + lam * (W * W).sum(axis=1)
    k = int(np.argmin(J))
    return float(J[k]), W[k]


def project_bisection(v, iters=200):
    """Simplex projection by bisection on the threshold theta."""
    v = np.asarray(v, dtype=float)
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0.0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


def central_difference(f, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def window_positions(shape, L):
    """Enumerate window offsets by brute force (1-D length or 2-D (h, w))."""
    if isinstance(shape, int):
        return [(s,) for s in range(shape) if s + L <= shape]
    h, w = shape
    return [(r, c) for r, c in itertools.product(range(h), range(w))
            if r + L <= h and c + L <= w]


def floor_sizes(n, divisors):
    """Retained window sizes from the floor table: n // div, kept when >= 2."""
    out = []
    for div in divisors:
        L = n // div
        if L >= 2 and L not in out:
            out.append(L)
    return sorted(out)
