"""Finite-difference Levi-Civita and curvature oracle.

Independent of the jet code path: metric entries are evaluated as plain
floats, derivatives are central differences, and the index contractions are
written out as loops.
"""

import numpy as np

from geomlab import expr

STEP = 1e-4


def metric(spec, p):
    m = spec.dim
    g = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            g[i, j] = g[j, i] = expr.evaluate(spec.component(i, j), list(p), spec.param_map)
    return g


def metric_derivative(spec, p, h=STEP):
    """dg[l, i, j] = d_l g_ij."""
    p = np.asarray(p, dtype=float)
    m = spec.dim
    dg = np.empty((m, m, m))
    for l in range(m):
        e = np.zeros(m)
        e[l] = h
        dg[l] = (metric(spec, p + e) - metric(spec, p - e)) / (2 * h)
    return dg


def christoffel(spec, p, h=STEP):
    """G[k, i, j] = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    m = spec.dim
    ginv = np.linalg.inv(metric(spec, p))
    dg = metric_derivative(spec, p, h)
    G = np.zeros((m, m, m))
    for k in range(m):
        for i in range(m):
            for j in range(m):
                G[k, i, j] = 0.5 * sum(
                    ginv[k, l] * (dg[i, j, l] + dg[j, i, l] - dg[l, i, j]) for l in range(m)
                )
    return G


def christoffel_derivative(spec, p, h=STEP):
    """dG[l, k, i, j] = d_l G^k_ij by a nested central difference."""
    p = np.asarray(p, dtype=float)
    m = spec.dim
    out = np.empty((m, m, m, m))
    for l in range(m):
        e = np.zeros(m)
        e[l] = h
        out[l] = (christoffel(spec, p + e, h) - christoffel(spec, p - e, h)) / (2 * h)
    return out


def ricci_scalar(spec, p, h=STEP):
    """Ric_jl = d_k G^k_jl - d_j G^k_kl + G^k_km G^m_jl - G^k_jm G^m_kl, and S."""
    m = spec.dim
    G = christoffel(spec, p, h)
    dG = christoffel_derivative(spec, p, h)
    ric = np.zeros((m, m))
    for j in range(m):
        for l in range(m):
            total = 0.0
            for k in range(m):
                total += dG[k, k, j, l] - dG[j, k, k, l]
                for q in range(m):
                    total += G[k, k, q] * G[q, j, l] - G[k, j, q] * G[q, k, l]
            ric[j, l] = total
    ginv = np.linalg.inv(metric(spec, p))
    return G, ric, float(np.sum(ginv * ric))
