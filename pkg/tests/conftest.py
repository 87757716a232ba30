"""Shared test helpers, including the independent proximal-step oracle."""

import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(__file__))


def coordinate_descent_prox_oracle(mesh, p, tau, uprev, theta=None, grad_tol=1e-10,
                                   max_sweeps=20000):
    """Brute-force minimizer of the implicit-Euler step objective.

    Independent of the solver under test: the objective's partial
    derivatives are written out from scratch (plain scalar arithmetic)
    for a uniform interval mesh with interval-indicator wells and an
    optional clamped -s^2/2 perturbation treated semi-implicitly. Cyclic
    coordinate minimization with per-coordinate bisection runs until
    every partial derivative is below ``grad_tol``.
    """
    assert mesh.kind == "interval"
    assert p.bulk_potential.kind == "indicator" and p.bdry_potential.kind == "indicator"
    n = mesh.n
    h = mesh.L / n
    lo, hi = p.bulk_potential.lo, p.bulk_potential.hi
    lam, dd, kk = p.lam, p.delta * p.delta, p.kappa * p.kappa

    # quadrature recomputed from scratch: trapezoid bulk, unit endpoint mass
    w = [h] * (n + 1)
    w[0] = w[-1] = h / 2
    wg = [0.0] * (n + 1)
    wg[0] = wg[-1] = 1.0
    m = [w[i] + wg[i] for i in range(n + 1)]

    kind = getattr(p.perturbation.bulk, "kind", "none")
    u = [float(x) for x in uprev]
    if kind == "neg_quadratic":
        gval = [-min(max(x, lo), hi) for x in u]
    elif kind == "none":
        gval = [0.0] * (n + 1)
    else:  # pragma: no cover - oracle scope
        raise AssertionError(f"oracle does not handle perturbation {kind}")
    th = [0.0] * (n + 1) if theta is None else [float(x) for x in theta]
    c = [gval[i] - th[i] for i in range(n + 1)]

    def partial(v, i):
        t = v[i]
        tc = lo if t < lo else (hi if t > hi else t)
        out = m[i] * (t - u[i]) / tau + m[i] * c[i] + (w[i] + wg[i]) * (t - tc) / lam
        if i >= 1:
            s = (t - v[i - 1]) / h
            out += s / math.sqrt(s * s + dd) + kk * s
        if i <= n - 1:
            s = (v[i + 1] - t) / h
            out -= s / math.sqrt(s * s + dd) + kk * s
        return out

    v = [float(x) for x in uprev]
    for _ in range(max_sweeps):
        for i in range(n + 1):
            a, b = lo - 20.0, hi + 20.0
            for _ in range(70):
                mid = 0.5 * (a + b)
                v[i] = mid
                if partial(v, i) > 0.0:
                    b = mid
                else:
                    a = mid
            v[i] = 0.5 * (a + b)
        if max(abs(partial(v, i)) for i in range(n + 1)) <= grad_tol:
            return np.array(v)
    raise AssertionError("oracle did not reach the requested gradient tolerance")
