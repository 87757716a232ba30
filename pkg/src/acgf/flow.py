"""Proximal implicit-Euler time stepping for the coupled gradient flow.

Each step minimizes the strongly convex functional

    J(v) = |v - u_prev|_H^2 / (2 tau) + Phi(v) + h_inner(G(u_prev) - theta_n, v)

over nodal fields v, where Phi is the regularized convex energy. The
perturbation is treated semi-implicitly (frozen at u_prev) by default so
every subproblem stays convex regardless of the concavity of the wells'
smooth parts; setting ``semi_implicit_g = False`` moves the perturbation
inside the objective (fully implicit), which requires tau < 1/L_g to
keep the subproblem strongly convex.

The inner solver is a damped Newton method with backtracking line search
and matrix-free Hessian products via preconditioned CG; after three
rejected Newton steps it falls back to preconditioned gradient descent.
Optimality is certified by the gradient norm in the product inner
product, so any descent method would yield the same certificate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import energy as en
from .errors import ConfigError, NonconvergenceError, SolverError
from .meshes import h_norm


def default_inner_tol(mesh):
    """Gradient-norm stopping tolerance scaled with the DOF count."""
    return 1e-9 * math.sqrt(mesh.num_nodes)


@dataclass
class FlowParams:
    tau: float
    T: float
    inner_tol: float | None = None
    inner_max_iters: int = 200
    semi_implicit_g: bool = True

    def __post_init__(self):
        if not (self.tau > 0.0 and self.T > 0.0):
            raise ConfigError(f"tau and T must be positive, got tau={self.tau}, T={self.T}")
        if self.inner_tol is not None and not self.inner_tol > 0.0:
            raise ConfigError("inner_tol must be positive")
        if self.inner_max_iters < 1:
            raise ConfigError("inner_max_iters must be >= 1")

    @property
    def num_steps(self):
        return int(math.ceil(self.T / self.tau - 1e-12))

    def check_stability(self, lipschitz):
        if self.semi_implicit_g and lipschitz > 0.0 and self.tau > 0.5 / lipschitz:
            raise ConfigError(
                f"tau={self.tau} violates the semi-implicit stability guard "
                f"tau <= 1/(2*L_g) = {0.5 / lipschitz}; reduce tau or switch "
                "semi_implicit_g off"
            )
        if not self.semi_implicit_g and lipschitz > 0.0 and self.tau >= 1.0 / lipschitz:
            raise ConfigError(
                f"tau={self.tau} makes the fully implicit subproblem lose strong "
                f"convexity; need tau < 1/L_g = {1.0 / lipschitz}"
            )


@dataclass
class StepRecord:
    step: int
    time: float
    phi_reg: float
    free_energy: float
    rate_norm: float
    inner_iters: int
    inner_residual: float
    terms: tuple = field(default=())


def _pcg(apply_a, b, mdiag, rtol, max_iters):
    """Preconditioned CG for SPD systems; returns best iterate found."""
    x = np.zeros_like(b)
    r = b.copy()
    z = r / mdiag
    pvec = z.copy()
    rz = float(np.dot(r, z))
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return x
    for _ in range(max_iters):
        ap = apply_a(pvec)
        pap = float(np.dot(pvec, ap))
        if pap <= 0.0 or not np.isfinite(pap):
            break
        alpha = rz / pap
        x += alpha * pvec
        r -= alpha * ap
        if float(np.linalg.norm(r)) <= rtol * bnorm:
            break
        z = r / mdiag
        rz_new = float(np.dot(r, z))
        pvec = z + (rz_new / rz) * pvec
        rz = rz_new
    return x


def _solve_strongly_convex(mesh, p, tau, anchor, linear, v0, tol, max_iters,
                           implicit_perturbation=False):
    """Minimize |v - anchor|_H^2/(2 tau) + Phi(v) [+ perturbation] + (linear, v)_H.

    Returns (minimizer, iterations, certified gradient norm). ``linear``
    may be None. Raises on NaN objectives or an exhausted budget.
    """
    m = mesh.mass
    ml = m * linear if linear is not None else None

    def value(v):
        dv = v - anchor
        val = 0.5 / tau * float(np.dot(m, dv * dv)) + en.phi_regularized(mesh, p, v)
        if implicit_perturbation:
            val += en.perturbation_energy(mesh, p, v)
        if ml is not None:
            val += float(np.dot(ml, v))
        return val

    def partial(v):
        out = m * (v - anchor) / tau + en._grad_partial(mesh, p, v)
        if implicit_perturbation:
            out += en._perturbation_partial(mesh, p, v)
        if ml is not None:
            out += ml
        return out

    def hvp(v, w):
        out = m * w / tau + en.hess_phi_vec(mesh, p, v, w)
        if implicit_perturbation:
            out += en._perturbation_hess_vec(mesh, p, v, w)
        return out

    v = np.asarray(v0, dtype=float).copy()
    fv = value(v)
    if not np.isfinite(fv):
        raise SolverError("non-finite objective at the inner solver start")
    rejections = 0
    gnorm = np.inf
    # near the optimum the true decrease drops below float resolution of
    # the objective; the sufficient-decrease test gets that much slack
    slack = 1e-14 * (1.0 + abs(fv))
    for it in range(max_iters):
        pg = partial(v)
        gnorm = math.sqrt(float(np.dot(pg * pg, 1.0 / m)))
        if not np.isfinite(gnorm):
            raise SolverError("non-finite gradient in the inner solver")
        if gnorm <= tol:
            return v, it, gnorm
        if rejections < 3:
            rtol = min(0.1, math.sqrt(gnorm / (1.0 + gnorm)))
            d = _pcg(lambda w: hvp(v, w), -pg, m / tau,
                     rtol=rtol, max_iters=min(2 * mesh.num_nodes, 400))
            slope = float(np.dot(pg, d))
            if slope >= 0.0 or not np.all(np.isfinite(d)):
                d = -tau * pg / m
                slope = float(np.dot(pg, d))
        else:
            d = -tau * pg / m
            slope = float(np.dot(pg, d))
        accepted = False
        alpha = 1.0
        for _ in range(40):
            vn = v + alpha * d
            fn = value(vn)
            if np.isfinite(fn) and fn <= fv + 1e-4 * alpha * slope + slack:
                v, fv = vn, fn
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            rejections += 1
            # retry along steepest descent before giving up on the iteration
            d = -tau * pg / m
            slope = float(np.dot(pg, d))
            alpha = 1.0
            for _ in range(60):
                vn = v + alpha * d
                fn = value(vn)
                if np.isfinite(fn) and fn <= fv + 1e-4 * alpha * slope + slack:
                    v, fv = vn, fn
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                raise SolverError(
                    f"inner line search stalled at gradient norm {gnorm:.3e}"
                )
    raise NonconvergenceError(
        f"inner solver hit {max_iters} iterations with residual {gnorm:.3e}",
        residual=gnorm,
    )


def proximal_step(mesh, p, fp, uprev, theta_n=None):
    """One implicit-Euler step from uprev under the forcing value theta_n.

    Returns (new state, StepRecord without step/time filled in).
    """
    uprev = np.asarray(uprev, dtype=float)
    if uprev.shape != (mesh.num_nodes,):
        raise ValueError(f"state has shape {uprev.shape}, mesh has {mesh.num_nodes} nodes")
    if not np.all(np.isfinite(uprev)):
        raise SolverError("previous state contains non-finite values")
    tol = fp.inner_tol if fp.inner_tol is not None else default_inner_tol(mesh)
    if fp.semi_implicit_g:
        linear = en.gcal(mesh, p, uprev)
        if theta_n is not None:
            linear = linear - theta_n
        implicit = False
    else:
        linear = -theta_n if theta_n is not None else None
        implicit = True
    if linear is not None and not np.any(linear):
        linear = None
    v, iters, residual = _solve_strongly_convex(
        mesh, p, fp.tau, uprev, linear, uprev, tol, fp.inner_max_iters,
        implicit_perturbation=implicit,
    )
    terms = en.energy_terms(mesh, p, v)
    phi = terms[0] + terms[1] + terms[2] + terms[3] + terms[4]
    rec = StepRecord(
        step=-1,
        time=np.nan,
        phi_reg=phi,
        free_energy=phi + terms[5],
        rate_norm=h_norm(mesh, v - uprev) / fp.tau,
        inner_iters=iters,
        inner_residual=residual,
        terms=terms,
    )
    return v, rec


def run_flow(mesh, p, fp, u0, forcing=None, snapshot_every=0):
    """March ceil(T/tau) proximal steps; returns (final, trace, snapshots).

    The trace holds one record per completed step. Snapshots are
    (step, state copy) pairs taken at step 0, every ``snapshot_every``-th
    step, and the final step (cadence 0 disables them). The initial state
    must lie in the admissible class of the wells.
    """
    u = np.asarray(u0, dtype=float).copy()
    if not en.is_feasible(mesh, p, u):
        raise ConfigError("initial state leaves the well domain (not admissible)")
    fp.check_stability(p.perturbation.lipschitz)
    if forcing is None:
        forcing = en.ForcingField.zero()
    steps = fp.num_steps
    trace = []
    snapshots = []
    if snapshot_every > 0:
        snapshots.append((0, u.copy()))
    for n in range(steps):
        theta = forcing.at_time(n * fp.tau)
        try:
            u, rec = proximal_step(mesh, p, fp, u, theta)
        except NonconvergenceError as e:
            raise NonconvergenceError(
                f"step {n + 1}: {e}", residual=e.residual, step=n + 1
            ) from e
        except SolverError as e:
            raise SolverError(f"step {n + 1}: {e}") from e
        rec.step = n + 1
        rec.time = (n + 1) * fp.tau
        trace.append(rec)
        if snapshot_every > 0 and ((n + 1) % snapshot_every == 0 or n + 1 == steps):
            snapshots.append((n + 1, u.copy()))
    return u, trace, snapshots


def resolvent(mesh, p, w, inner_tol=None, inner_max_iters=200):
    """Solution v of v + grad Phi(v) = w, i.e. the proximal point of Phi at w."""
    w = np.asarray(w, dtype=float)
    if w.shape != (mesh.num_nodes,):
        raise ValueError(f"field has shape {w.shape}, mesh has {mesh.num_nodes} nodes")
    tol = inner_tol if inner_tol is not None else default_inner_tol(mesh)
    v, _, _ = _solve_strongly_convex(mesh, p, 1.0, w, None, w, tol, inner_max_iters)
    return v
