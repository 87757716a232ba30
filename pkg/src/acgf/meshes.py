"""Discretizations of the domain and its boundary with shared trace DOFs.

Two mesh kinds are provided. An interval [0, L] with n cells carries a
0-dimensional boundary (its two endpoints), so surface calculus is
trivial there. A disc of radius R is meshed by a polar tensor grid whose
radial rings are cell-centered (innermost ring at dr/2, no node at the
origin) except that the outermost ring sits exactly on the boundary
circle; the boundary is a closed loop of evenly spaced nodes.

Boundary nodes ARE bulk nodes: a field u carries one value per global
node and its boundary entries serve simultaneously as the trace and the
boundary unknown. The pairing of a field pair is

    h_inner(u, v) = sum_nodes u v w_bulk + sum_bnd u v w_bdry,

so boundary nodes contribute to both sums with their respective weights.

Per-cell gradients are the gradients of the least-squares affine fit of
the corner values against the corner coordinates: this annihilates
constants and reproduces every globally affine field exactly on both
mesh kinds.
"""

import numpy as np

from .errors import ConfigError


class IntervalMesh:
    """[0, L] with n uniform cells, n + 1 nodes; boundary = both endpoints."""

    kind = "interval"
    dim = 1

    def __init__(self, L, n):
        L = float(L)
        n = int(n)
        if not (L > 0.0 and n >= 2):
            raise ConfigError(f"interval mesh needs L > 0 and n >= 2, got L={L}, n={n}")
        self.L = L
        self.n = n
        h = L / n
        self.num_nodes = n + 1
        x = np.arange(n + 1) * h
        self.coords = np.column_stack([x, np.zeros(n + 1)])
        self.w_bulk = np.full(n + 1, h)
        self.w_bulk[0] = self.w_bulk[-1] = 0.5 * h
        self.boundary_nodes = np.array([0, n])
        self.w_bdry = np.ones(2)
        self.is_boundary = np.zeros(n + 1, dtype=bool)
        self.is_boundary[self.boundary_nodes] = True
        self.cell_nodes = np.column_stack([np.arange(n), np.arange(1, n + 1)])
        op = np.array([[-1.0 / h, 1.0 / h]])
        self.cell_ops = np.broadcast_to(op, (n, 1, 2)).copy()
        self.cell_weights = np.full(n, h)
        self.seg_nodes = np.zeros((0, 2), dtype=int)
        self.seg_weights = np.zeros(0)
        self.mass = self.w_bulk.copy()
        self.mass[self.boundary_nodes] += self.w_bdry
        self.volume = L
        self.surface = 2.0


class DiscMesh:
    """Disc of radius R on a polar tensor grid with nr rings and ntheta spokes."""

    kind = "disc"
    dim = 2

    def __init__(self, R, nr, ntheta):
        R = float(R)
        nr, ntheta = int(nr), int(ntheta)
        if not (R > 0.0 and nr >= 2 and ntheta >= 3):
            raise ConfigError(
                f"disc mesh needs R > 0, nr >= 2, ntheta >= 3, got R={R}, nr={nr}, ntheta={ntheta}"
            )
        self.R, self.nr, self.ntheta = R, nr, ntheta
        dr = R / (nr - 0.5)
        dth = 2.0 * np.pi / ntheta
        radii = (np.arange(nr) + 0.5) * dr  # outer ring lands on R
        radii[-1] = R
        thetas = np.arange(ntheta) * dth
        rr, tt = np.meshgrid(radii, thetas, indexing="ij")
        self.num_nodes = nr * ntheta
        self.coords = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])

        # node quadrature: annular sector of the dual (edge-midpoint) radii
        edges = np.concatenate([[0.0], np.arange(1, nr) * dr, [R]])
        ring_w = 0.5 * (edges[1:] ** 2 - edges[:-1] ** 2) * dth
        self.w_bulk = np.repeat(ring_w, ntheta)

        self.boundary_nodes = (nr - 1) * ntheta + np.arange(ntheta)
        self.w_bdry = np.full(ntheta, R * dth)
        self.is_boundary = np.zeros(self.num_nodes, dtype=bool)
        self.is_boundary[self.boundary_nodes] = True

        # quad cells between consecutive rings, periodic in theta
        i = np.repeat(np.arange(nr - 1), ntheta)
        j = np.tile(np.arange(ntheta), nr - 1)
        jn = (j + 1) % ntheta
        self.cell_nodes = np.column_stack(
            [i * ntheta + j, (i + 1) * ntheta + j, (i + 1) * ntheta + jn, i * ntheta + jn]
        )
        self.cell_weights = np.repeat(0.5 * (radii[1:] ** 2 - radii[:-1] ** 2) * dth, ntheta)
        self.cell_ops = _affine_fit_ops(self.coords, self.cell_nodes)

        # boundary loop segments j -> j+1
        self.seg_len = R * dth
        self.seg_nodes = np.column_stack(
            [self.boundary_nodes, np.roll(self.boundary_nodes, -1)]
        )
        self.seg_weights = np.full(ntheta, self.seg_len)

        self.mass = self.w_bulk.copy()
        self.mass[self.boundary_nodes] += self.w_bdry
        self.volume = np.pi * R * R
        self.surface = 2.0 * np.pi * R


def _affine_fit_ops(coords, cell_nodes):
    """Per-cell linear maps sending corner values to the LSQ-affine gradient."""
    P = coords[cell_nodes]  # (nc, k, 2)
    D = P - P.mean(axis=1, keepdims=True)
    M = np.einsum("nkd,nke->nde", D, D)
    det = M[:, 0, 0] * M[:, 1, 1] - M[:, 0, 1] * M[:, 1, 0]
    Minv = np.empty_like(M)
    Minv[:, 0, 0] = M[:, 1, 1]
    Minv[:, 1, 1] = M[:, 0, 0]
    Minv[:, 0, 1] = -M[:, 0, 1]
    Minv[:, 1, 0] = -M[:, 1, 0]
    Minv /= det[:, None, None]
    return np.einsum("nde,nke->ndk", Minv, D)


def build_mesh(spec):
    """Construct a mesh from its configuration dict."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"mesh spec must be a dict with 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "interval":
        return IntervalMesh(spec.get("L", 1.0), spec.get("n", 64))
    if kind == "disc":
        return DiscMesh(spec.get("R", 1.0), spec.get("nr", 16), spec.get("ntheta", 32))
    raise ConfigError(f"unknown mesh kind {kind!r}")


def _check_field(mesh, u):
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.num_nodes,):
        raise ValueError(f"field has shape {u.shape}, mesh has {mesh.num_nodes} nodes")
    return u


def bulk_gradient(mesh, u):
    """Per-cell gradient vectors, shape (ncells, dim)."""
    u = _check_field(mesh, u)
    return np.einsum("ndk,nk->nd", mesh.cell_ops, u[mesh.cell_nodes])


def surface_gradient(mesh, u):
    """Per-boundary-segment tangential slope; empty on an interval mesh."""
    u = _check_field(mesh, u)
    if mesh.seg_nodes.shape[0] == 0:
        return np.zeros(0)
    du = u[mesh.seg_nodes[:, 1]] - u[mesh.seg_nodes[:, 0]]
    return du / mesh.seg_len


def laplace_beltrami(mesh, u):
    """Periodic second difference along the boundary loop, per boundary node."""
    if mesh.kind != "disc":
        raise ValueError("laplace_beltrami needs a 1-dimensional boundary (disc mesh); "
                         "on an interval it vanishes identically")
    u = _check_field(mesh, u)
    ub = u[mesh.boundary_nodes]
    return (np.roll(ub, 1) - 2.0 * ub + np.roll(ub, -1)) / mesh.seg_len**2


def h_inner(mesh, u, v):
    """Discrete inner product of the product space L2(bulk) x L2(boundary)."""
    u = _check_field(mesh, u)
    v = _check_field(mesh, v)
    return float(np.dot(mesh.mass, u * v))


def h_norm(mesh, u):
    return float(np.sqrt(h_inner(mesh, u, u)))
