"""Quadratic Lagrange vector elements for plane linear elasticity.

Degrees of freedom sit at vertices and edge midpoints, two displacement
components per node (dof index = 2*node + component).  The bilinear form is

    a(z, v) = int_Omega sigma(z) : eps(v) dx,
    sigma(v) = 2 mu eps(v) + lam tr(eps(v)) I,

and the load is L(v) = (f, v) + <g, v>_{Gamma_N}.  Element integrals use a
six-point degree-4 triangle rule and three-point Gauss on edges; Dirichlet
rows are kept in the assembled matrix and eliminated symmetrically at solve
time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import mesh as msh

# Degree-4 rule on the reference triangle (6 points, weights sum to 1).
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
TRI_QW = np.array([_W1] * 3 + [_W2] * 3)
TRI_QP = np.array([
    [1 - 2 * _A1, _A1, _A1],
    [_A1, 1 - 2 * _A1, _A1],
    [_A1, _A1, 1 - 2 * _A1],
    [1 - 2 * _A2, _A2, _A2],
    [_A2, 1 - 2 * _A2, _A2],
    [_A2, _A2, 1 - 2 * _A2],
])

# 3-point Gauss on [0, 1] (degree 5).
EDGE_QT = np.array([0.5 - np.sqrt(15) / 10, 0.5, 0.5 + np.sqrt(15) / 10])
EDGE_QW = np.array([5.0, 8.0, 5.0]) / 18.0

_DL = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # barycentric gradients in (xi, eta)


@dataclass(frozen=True)
class MaterialLaw:
    """Isotropic Lame parameters: shear modulus ``mu`` and ``lam``."""

    mu: float
    lam: float

    def __post_init__(self):
        if self.mu <= 0 or self.lam < 0:
            raise ValueError(f"need mu > 0 and lam >= 0, got mu={self.mu}, lam={self.lam}")

    @classmethod
    def from_young_poisson(cls, E, nu):
        """Convert (E, nu) with lam = E nu / ((1+nu)(1-2nu)), mu = E / (2(1+nu))."""
        if E <= 0:
            raise ValueError(f"Young's modulus must be positive, got {E}")
        if not 0.0 <= nu < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {nu}")
        return cls(mu=E / (2.0 * (1.0 + nu)), lam=E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)))

    @property
    def stress_scale(self):
        return 2.0 * self.mu + self.lam


def shape_values(bary):
    """P2 basis values at barycentric points.  bary (..., 3) -> (..., 6)."""
    L = np.asarray(bary, dtype=float)
    l0, l1, l2 = L[..., 0], L[..., 1], L[..., 2]
    return np.stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ], axis=-1)


def shape_grads_ref(bary):
    """Reference-coordinate gradients at barycentric points: (..., 6, 2)."""
    L = np.asarray(bary, dtype=float)
    out = np.empty(L.shape[:-1] + (6, 2))
    for k in range(3):
        out[..., k, :] = (4 * L[..., k, None] - 1) * _DL[k]
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        out[..., 3 + k, :] = 4 * (L[..., i, None] * _DL[j] + L[..., j, None] * _DL[i])
    return out


def shape_eval(mesh, tri, bary):
    """Basis values and physical gradients on one triangle.

    Returns (npts, 6) values and (npts, 6, 2) gradients, the latter mapped
    through the inverse-transposed element Jacobian.
    """
    bary = np.atleast_2d(np.asarray(bary, dtype=float))
    vals = shape_values(bary)
    inv_jac = geometry(mesh).inv_jac[tri]
    grads = np.einsum("qad,de->qae", shape_grads_ref(bary), inv_jac)
    return vals, grads


def shape_hessians_ref():
    """Constant reference Hessians of the six basis functions: (6, 2, 2)."""
    H = np.empty((6, 2, 2))
    for k in range(3):
        H[k] = 4.0 * np.outer(_DL[k], _DL[k])
    for k in range(3):
        i, j = (k + 1) % 3, (k + 2) % 3
        H[3 + k] = 4.0 * (np.outer(_DL[i], _DL[j]) + np.outer(_DL[j], _DL[i]))
    return H


_HESS_REF = shape_hessians_ref()
_CORNER_BARY = np.eye(3)
_GRAD_REF_QP = shape_grads_ref(TRI_QP)                  # (6, 6, 2)
_VAL_QP = shape_values(TRI_QP)                          # (6, 6)


@dataclass(frozen=True)
class DofMap:
    """Node enumeration and boundary classification for one mesh.

    Nodes 0..nv-1 are the vertices, node nv+e is the midpoint of edge e.
    ``kind`` holds 'i' (interior), 'D', 'N' or 'C' per node; a vertex where
    several boundary parts meet takes Dirichlet over Neumann and contact over
    Neumann (Dirichlet and contact never meet, which the mesh enforces).
    """

    mesh: msh.Mesh
    coords: np.ndarray = field(init=False)
    kind: np.ndarray = field(init=False)

    def __post_init__(self):
        m = self.mesh
        nv = m.num_vertices
        coords = np.vstack([m.vertices, m.vertices[m.edges].mean(axis=1)])
        rank = {"i": 0, msh.NEUMANN: 1, msh.CONTACT: 2, msh.DIRICHLET: 3}
        inv_rank = {v: k for k, v in rank.items()}
        vrank = np.zeros(nv, dtype=int)
        kind = np.full(nv + m.edges.shape[0], "i", dtype="<U1")
        for eid, tag in zip(m.boundary_edge_ids, m.boundary_tags):
            kind[nv + eid] = tag
            for v in m.edges[eid]:
                vrank[v] = max(vrank[v], rank[tag])
        for v in range(nv):
            kind[v] = inv_rank[vrank[v]]
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "kind", kind)

    @property
    def n_vertices(self):
        return self.mesh.num_vertices

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def ndof(self):
        return 2 * self.n_nodes

    def nodes_of(self, kind):
        return np.flatnonzero(self.kind == kind)

    @property
    def contact_nodes(self):
        return self.nodes_of(msh.CONTACT)

    @property
    def dirichlet_nodes(self):
        return self.nodes_of(msh.DIRICHLET)

    @property
    def dirichlet_dofs(self):
        nodes = self.dirichlet_nodes
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))


def element_nodes(mesh):
    """(nt, 6) global node ids in local order: 3 vertices, 3 opposite midpoints."""
    nv = mesh.num_vertices
    return np.hstack([mesh.triangles, nv + mesh.tri_edges])


def element_dofs(mesh):
    """(nt, 12) global dof ids interleaved as (node, component)."""
    nodes = element_nodes(mesh)
    dofs = np.empty((nodes.shape[0], 12), dtype=np.int64)
    dofs[:, 0::2] = 2 * nodes
    dofs[:, 1::2] = 2 * nodes + 1
    return dofs


@dataclass(frozen=True)
class Geometry:
    """Per-element affine maps for one mesh."""

    jac: np.ndarray      # (nt, 2, 2), columns are the two edge vectors at vertex 0
    inv_jac: np.ndarray  # (nt, 2, 2)
    area: np.ndarray     # (nt,)


def geometry(mesh):
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1] / det
    inv[:, 0, 1] = -jac[:, 0, 1] / det
    inv[:, 1, 0] = -jac[:, 1, 0] / det
    inv[:, 1, 1] = jac[:, 0, 0] / det
    return Geometry(jac, inv, 0.5 * det)


def barycentric_to_xy(mesh, bary):
    """Map barycentric sample points to physical coordinates, (nt, npts, 2)."""
    p = mesh.vertices[mesh.triangles]
    return np.einsum("qk,tkd->tqd", np.asarray(bary, dtype=float), p)


@dataclass(frozen=True)
class SparseSystem:
    """Assembled stiffness/load with Dirichlet data kept separately.

    K is the full symmetric matrix (no rows eliminated); solvers restrict to
    free dofs and move prescribed values to the right-hand side.
    """

    K: sp.csr_matrix
    F: np.ndarray
    dirichlet_dofs: np.ndarray
    dirichlet_values: np.ndarray
    material: MaterialLaw

    @property
    def ndof(self):
        return self.F.shape[0]

    def free_mask(self):
        free = np.ones(self.ndof, dtype=bool)
        free[self.dirichlet_dofs] = False
        return free


def assemble(mesh, dofmap, material, problem):
    """Build the elasticity stiffness matrix and load vector.

    ``problem`` provides vectorized callables f(points) -> (n, 2) and
    g(points) -> (n, 2) plus Dirichlet data; any of them may be None for zero
    data.
    """
    geo = geometry(mesh)
    if np.any(geo.area <= 0):
        bad = int(np.argmin(geo.area))
        raise ValueError(f"degenerate triangle {bad} in assembly")
    nt = mesh.num_triangles
    mu, lam = material.mu, material.lam
    D = np.array([
        [2 * mu + lam, lam, 0.0],
        [lam, 2 * mu + lam, 0.0],
        [0.0, 0.0, mu],
    ])

    # physical gradients at quadrature points: (nt, nq, 6, 2)
    dN = np.einsum("qad,tde->tqae", _GRAD_REF_QP, geo.inv_jac)
    B = np.zeros((nt, 6, 3, 12))
    B[:, :, 0, 0::2] = dN[..., 0]
    B[:, :, 1, 1::2] = dN[..., 1]
    B[:, :, 2, 0::2] = dN[..., 1]
    B[:, :, 2, 1::2] = dN[..., 0]
    Ke = np.zeros((nt, 12, 12))
    for q in range(6):
        DB = np.einsum("ij,tjb->tib", D, B[:, q])
        Ke += TRI_QW[q] * np.einsum("tia,tib->tab", B[:, q], DB)
    Ke *= geo.area[:, None, None]

    dofs = element_dofs(mesh)
    rows = np.repeat(dofs, 12, axis=1).ravel()
    cols = np.tile(dofs, (1, 12)).ravel()
    K = sp.coo_matrix((Ke.ravel(), (rows, cols)), shape=(dofmap.ndof, dofmap.ndof)).tocsr()

    F = np.zeros(dofmap.ndof)
    if problem is not None and problem.f is not None:
        xy = barycentric_to_xy(mesh, TRI_QP)
        fv = problem.f(xy.reshape(-1, 2)).reshape(nt, 6, 2)
        # (nt, 12) element loads: sum_q w_q area f_i(x_q) N_a(x_q)
        fe = np.einsum("q,qa,tqc->tac", TRI_QW, _VAL_QP, fv) * geo.area[:, None, None]
        np.add.at(F, dofs, fe.reshape(nt, 12))

    if problem is not None and problem.g is not None:
        _add_neumann_load(mesh, F, problem.g)

    d_dofs = dofmap.dirichlet_dofs
    if problem is not None and problem.dirichlet is not None and d_dofs.size:
        vals = problem.dirichlet(dofmap.coords[dofmap.dirichlet_nodes])
        d_values = np.empty(d_dofs.size)
        d_values[0::2] = vals[:, 0]
        d_values[1::2] = vals[:, 1]
    else:
        d_values = np.zeros(d_dofs.size)
    return SparseSystem(K, F, d_dofs, d_values, material)


def _add_neumann_load(mesh, F, g):
    nv = mesh.num_vertices
    ids = mesh.boundary_edge_ids[mesh.boundary_tags == msh.NEUMANN]
    if ids.size == 0:
        return
    v0 = mesh.vertices[mesh.edges[ids, 0]]
    v1 = mesh.vertices[mesh.edges[ids, 1]]
    length = np.linalg.norm(v1 - v0, axis=1)
    # 1D quadratic Lagrange trace: endpoint, endpoint, midpoint
    t = EDGE_QT
    Nend0 = (2 * t - 1) * (t - 1)
    Nend1 = t * (2 * t - 1)
    Nmid = 4 * t * (1 - t)
    pts = v0[:, None, :] * (1 - t)[None, :, None] + v1[:, None, :] * t[None, :, None]
    gv = g(pts.reshape(-1, 2)).reshape(ids.size, t.size, 2)
    w = EDGE_QW[None, :] * length[:, None]
    for shape, node in ((Nend0, mesh.edges[ids, 0]),
                        (Nend1, mesh.edges[ids, 1]),
                        (Nmid, nv + ids)):
        contrib = np.einsum("eq,eq,eqc->ec", w, np.broadcast_to(shape, w.shape), gv)
        np.add.at(F, 2 * node, contrib[:, 0])
        np.add.at(F, 2 * node + 1, contrib[:, 1])


def dump_matrixmarket(system, prefix):
    """Write K and F in MatrixMarket coordinate format (debug aid)."""
    from scipy.io import mmwrite

    mmwrite(f"{prefix}_K.mtx", sp.coo_matrix(system.K))
    mmwrite(f"{prefix}_F.mtx", sp.coo_matrix(system.F.reshape(-1, 1)))


# -- pointwise evaluation -----------------------------------------------------

def displacement_at(mesh, dofmap, u, tris, bary):
    """u_h at barycentric points of the given triangles: (ntris, npts, 2)."""
    nodes = element_nodes(mesh)[tris]
    coeff = np.stack([u[2 * nodes], u[2 * nodes + 1]], axis=-1)   # (nt, 6, 2)
    vals = shape_values(bary)                                      # (npts, 6)
    return np.einsum("qa,tac->tqc", vals, coeff)


def gradient_at(mesh, dofmap, u, tris, bary):
    """grad u_h (rows: component, cols: direction) at barycentric points."""
    geo = geometry(mesh)
    nodes = element_nodes(mesh)[tris]
    coeff = np.stack([u[2 * nodes], u[2 * nodes + 1]], axis=-1)
    dref = shape_grads_ref(bary)                                   # (npts, 6, 2)
    dphys = np.einsum("qad,tde->tqae", dref, geo.inv_jac[tris])
    return np.einsum("tqad,tac->tqcd", dphys, coeff)


def stress_from_grad(grad, material):
    """sigma = 2 mu eps + lam tr(eps) I from displacement gradients (..., 2, 2)."""
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    sig = 2.0 * material.mu * eps
    sig[..., 0, 0] += material.lam * tr
    sig[..., 1, 1] += material.lam * tr
    return sig


def corner_stress(mesh, dofmap, material, u):
    """sigma(u_h) at the three corners of every triangle: (nt, 3, 2, 2).

    The stress of a quadratic displacement is linear per element, so corner
    values determine it everywhere on the element.
    """
    grads = gradient_at(mesh, dofmap, u, np.arange(mesh.num_triangles), _CORNER_BARY)
    return stress_from_grad(grads, material)


def outward_normal(mesh, edge_id, tri_id):
    """Unit normal of the given edge pointing out of the given triangle."""
    a, b = mesh.edges[edge_id]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    tangent = pb - pa
    n = np.array([tangent[1], -tangent[0]])
    n /= np.linalg.norm(n)
    opposite = [v for v in mesh.triangles[tri_id] if v not in (a, b)][0]
    if n @ (mesh.vertices[opposite] - pa) > 0:
        n = -n
    return n


def edge_traction(mesh, dofmap, material, u, edge_id, tri_id, params):
    """sigma(u_h) n along an edge, seen from one adjacent triangle.

    ``params`` are positions in [0, 1] along the edge from its first stored
    vertex; the traction is linear in that parameter.  Returns (npts, 2).
    """
    a, b = mesh.edges[edge_id]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    params = np.atleast_1d(np.asarray(params, dtype=float))
    pts = pa[None, :] * (1 - params)[:, None] + pb[None, :] * params[:, None]
    bary = _xy_to_bary(mesh, tri_id, pts)
    grad = gradient_at(mesh, dofmap, u, np.array([tri_id]), bary)[0]
    sig = stress_from_grad(grad, material)
    return sig @ outward_normal(mesh, edge_id, tri_id)


def _xy_to_bary(mesh, tri_id, pts):
    p = mesh.vertices[mesh.triangles[tri_id]]
    T = np.column_stack([p[1] - p[0], p[2] - p[0]])
    loc = np.linalg.solve(T, (pts - p[0]).T).T
    return np.column_stack([1 - loc.sum(axis=1), loc])


def divergence_stress(mesh, dofmap, material, u):
    """div sigma(u_h), constant per element: (nt, 2)."""
    geo = geometry(mesh)
    nodes = element_nodes(mesh)
    coeff = np.stack([u[2 * nodes], u[2 * nodes + 1]], axis=-1)   # (nt, 6, 2)
    # physical Hessians: inv_jac^T Href inv_jac per element and basis function
    H = np.einsum("ted,aef,tfg->tadg", geo.inv_jac, _HESS_REF, geo.inv_jac)
    Hu = np.einsum("tac,tadg->tcdg", coeff, H)                     # (nt, 2, 2, 2)
    mu, lam = material.mu, material.lam
    lap = Hu[:, :, 0, 0] + Hu[:, :, 1, 1]
    grad_div = Hu[:, 0, 0, :] + Hu[:, 1, 1, :]
    return mu * lap + (mu + lam) * grad_div


def interior_residual(mesh, dofmap, material, u, f, tris, bary):
    """s(u_h) = f + div sigma(u_h) sampled on elements: (ntris, npts, 2)."""
    tris = np.asarray(tris)
    div = divergence_stress(mesh, dofmap, material, u)[tris]
    xy = np.einsum("qk,tkd->tqd", np.asarray(bary, dtype=float),
                   mesh.vertices[mesh.triangles[tris]])
    npts = xy.shape[1]
    if f is None:
        fv = np.zeros((tris.size, npts, 2))
    else:
        fv = f(xy.reshape(-1, 2)).reshape(tris.size, npts, 2)
    return fv + div[:, None, :]


def interpolate(dofmap, func):
    """Nodal interpolant of a vectorized field func(points) -> (n, 2)."""
    vals = func(dofmap.coords)
    u = np.empty(dofmap.ndof)
    u[0::2] = vals[:, 0]
    u[1::2] = vals[:, 1]
    return u
