"""Pointwise residual error estimator for the contact solve.

Patchwise terms, each scaled by the patch diameter h_p:

    eta_1,p = h_p^2 ||f + div sigma(u_h)||_inf  over the patch
    eta_2,p = h_p   ||traction jump||_inf       over patch-interior edges
    eta_3,p = h_p   ||g - sigma(u_h) n||_inf    over patch Neumann edges
    eta_4,p = h_p   ||tangential traction||_inf over patch contact edges
    eta_5,p = h_p   ||normal traction||_inf     over patch contact edges

The total combines the global maxima Psi = eta_1 + ... + eta_5 with the
logarithmic factor l_h = 1 + |log h_min|^2 and two obstacle-consistency
terms: the penetration sup (u_n - chi)^+ over the whole contact boundary
and the gap sup (chi - u_n)^+ over the active-density region, giving

    eta_h = C0 (l_h Psi + eta6 + eta7).

Sup norms are taken over sample sets that are exact for the polynomial
degrees involved; on contact edges a closed-form parabola-vertex check
locates the extremum of the quadratic trace against a locally affine
obstacle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from . import mesh as msh

# vertices, edge midpoints, then the interior quadrature points
TRI_SAMPLE = np.vstack([
    np.eye(3),
    np.array([[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]),
    fem.TRI_QP,
])
EDGE_SAMPLE = np.unique(np.concatenate([
    np.array([0.0, 0.5, 1.0]), fem.EDGE_QT, np.linspace(0.0, 1.0, 21),
]))


@dataclass
class EstimatorReport:
    h_min: float
    l_h: float
    eta: np.ndarray            # global eta_1 .. eta_5
    psi: float
    eta6: float                # penetration sup over the contact boundary
    eta7: float                # gap sup over the active-density region
    eta_h: float
    c0: float
    eta_p: np.ndarray          # (5, n_nodes) patch values
    consistency_p: np.ndarray  # (n_nodes,) local eta6/eta7 contribution
    indicator: np.ndarray      # (nt,) marking indicator
    lambda_edges: np.ndarray   # mesh edge ids of the active-density region
    osc_f: float
    osc_g: float
    osc_f_p: np.ndarray
    osc_g_p: np.ndarray


def log_factor(h_min):
    """l_h = 1 + |log h_min|^2 (natural logarithm)."""
    return 1.0 + np.log(h_min) ** 2


def total_estimate(psi, eta6, eta7, h_min, c0):
    """eta_h = C0 (l_h Psi + eta6 + eta7)."""
    return c0 * (log_factor(h_min) * psi + eta6 + eta7)


def _abs_max(arr, axis=None):
    return np.abs(arr).max(axis=axis) if arr.size else 0.0


def estimate(mesh, dofmap, patches, material, problem, u, trace=None, density=None,
             c0=0.45):
    """Evaluate all estimator contributions for one solved level."""
    nt = mesh.num_triangles
    nn = dofmap.n_nodes
    h_p = patches.diameter

    # element residual s(u_h) = f + div sigma(u_h) on the triangle sample set
    div = fem.divergence_stress(mesh, dofmap, material, u)
    xy = fem.barycentric_to_xy(mesh, TRI_SAMPLE)
    if problem.f is not None:
        fv = problem.f(xy.reshape(-1, 2)).reshape(nt, TRI_SAMPLE.shape[0], 2)
    else:
        fv = np.zeros((nt, TRI_SAMPLE.shape[0], 2))
    s_samples = fv + div[:, None, :]
    S = np.abs(s_samples).max(axis=(1, 2))                      # (nt,)
    f_mean = np.einsum("q,tqc->tc", fem.TRI_QW,
                       fv[:, -fem.TRI_QP.shape[0]:, :])          # per-element average
    OscF = np.abs(fv - f_mean[:, None, :]).max(axis=(1, 2))

    sig = fem.corner_stress(mesh, dofmap, material, u)           # (nt, 3, 2, 2)

    J = _interior_jumps(mesh, sig)                               # (ne,), nan off interior
    R, OscG = _neumann_residual(mesh, sig, problem)              # (ne,), nan off Neumann
    Tn, Tt = _contact_tractions(mesh, sig, problem)              # (ne,), nan off contact
    pen_e, gap_e = _consistency_per_edge(mesh, dofmap, problem, u, trace)

    # active-density region: contact edges of nodes with positive lumped density
    if density is not None and trace is not None:
        m = density.normal * trace.weight
        tol_active = 1e-12 * max(1.0, _abs_max(m))
        hot = np.flatnonzero(m > tol_active)
        active_local = np.unique(np.concatenate(
            [trace.node_edges[i] for i in hot])) if hot.size else np.array([], dtype=int)
        lambda_edges = trace.edge_ids[active_local]
    else:
        active_local = np.array([], dtype=int)
        lambda_edges = np.array([], dtype=np.int64)
    in_lambda = np.zeros(mesh.edges.shape[0], dtype=bool)
    in_lambda[lambda_edges] = True

    eta_p = np.zeros((5, nn))
    cons_p = np.zeros(nn)
    for p in range(nn):
        tris = patches.tris[p]
        eta_p[0, p] = h_p[p] ** 2 * S[tris].max()
        inner = patches.interior_edges[p]
        if inner.size:
            eta_p[1, p] = h_p[p] * J[inner].max()
        neu = patches.neumann_edges[p]
        if neu.size:
            eta_p[2, p] = h_p[p] * R[neu].max()
        con = patches.contact_edges[p]
        if con.size:
            eta_p[3, p] = h_p[p] * Tt[con].max()
            eta_p[4, p] = h_p[p] * Tn[con].max()
            if trace is not None:   # consistency needs the trace mesh
                cons_p[p] = pen_e[con].max()
                lam = con[in_lambda[con]]
                if lam.size:
                    cons_p[p] += gap_e[lam].max()

    kind = dofmap.kind
    glob = np.empty(5)
    glob[0] = eta_p[0].max()
    glob[1] = eta_p[1].max()
    n_nodes_mask = kind == msh.NEUMANN
    glob[2] = eta_p[2, n_nodes_mask].max() if n_nodes_mask.any() else 0.0
    c_nodes_mask = kind == msh.CONTACT
    glob[3] = eta_p[3, c_nodes_mask].max() if c_nodes_mask.any() else 0.0
    glob[4] = eta_p[4, c_nodes_mask].max() if c_nodes_mask.any() else 0.0
    psi = float(glob.sum())

    con_ids = mesh.boundary_edge_ids[mesh.boundary_tags == msh.CONTACT]
    eta6 = float(pen_e[con_ids].max()) if con_ids.size and trace is not None else 0.0
    eta7 = float(gap_e[lambda_edges].max()) if lambda_edges.size else 0.0

    h_min = float(mesh.diameters.min())
    l_h = float(log_factor(h_min))
    eta_h = float(total_estimate(psi, eta6, eta7, h_min, c0))

    node_total = l_h * eta_p.sum(axis=0) + cons_p
    elem_nodes = fem.element_nodes(mesh)
    indicator = node_total[elem_nodes].max(axis=1)

    # data oscillations (diagnostic only)
    osc_f_p = h_p ** 2 * np.array([OscF[patches.tris[p]].max() for p in range(nn)])
    osc_g_p = np.zeros(nn)
    for p in range(nn):
        neu = patches.neumann_edges[p]
        if neu.size:
            osc_g_p[p] = h_p[p] * OscG[neu].max()

    return EstimatorReport(
        h_min=h_min, l_h=l_h, eta=glob, psi=psi, eta6=eta6, eta7=eta7,
        eta_h=eta_h, c0=c0, eta_p=eta_p, consistency_p=cons_p,
        indicator=indicator, lambda_edges=lambda_edges,
        osc_f=float(osc_f_p.max()), osc_g=float(osc_g_p.max()),
        osc_f_p=osc_f_p, osc_g_p=osc_g_p)


# -- per-edge quantities -------------------------------------------------------

def _locate(mesh, tris, vert):
    """Local corner index of each vertex id within its triangle."""
    return np.argmax(mesh.triangles[tris] == vert[:, None], axis=1)


def _interior_jumps(mesh, sig):
    """Sup of the traction jump per interior edge (nan on boundary edges)."""
    ne = mesh.edges.shape[0]
    J = np.full(ne, np.nan)
    inner = np.flatnonzero(mesh.edge_tris[:, 1] >= 0)
    if inner.size == 0:
        return J
    t0, t1 = mesh.edge_tris[inner, 0], mesh.edge_tris[inner, 1]
    a, b = mesh.edges[inner, 0], mesh.edges[inner, 1]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    tang = pb - pa
    n = np.column_stack([tang[:, 1], -tang[:, 0]])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    vals = []
    for vert in (a, b):
        s0 = sig[t0, _locate(mesh, t0, vert)]
        s1 = sig[t1, _locate(mesh, t1, vert)]
        vals.append(np.einsum("eij,ej->ei", s0 - s1, n))
    jump = np.abs(np.stack(vals)).max(axis=(0, 2))
    J[inner] = jump
    return J


def _boundary_tractions(mesh, sig, ids):
    """Linear traction profile on tagged boundary edges: endpoint values.

    Returns the outward normals (k, 2) and tractions at both endpoints
    (k, 2 ends, 2 comps).
    """
    t = mesh.edge_tris[ids, 0]
    a, b = mesh.edges[ids, 0], mesh.edges[ids, 1]
    pa, pb = mesh.vertices[a], mesh.vertices[b]
    tang = pb - pa
    n = np.column_stack([tang[:, 1], -tang[:, 0]])
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    la, lb = _locate(mesh, t, a), _locate(mesh, t, b)
    opp = mesh.triangles[t, (3 - la - lb)]
    flip = np.einsum("ej,ej->e", n, mesh.vertices[opp] - pa) > 0
    n[flip] *= -1.0
    tau = np.stack([
        np.einsum("eij,ej->ei", sig[t, la], n),
        np.einsum("eij,ej->ei", sig[t, lb], n),
    ], axis=1)
    return n, tau, pa, pb


def _neumann_residual(mesh, sig, problem):
    ne = mesh.edges.shape[0]
    R = np.full(ne, np.nan)
    Osc = np.full(ne, np.nan)
    ids = mesh.boundary_edge_ids[mesh.boundary_tags == msh.NEUMANN]
    if ids.size == 0:
        return R, Osc
    _, tau, pa, pb = _boundary_tractions(mesh, sig, ids)
    s = EDGE_SAMPLE
    pts = pa[:, None, :] * (1 - s)[None, :, None] + pb[:, None, :] * s[None, :, None]
    if problem.g is not None:
        gv = problem.g(pts.reshape(-1, 2)).reshape(ids.size, s.size, 2)
    else:
        gv = np.zeros((ids.size, s.size, 2))
    tau_s = tau[:, 0, None, :] * (1 - s)[None, :, None] + tau[:, 1, None, :] * s[None, :, None]
    R[ids] = np.abs(gv - tau_s).max(axis=(1, 2))
    qpts = pa[:, None, :] * (1 - fem.EDGE_QT)[None, :, None] \
        + pb[:, None, :] * fem.EDGE_QT[None, :, None]
    if problem.g is not None:
        gq = problem.g(qpts.reshape(-1, 2)).reshape(ids.size, fem.EDGE_QT.size, 2)
    else:
        gq = np.zeros((ids.size, fem.EDGE_QT.size, 2))
    g_mean = np.einsum("q,eqc->ec", fem.EDGE_QW, gq)
    Osc[ids] = np.abs(gv - g_mean[:, None, :]).max(axis=(1, 2))
    return R, Osc


def _contact_tractions(mesh, sig, problem):
    """Per contact edge: sup of normal and tangential traction components."""
    ne = mesh.edges.shape[0]
    Tn = np.full(ne, np.nan)
    Tt = np.full(ne, np.nan)
    ids = mesh.boundary_edge_ids[mesh.boundary_tags == msh.CONTACT]
    if ids.size == 0:
        return Tn, Tt
    _, tau, _, _ = _boundary_tractions(mesh, sig, ids)
    nf = np.zeros(2)
    nf[problem.normal_comp] = problem.normal_sign
    tf = np.array([-nf[1], nf[0]])
    tau_n = tau @ nf
    tau_t = tau @ tf
    Tn[ids] = np.abs(tau_n).max(axis=1)     # traction linear: endpoints suffice
    Tt[ids] = np.abs(tau_t).max(axis=1)
    return Tn, Tt


def _consistency_per_edge(mesh, dofmap, problem, u, trace):
    """Penetration and gap sups per contact edge.

    The trace of u_n is quadratic along the edge; the obstacle is sampled
    densely and the vertex of the parabola (u_n minus the locally affine
    obstacle interpolant) is added as a candidate extremum per half-edge.
    """
    ne = mesh.edges.shape[0]
    pen = np.full(ne, np.nan)
    gapv = np.full(ne, np.nan)
    if trace is None:
        return pen, gapv
    comp, sgn = problem.normal_comp, problem.normal_sign
    for k, eid in enumerate(trace.edge_ids):
        nodes = trace.edge_nodes[k]
        un = sgn * u[2 * nodes + comp]
        pts_nodes = dofmap.coords[nodes]
        # quadratic coefficients of u_n(s), s in [0, 1] along the edge
        A = 2 * un[0] - 4 * un[1] + 2 * un[2]
        B = -3 * un[0] + 4 * un[1] - un[2]
        C = un[0]
        s = EDGE_SAMPLE
        chi_nodes = problem.chi(pts_nodes)
        cand_s = [s]
        for lo, mid_idx in ((0.0, (0, 1)), (0.5, (1, 2))):
            c0, c1 = chi_nodes[mid_idx[0]], chi_nodes[mid_idx[1]]
            if A != 0.0:
                s_star = (2.0 * (c1 - c0) - B) / (2.0 * A)
                if lo < s_star < lo + 0.5:
                    cand_s.append(np.array([s_star]))
        svals = np.concatenate(cand_s)
        p0, p1 = pts_nodes[0], pts_nodes[2]
        pts = p0[None, :] * (1 - svals)[:, None] + p1[None, :] * svals[:, None]
        un_s = (A * svals + B) * svals + C
        chi_s = problem.chi(pts)
        diff = un_s - chi_s
        pen[eid] = max(np.max(diff), 0.0) + 0.0
        gapv[eid] = max(np.max(-diff), 0.0) + 0.0
    return pen, gapv
