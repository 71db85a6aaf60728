"""Conforming triangle meshes: boundary tags, patches, bisection refinement.

A mesh is immutable; ``refine`` returns a new one.  Each triangle stores its
bisection peak as the first vertex, so the refinement edge is the edge
opposite to it.  Marked refinement uses newest-vertex bisection with closure,
which keeps the minimum angle bounded over arbitrarily many refinements.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

DIRICHLET = "D"
NEUMANN = "N"
CONTACT = "C"
TAGS = (DIRICHLET, NEUMANN, CONTACT)


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Mesh:
    """Conforming triangulation of a polygonal domain.

    vertices        (nv, 2) coordinates
    triangles       (nt, 3) vertex indices, positively oriented; the edge
                    opposite the first vertex is the refinement edge
    boundary_edges  (nb, 2) vertex pairs covering the whole boundary
    boundary_tags   (nb,)   one of "D", "N", "C" per boundary edge
    levels          (nt,)   bisection generation of each triangle
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: np.ndarray
    levels: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "triangles", np.asarray(self.triangles, dtype=np.int64))
        object.__setattr__(self, "boundary_edges", np.asarray(self.boundary_edges, dtype=np.int64))
        object.__setattr__(self, "boundary_tags", np.asarray(self.boundary_tags, dtype="<U1"))
        if self.levels is None:
            object.__setattr__(self, "levels", np.zeros(len(self.triangles), dtype=np.int64))
        else:
            object.__setattr__(self, "levels", np.asarray(self.levels, dtype=np.int64))
        self._validate()

    # -- derived connectivity -------------------------------------------------

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def edges(self):
        """(ne, 2) unique edges, each stored as (min, max)."""
        e = self.triangles[:, [1, 2, 2, 0, 0, 1]].reshape(-1, 2)
        e.sort(axis=1)
        uniq, inv = np.unique(e, axis=0, return_inverse=True)
        object.__setattr__(self, "_edge_inverse", inv.reshape(-1, 3))
        return uniq

    @cached_property
    def tri_edges(self):
        """(nt, 3) edge index opposite each local vertex."""
        self.edges
        return self._edge_inverse

    @cached_property
    def edge_tris(self):
        """(ne, 2) adjacent triangles per edge, -1 where the edge is boundary."""
        ne = self.edges.shape[0]
        adj = np.full((ne, 2), -1, dtype=np.int64)
        count = np.zeros(ne, dtype=np.int64)
        flat = self.tri_edges.ravel()
        tri_ids = np.repeat(np.arange(self.num_triangles), 3)
        order = np.argsort(flat, kind="stable")
        for e, t in zip(flat[order], tri_ids[order]):
            if count[e] > 1:
                raise MeshError(f"edge {e} shared by more than two triangles")
            adj[e, count[e]] = t
            count[e] += 1
        return adj

    @cached_property
    def boundary_edge_ids(self):
        """(nb,) index into ``edges`` of each tagged boundary edge."""
        key = np.sort(self.boundary_edges, axis=1)
        lookup = {tuple(e): i for i, e in enumerate(self.edges)}
        try:
            return np.array([lookup[tuple(k)] for k in key], dtype=np.int64)
        except KeyError as exc:
            raise MeshError(f"boundary edge {exc} not found in mesh") from exc

    @cached_property
    def edge_tag(self):
        """(ne,) boundary tag per edge, '' for interior edges."""
        tag = np.full(self.edges.shape[0], "", dtype="<U1")
        tag[self.boundary_edge_ids] = self.boundary_tags
        return tag

    @cached_property
    def vertex_tris(self):
        """CSR-style vertex-to-triangle adjacency (offsets, tri ids)."""
        flat = self.triangles.ravel()
        order = np.argsort(flat, kind="stable")
        counts = np.bincount(flat, minlength=self.num_vertices)
        offsets = np.concatenate([[0], np.cumsum(counts)])
        return offsets, order // 3

    def tris_of_vertex(self, v):
        offsets, ids = self.vertex_tris
        return ids[offsets[v]:offsets[v + 1]]

    @cached_property
    def areas(self):
        p = self.vertices[self.triangles]
        a, b = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])

    @cached_property
    def diameters(self):
        p = self.vertices[self.triangles]
        l0 = np.linalg.norm(p[:, 1] - p[:, 2], axis=1)
        l1 = np.linalg.norm(p[:, 2] - p[:, 0], axis=1)
        l2 = np.linalg.norm(p[:, 0] - p[:, 1], axis=1)
        return np.maximum(np.maximum(l0, l1), l2)

    def edge_length(self, e):
        v = self.edges[e]
        return np.linalg.norm(self.vertices[v[..., 1]] - self.vertices[v[..., 0]], axis=-1)

    # -- checks ---------------------------------------------------------------

    def _validate(self):
        if self.triangles.size and self.areas.min() <= 0.0:
            bad = int(np.argmin(self.areas))
            raise MeshError(f"triangle {bad} has non-positive area {self.areas[bad]}")
        et = self.edge_tris
        boundary = set(map(tuple, np.sort(self.boundary_edges, axis=1)))
        derived = set(map(tuple, self.edges[et[:, 1] < 0]))
        if boundary != derived:
            raise MeshError("tagged boundary edges do not match topological boundary")
        if not set(self.boundary_tags) <= set(TAGS):
            raise MeshError(f"unknown boundary tag in {set(self.boundary_tags)}")
        # closures of the Dirichlet and contact boundaries must not intersect
        d_verts = set(self.boundary_edges[self.boundary_tags == DIRICHLET].ravel())
        c_verts = set(self.boundary_edges[self.boundary_tags == CONTACT].ravel())
        if d_verts & c_verts:
            raise MeshError("Dirichlet and contact boundary closures intersect")

    def min_angle(self):
        """Smallest interior angle over all triangles, in radians."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosv = (a * b).sum(axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cosv, -1.0, 1.0)))
        return float(np.min(angles))


# -- structured generation ----------------------------------------------------

def tag_bottom_contact(x, y):
    """Contact on y=0, Dirichlet on y=1, Neumann on the two sides."""
    if y < 1e-12:
        return CONTACT
    if y > 1.0 - 1e-12:
        return DIRICHLET
    return NEUMANN


def tag_right_contact(x, y):
    """Contact on x=1, Dirichlet on x=0, Neumann on top and bottom."""
    if x > 1.0 - 1e-12:
        return CONTACT
    if x < 1e-12:
        return DIRICHLET
    return NEUMANN


def tag_all_dirichlet(x, y):
    return DIRICHLET


def generate_unit_square(n, tagging):
    """Structured mesh of (0,1)^2 with 2*n^2 right isoceles triangles.

    Every cell is split along its main diagonal; the right-angle vertex is
    the bisection peak, so the refinement edge is the hypotenuse and newest
    vertex bisection reproduces the 45-degree minimum angle exactly.
    ``tagging`` maps a boundary-edge midpoint (x, y) to a tag character.
    """
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    xs = np.linspace(0.0, 1.0, n + 1)
    ys = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    tris = []
    for j in range(n):
        for i in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            tris.append((v10, v11, v00))   # lower-right, peak at the right angle
            tris.append((v01, v00, v11))   # upper-left
    b_edges, b_tags = [], []
    for i in range(n):
        b_edges.append((vid(i, 0), vid(i + 1, 0)))
        b_edges.append((vid(i, n), vid(i + 1, n)))
    for j in range(n):
        b_edges.append((vid(0, j), vid(0, j + 1)))
        b_edges.append((vid(n, j), vid(n, j + 1)))
    for (a, b) in b_edges:
        mx, my = vertices[[a, b]].mean(axis=0)
        b_tags.append(tagging(mx, my))
    return Mesh(vertices, np.array(tris), np.array(b_edges), np.array(b_tags))


# -- refinement ---------------------------------------------------------------

def refine(mesh, marked):
    """Bisect every marked triangle; closure restores conformity.

    Children inherit boundary tags from their ancestor edges and carry
    level = parent level + number of bisections.
    """
    marked = np.unique(np.asarray(list(marked), dtype=np.int64)) if len(marked) else np.array([], dtype=np.int64)
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.num_triangles:
        raise IndexError("marked set contains an invalid triangle index")

    tri_edges = mesh.tri_edges
    split = np.zeros(mesh.edges.shape[0], dtype=bool)
    split[tri_edges[marked, 0]] = True
    while True:
        # any triangle with a split edge must also split its refinement edge
        need = split[tri_edges].any(axis=1) & ~split[tri_edges[:, 0]]
        if not need.any():
            break
        split[tri_edges[need, 0]] = True

    nv = mesh.num_vertices
    split_ids = np.flatnonzero(split)
    mid_of = np.full(mesh.edges.shape[0], -1, dtype=np.int64)
    mid_of[split_ids] = nv + np.arange(split_ids.size)
    midpoints = mesh.vertices[mesh.edges[split_ids]].mean(axis=1)
    new_vertices = np.vstack([mesh.vertices, midpoints])

    new_tris, new_levels = [], []
    for t in range(mesh.num_triangles):
        a, b, c = mesh.triangles[t]
        e0, e1, e2 = tri_edges[t]
        lvl = mesh.levels[t]
        if not split[e0]:
            new_tris.append((a, b, c))
            new_levels.append(lvl)
            continue
        m0 = mid_of[e0]
        # first bisection: children have the new vertex as peak
        for child, echild in (((m0, c, a), e1), ((m0, a, b), e2)):
            if split[echild]:
                p, q, r = child
                m = mid_of[echild]
                new_tris.append((m, r, p))
                new_tris.append((m, p, q))
                new_levels.extend((lvl + 2, lvl + 2))
            else:
                new_tris.append(child)
                new_levels.append(lvl + 1)

    b_edges, b_tags = [], []
    for (u, v), tag, eid in zip(mesh.boundary_edges, mesh.boundary_tags, mesh.boundary_edge_ids):
        if split[eid]:
            m = mid_of[eid]
            b_edges.extend([(u, m), (m, v)])
            b_tags.extend([tag, tag])
        else:
            b_edges.append((u, v))
            b_tags.append(tag)

    return Mesh(new_vertices, np.array(new_tris), np.array(b_edges), np.array(b_tags),
                np.array(new_levels))


def uniform_refine(mesh, times=1):
    for _ in range(times):
        mesh = refine(mesh, np.arange(mesh.num_triangles))
    return mesh


# -- patches ------------------------------------------------------------------

@dataclass(frozen=True)
class PatchTable:
    """Per-node patch data for the quadratic node set (vertices + midpoints).

    For a vertex the patch is every triangle containing it; for an edge
    midpoint it is the one or two triangles sharing the edge.  ``diameter``
    is the largest pairwise distance between patch corner vertices.  The
    edge sets collect, per patch, the edges interior to the patch and the
    Neumann/contact boundary edges lying on it.
    """

    tris: list
    diameter: np.ndarray
    interior_edges: list
    neumann_edges: list
    contact_edges: list


def build_patches(mesh, dofmap):
    """Assemble the PatchTable for all quadratic nodes of ``dofmap``."""
    nv = mesh.num_vertices
    nn = dofmap.n_nodes
    edge_tris = mesh.edge_tris
    tri_edges = mesh.tri_edges
    edge_tag = mesh.edge_tag
    verts = mesh.vertices
    tris_list = [None] * nn
    interior = [None] * nn
    neumann = [None] * nn
    contact = [None] * nn
    diam = np.zeros(nn)

    for p in range(nn):
        if p < nv:
            patch = mesh.tris_of_vertex(p)
        else:
            adj = edge_tris[p - nv]
            patch = adj[adj >= 0]
        tris_list[p] = patch
        pset = set(patch.tolist())
        edges = np.unique(tri_edges[patch].ravel())
        inner, neu, con = [], [], []
        for e in edges:
            t0, t1 = edge_tris[e]
            if t1 >= 0:
                if t0 in pset and t1 in pset:
                    inner.append(e)
            elif edge_tag[e] == NEUMANN:
                neu.append(e)
            elif edge_tag[e] == CONTACT:
                con.append(e)
        interior[p] = np.array(inner, dtype=np.int64)
        neumann[p] = np.array(neu, dtype=np.int64)
        contact[p] = np.array(con, dtype=np.int64)
        pts = verts[np.unique(mesh.triangles[patch].ravel())]
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        diam[p] = np.sqrt(d2.max())

    return PatchTable(tris_list, diam, interior, neumann, contact)


# -- file formats -------------------------------------------------------------

def write_native(mesh, path):
    """Plain-text format: 'nv nt nb' header, vertices, triangles, tagged edges."""
    with open(path, "w") as out:
        out.write(f"{mesh.num_vertices} {mesh.num_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.vertices:
            out.write(f"{x:.17g} {y:.17g}\n")
        for a, b, c in mesh.triangles:
            out.write(f"{a} {b} {c}\n")
        for (u, v), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
            out.write(f"{u} {v} {tag}\n")


def read_native(path):
    with open(path) as src:
        nv, nt, nb = map(int, src.readline().split())
        vertices = np.array([list(map(float, src.readline().split())) for _ in range(nv)])
        triangles = np.array([list(map(int, src.readline().split())) for _ in range(nt)])
        b_edges, b_tags = [], []
        for _ in range(nb):
            u, v, tag = src.readline().split()
            b_edges.append((int(u), int(v)))
            b_tags.append(tag)
    return Mesh(vertices, triangles, np.array(b_edges), np.array(b_tags))


def write_vtk(mesh, path, point_data=None, cell_data=None):
    """Legacy ASCII VTK unstructured grid (cell type 5).

    ``point_data``/``cell_data`` map names to arrays; vectors are written as
    3-component VECTORS, scalars as SCALARS.  Point arrays are per vertex.
    """
    with open(path, "w") as out:
        out.write("# vtk DataFile Version 3.0\n")
        out.write("signorini mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        out.write(f"POINTS {mesh.num_vertices} double\n")
        for x, y in mesh.vertices:
            out.write(f"{x:.17g} {y:.17g} 0.0\n")
        nt = mesh.num_triangles
        out.write(f"CELLS {nt} {4 * nt}\n")
        for a, b, c in mesh.triangles:
            out.write(f"3 {a} {b} {c}\n")
        out.write(f"CELL_TYPES {nt}\n")
        out.write("\n".join(["5"] * nt) + "\n")
        if point_data:
            out.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, arr in point_data.items():
                arr = np.asarray(arr, dtype=float)
                if arr.ndim == 2:
                    out.write(f"VECTORS {name} double\n")
                    for vx, vy in arr:
                        out.write(f"{vx:.17g} {vy:.17g} 0.0\n")
                else:
                    out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                    for v in arr:
                        out.write(f"{v:.17g}\n")
        if cell_data:
            out.write(f"CELL_DATA {nt}\n")
            for name, arr in cell_data.items():
                out.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
                for v in np.asarray(arr, dtype=float):
                    out.write(f"{v:.17g}\n")
