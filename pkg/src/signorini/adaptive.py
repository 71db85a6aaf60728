"""SOLVE -> ESTIMATE -> MARK -> REFINE loop with per-level reporting.

Each level assembles and solves the contact problem, evaluates the pointwise
estimator, records a trace row (written as ``convergence.csv`` when an output
directory is given, together with a legacy VTK dump per level and a
``config.json`` echo of the effective parameters), then refines the triangles
selected by maximum marking:  mark T whenever its indicator is at least
theta times the largest indicator.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import density as dens
from . import estimator as est
from . import fem
from . import mesh as msh
from . import problems as prb
from . import vi

CSV_HEADER = ("level,ndof,hmin,lh,eta1,eta2,eta3,eta4,eta5,eta6,eta7,"
              "psi,eta_h,err_inf,eff_index,active_nodes,seconds")


@dataclass
class AdaptiveParams:
    levels: int = 12
    theta: float = 0.5
    c0: float = 0.45
    pdas_c: float | None = None
    n0: int = 4
    uniform: bool = False
    max_pdas_iter: int = 100

    def validate(self):
        if self.levels < 1:
            raise ValueError("need at least one level")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"marking fraction must be in (0, 1], got {self.theta}")
        if self.n0 < 1:
            raise ValueError("initial subdivision must be >= 1")


@dataclass
class LevelChecks:
    """Scalar diagnostics backing the sign/residual/complementarity suites."""

    lam_n_min: float
    lam_n_max: float
    lam_t_max: float
    resid_free_max: float
    resid_scale: float
    resid_normal_min: float
    resid_tangential_max: float
    comp_max: float
    comp_scale: float
    feas_violation: float


@dataclass
class LevelRecord:
    level: int
    ndof: int
    h_min: float
    l_h: float
    eta: tuple            # eta_1 .. eta_5
    eta6: float
    eta7: float
    psi: float
    eta_h: float
    err_inf: float        # nan when no exact solution
    eff_index: float
    active_nodes: int
    seconds: float
    checks: LevelChecks
    n_marked: int = 0
    marked_near_fraction: float = float("nan")

    def csv_row(self):
        nums = [self.h_min, self.l_h, *self.eta, self.eta6, self.eta7,
                self.psi, self.eta_h, self.err_inf, self.eff_index]
        body = ",".join(f"{x:.17g}" for x in nums)
        return (f"{self.level},{self.ndof},{body},{self.active_nodes},"
                f"{self.seconds:.3f}")


@dataclass
class AdaptiveResult:
    problem: prb.ProblemSpec
    params: AdaptiveParams
    records: list
    mesh: msh.Mesh
    dofmap: fem.DofMap
    solution: vi.VISolution
    report: est.EstimatorReport
    density: dens.DensityField
    trace_mesh: dens.ContactTraceMesh

    @property
    def ndofs(self):
        return np.array([r.ndof for r in self.records], dtype=float)


def mark(indicators, theta, diameters=None):
    """Maximum marking: triangles with indicator >= theta * max indicator.

    When every indicator vanishes, the largest triangle is marked so that the
    loop always makes progress.
    """
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"marking fraction must be in (0, 1], got {theta}")
    indicators = np.asarray(indicators, dtype=float)
    top = indicators.max() if indicators.size else 0.0
    if top <= 0.0:
        if diameters is None:
            raise ValueError("all indicators vanish and no diameters given")
        return np.array([int(np.argmax(diameters))])
    return np.flatnonzero(indicators >= theta * top)


def _point_segment_distance(points, seg_a, seg_b):
    """Distance of each point to the nearest of the given segments."""
    d = seg_b - seg_a                                     # (k, 2)
    len2 = (d * d).sum(axis=1)
    diff = points[:, None, :] - seg_a[None, :, :]         # (m, k, 2)
    t = np.clip(np.einsum("mkd,kd->mk", diff, d) / len2, 0.0, 1.0)
    proj = seg_a[None, :, :] + t[:, :, None] * d[None, :, :]
    return np.linalg.norm(points[:, None, :] - proj, axis=2).min(axis=1)


def _near_fraction(mesh, marked, radius=0.25):
    """Fraction of marked centroids within ``radius`` of the contact boundary
    or of a Dirichlet-Neumann corner."""
    centroids = mesh.vertices[mesh.triangles[marked]].mean(axis=1)
    con = mesh.boundary_tags == msh.CONTACT
    dist = np.full(len(marked), np.inf)
    if con.any():
        seg = mesh.vertices[mesh.boundary_edges[con]]
        dist = _point_segment_distance(centroids, seg[:, 0], seg[:, 1])
    d_verts = set(mesh.boundary_edges[mesh.boundary_tags == msh.DIRICHLET].ravel())
    n_verts = set(mesh.boundary_edges[mesh.boundary_tags == msh.NEUMANN].ravel())
    corners = sorted(d_verts & n_verts)
    if corners:
        dc = np.linalg.norm(centroids[:, None, :] - mesh.vertices[corners][None, :, :],
                            axis=2).min(axis=1)
        dist = np.minimum(dist, dc)
    return float(np.mean(dist <= radius))


def _level_checks(system, constraints, sol, density, dofmap):
    r = vi.residual_functional(system, sol.u)
    free = system.free_mask()
    con_mask = np.zeros(dofmap.ndof, dtype=bool)
    con_mask[2 * constraints.nodes] = True
    con_mask[2 * constraints.nodes + 1] = True
    plain = free & ~con_mask
    resid_scale = max(np.abs(system.F).max(), np.abs(system.K @ sol.u).max(), 1e-300)
    un = constraints.sign * sol.u[constraints.dofs]
    comp = density.normal * (constraints.gap - un)
    comp_scale = (1.0 + np.abs(density.normal).max()) * \
        (1.0 + np.abs(constraints.gap).max() + np.abs(un).max())
    return LevelChecks(
        lam_n_min=float(density.normal.min()),
        lam_n_max=float(np.abs(density.normal).max()),
        lam_t_max=float(np.abs(density.tangential).max()),
        resid_free_max=float(np.abs(r[plain]).max()),
        resid_scale=float(resid_scale),
        resid_normal_min=float((constraints.sign * r[constraints.dofs]).min()),
        resid_tangential_max=float(np.abs(r[constraints.tangential_dofs]).max()),
        comp_max=float(comp.max()),
        comp_scale=float(comp_scale),
        feas_violation=float((un - constraints.gap).max()),
    )


def run_level(problem, mesh, params):
    """Assemble, solve, and estimate on one mesh; no refinement."""
    dofmap = fem.DofMap(mesh)
    patches = msh.build_patches(mesh, dofmap)
    system = fem.assemble(mesh, dofmap, problem.material, problem)
    constraints = vi.contact_constraints(dofmap, problem)
    sol = vi.solve_vi(system, constraints, c=params.pdas_c,
                      max_iter=params.max_pdas_iter, collect_trace=True)
    trace_mesh = dens.build_trace_mesh(mesh, dofmap)
    density = dens.compute_density(system, sol.u, trace_mesh, constraints)
    report = est.estimate(mesh, dofmap, patches, problem.material, problem,
                          sol.u, trace_mesh, density, c0=params.c0)
    checks = _level_checks(system, constraints, sol, density, dofmap)
    return dofmap, system, constraints, sol, trace_mesh, density, report, checks


def adapt(problem, params, out_dir=None, write_trace=False):
    """Run the adaptive loop; returns the per-level trace and final state."""
    params.validate()
    out = Path(out_dir) if out_dir is not None else None
    csv_lines = [CSV_HEADER]
    pdas_lines = ["level,iteration,active_size,residual_norm"]
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        cfg = {"problem": problem.name, **asdict(params)}
        (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")

    mesh = problem.mesh(params.n0)
    records = []
    state = None
    for level in range(params.levels):
        tic = time.perf_counter()
        dofmap, system, constraints, sol, trace_mesh, density, report, checks = \
            run_level(problem, mesh, params)
        err = prb.measure_error(mesh, dofmap, sol.u, problem.exact) \
            if problem.exact is not None else float("nan")
        seconds = time.perf_counter() - tic
        ndof = dofmap.ndof - system.dirichlet_dofs.size
        rec = LevelRecord(
            level=level, ndof=ndof, h_min=report.h_min, l_h=report.l_h,
            eta=tuple(report.eta), eta6=report.eta6, eta7=report.eta7,
            psi=report.psi, eta_h=report.eta_h, err_inf=err,
            eff_index=report.eta_h / err if err == err and err > 0 else float("nan"),
            active_nodes=int(sol.active.sum()), seconds=seconds, checks=checks)
        if records and rec.ndof <= records[-1].ndof:
            raise RuntimeError("degrees of freedom did not increase between levels")
        records.append(rec)
        state = (mesh, dofmap, sol, report, density, trace_mesh)
        for row in sol.trace:
            pdas_lines.append(f"{level},{row[0]},{row[1]},{row[2]:.17g}")

        if level < params.levels - 1:
            if params.uniform:
                marked = np.arange(mesh.num_triangles)
            else:
                marked = mark(report.indicator, params.theta, mesh.diameters)
            rec.n_marked = marked.size
            rec.marked_near_fraction = _near_fraction(mesh, marked)
            next_mesh = msh.refine(mesh, marked)
        else:
            next_mesh = None

        csv_lines.append(rec.csv_row())
        if out is not None:
            _write_level_outputs(out, level, mesh, dofmap, sol, report, density,
                                 write_trace)
            (out / "convergence.csv").write_text("\n".join(csv_lines) + "\n")
            if write_trace:
                (out / "pdas_trace.csv").write_text("\n".join(pdas_lines) + "\n")
        if next_mesh is None:
            break
        mesh = next_mesh

    mesh, dofmap, sol, report, density, trace_mesh = state
    return AdaptiveResult(problem, params, records, mesh, dofmap, sol, report,
                          density, trace_mesh)


def _write_level_outputs(out, level, mesh, dofmap, sol, report, density, write_trace):
    nv = mesh.num_vertices
    disp = np.column_stack([sol.u[0:2 * nv:2], sol.u[1:2 * nv:2]])
    multiplier = np.zeros(nv)
    trace = density.trace
    vert_mask = trace.nodes < nv
    multiplier[trace.nodes[vert_mask]] = (density.normal * trace.weight)[vert_mask]
    msh.write_vtk(mesh, out / f"level_{level}.vtk",
                  point_data={"displacement": disp, "multiplier": multiplier},
                  cell_data={"indicator": report.indicator,
                             "level": mesh.levels.astype(float)})
    if write_trace:
        dens.write_density_csv(out / f"density_{level}.csv", mesh, dofmap, density)
