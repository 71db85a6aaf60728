"""Primal-dual active-set solver for the discrete unilateral contact problem.

The discrete inequality constrains the normal displacement at every contact
node p:  u_n(p) <= gap(p), with an axis-aligned normal n = sign * e_comp.
Given an active set A, the equality-constrained elastic problem is solved
with u_n(p) = gap(p) enforced for p in A; the nodal multiplier is recovered
from the constrained-row residual,

    m_p = L(phi_p n) - a(u_h, phi_p n) = sign * (F - K u)[2p + comp],

and the next active set is {p : m_p + c (u_n(p) - gap(p)) > 0}.  The
iteration stops when the active set repeats, which is the exact
complementarity point of the quadratic program.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContactConstraints:
    """Nodal non-penetration constraints sign*u[2p+comp] <= gap."""

    nodes: np.ndarray      # contact node ids (sorted)
    comp: int              # constrained displacement component (0 or 1)
    sign: float            # +1 or -1, so that u_n = sign * u[2p+comp]
    gap: np.ndarray        # interpolated gap value per node

    @property
    def dofs(self):
        return 2 * self.nodes + self.comp

    @property
    def tangential_dofs(self):
        return 2 * self.nodes + (1 - self.comp)

    @property
    def size(self):
        return self.nodes.size


def contact_constraints(dofmap, problem):
    """Constraints at the contact nodes of ``dofmap`` for a given problem."""
    nodes = dofmap.contact_nodes
    gap = problem.chi(dofmap.coords[nodes]) if nodes.size else np.zeros(0)
    return ContactConstraints(nodes, problem.normal_comp, problem.normal_sign,
                              np.asarray(gap, dtype=float))


@dataclass
class VISolution:
    u: np.ndarray
    active: np.ndarray          # bool per constrained node
    multipliers: np.ndarray     # m_p per constrained node, >= 0 at convergence
    iterations: int
    active_history: list = field(default_factory=list)
    trace: list = field(default_factory=list)   # (iteration, |A|, residual norm)
    degenerate: np.ndarray | None = None        # inactive nodes touching the gap

    @property
    def active_nodes(self):
        return np.flatnonzero(self.active)


def _solve_constrained(system, fixed_dofs, fixed_values):
    """Solve K u = F with the given dofs prescribed (symmetric elimination)."""
    ndof = system.ndof
    u = np.zeros(ndof)
    u[fixed_dofs] = fixed_values
    free = np.ones(ndof, dtype=bool)
    free[fixed_dofs] = False
    free_idx = np.flatnonzero(free)
    Kff = system.K[free_idx][:, free_idx]
    rhs = system.F[free_idx] - system.K[free_idx][:, fixed_dofs] @ u[fixed_dofs]
    try:
        u[free_idx] = spla.splu(Kff.tocsc()).solve(rhs)
    except RuntimeError as exc:
        raise SolverError(f"singular constrained system ({exc})") from exc
    return u, free_idx


def solve_linear(system):
    """Unconstrained (pure boundary-value) solve."""
    u, _ = _solve_constrained(system, system.dirichlet_dofs, system.dirichlet_values)
    return u


def residual_functional(system, u):
    """Algebraic residual r_a = L(phi_a) - a(u_h, phi_a) = (F - K u)_a."""
    return system.F - system.K @ u


def solve_vi(system, constraints, c=None, max_iter=100, collect_trace=False):
    """Primal-dual active-set iteration, starting from the empty active set.

    ``c`` is the complementarity weight; any positive value yields the same
    fixed point.  Defaults to the stress scale 2 mu + lam of the material.
    """
    if c is None:
        c = system.material.stress_scale
    if c <= 0:
        raise ValueError(f"active-set parameter c must be positive, got {c}")
    con_dofs = constraints.dofs
    sign = constraints.sign
    gap = constraints.gap
    finite_gap = np.isfinite(gap)

    active = np.zeros(constraints.size, dtype=bool)
    history = []
    trace = []
    for it in range(max_iter):
        fixed_dofs = np.concatenate([system.dirichlet_dofs, con_dofs[active]])
        fixed_vals = np.concatenate([system.dirichlet_values, sign * gap[active]])
        u, free_idx = _solve_constrained(system, fixed_dofs, fixed_vals)
        r = residual_functional(system, u)
        m = sign * r[con_dofs]
        un = sign * u[con_dofs]
        history.append(int(active.sum()))
        if collect_trace:
            free_res = np.abs(r[free_idx]).max() if free_idx.size else 0.0
            trace.append((it, int(active.sum()), float(free_res)))
        with np.errstate(invalid="ignore"):
            nxt = finite_gap & (m + c * (un - gap) > 0)
        if np.array_equal(nxt, active):
            scale = 1.0 + (np.abs(gap[finite_gap]).max() if finite_gap.any() else 0.0) \
                + (np.abs(un).max() if un.size else 0.0)
            degenerate = ~active & finite_gap & (np.abs(un - gap) <= 1e-10 * scale)
            return VISolution(u, active, m, it + 1, history, trace, degenerate)
        active = nxt
    raise SolverError(
        f"active set did not settle in {max_iter} iterations; history={history}")
