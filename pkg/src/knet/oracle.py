"""Independent reference solutions for verification.

The direct linear solver assembles the linear problems (affine edge
Hamiltonians, classical or affine vertex couplings, strong Dirichlet data)
with plain central differences and one-sided three-point vertex slopes.  It
shares no code path with the monotone residual systems, so agreement
between the two is meaningful evidence.

Nonlinear problems are verified against fine-grid references of the main
scheme and against observed convergence orders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from .discretization import Grid, GridFunction
from .errors import NonPositiveError, ProblemNotLinear, SingularSystem
from .network import INTERIOR
from .problem import NetworkProblem


@dataclass
class ReferenceSolution:
    u: GridFunction
    method: str
    meta: dict

    @property
    def grid(self) -> Grid:
        return self.u.grid


def _affine_data(problem: NetworkProblem, eid: int):
    ham = problem.hamiltonians[eid]
    affine = getattr(ham, "affine", None)
    if affine is None:
        raise ProblemNotLinear(f"edge {eid}: Hamiltonian is not affine in p")
    return affine  # (b, f_fn)


def direct_linear_solve(problem: NetworkProblem, nodes_per_edge,
                        eps: float = 0.0) -> ReferenceSolution:
    """Sparse direct solve of a linear network problem.

    Interior nodes use central second and first differences; vertex slopes
    use the second-order one-sided three-point formula, which needs at
    least four nodes per edge.
    """
    net = problem.network
    for v in net.interior_vertices:
        if problem.kirchhoff[v.id].family not in ("classical", "affine"):
            raise ProblemNotLinear(
                f"vertex {v.id}: coupling family "
                f"{problem.kirchhoff[v.id].family!r} is not linear"
            )
    grid = Grid(net, nodes_per_edge)
    for eid, n in grid.nodes_per_edge.items():
        if n < 4:
            raise ValueError(f"edge {eid}: one-sided slopes need >= 4 nodes")

    lam = problem.lam
    n_tot = grid.total_nodes
    rows, cols, vals = [], [], []
    rhs = np.zeros(n_tot)

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    for e in net.edges:
        b, f_fn = _affine_data(problem, e.id)
        ids = grid.node_ids[e.id]
        x = grid.coords[e.id]
        h = grid.spacing[e.id]
        a = np.asarray(problem.diffusions[e.id].a(x[1:-1]), dtype=float) + eps
        for k in range(1, len(ids) - 1):
            i = int(ids[k])
            c = a[k - 1] / h ** 2
            add(i, i, lam + 2.0 * c)
            add(i, int(ids[k - 1]), -c - b / (2.0 * h))
            add(i, int(ids[k + 1]), -c + b / (2.0 * h))
            rhs[i] = -float(np.asarray(f_fn(x[k])))

    for v in net.boundary_vertices:
        i = grid.vertex_gid(v.id)
        add(i, i, 1.0)
        rhs[i] = problem.dirichlet[v.id]

    for v in net.interior_vertices:
        cond = problem.kirchhoff[v.id]
        i = grid.vertex_gid(v.id)
        alpha0 = cond.params.get("alpha0", 0.0)
        alphas = cond.params.get("alphas", [1.0] * cond.arity)
        add(i, i, alpha0)
        for comp, inc in enumerate(net.incidence[v.id]):
            ids = grid.node_ids[inc.edge.id]
            h = grid.spacing[inc.edge.id]
            n1, n2 = (ids[1], ids[2]) if inc.at_tail else (ids[-2], ids[-3])
            al = float(alphas[comp])
            # -alpha * inward slope, slope = (-3u_v + 4u_1 - u_2)/(2h)
            add(i, i, al * 3.0 / (2.0 * h))
            add(i, int(n1), -al * 4.0 / (2.0 * h))
            add(i, int(n2), al * 1.0 / (2.0 * h))
        rhs[i] = cond.params.get("B", 0.0)

    mat = coo_matrix((vals, (rows, cols)), shape=(n_tot, n_tot)).tocsc()
    with np.errstate(all="ignore"):
        try:
            u = spsolve(mat, rhs)
        except RuntimeError as exc:
            raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(u)):
        raise SingularSystem("direct solve returned non-finite values")
    return ReferenceSolution(GridFunction(grid, u), "direct-linear",
                             {"eps": eps})


def fine_grid_reference(problem: NetworkProblem, nodes_per_edge,
                        refine: int = 4, **solve_kwargs) -> ReferenceSolution:
    """Reference from the main monotone scheme on a refine-times finer grid."""
    from .solver import solve_problem

    if isinstance(nodes_per_edge, dict):
        fine = {k: (n - 1) * refine + 1 for k, n in nodes_per_edge.items()}
    else:
        fine = (int(nodes_per_edge) - 1) * refine + 1
    res = solve_problem(problem, fine, **solve_kwargs)
    return ReferenceSolution(res.u, "fine-grid",
                             {"refine": refine, "converged": res.converged,
                              "residual_norm": res.residual_norm})


def sup_error(candidate: GridFunction, reference: GridFunction) -> float:
    """Max nodal difference, interpolating the reference along each edge."""
    out = 0.0
    for e in candidate.grid.network.edges:
        vals = reference.grid.interpolate(reference.values, e.id,
                                          candidate.grid.coords[e.id])
        out = max(out, float(np.max(np.abs(candidate.on_edge(e.id) - vals))))
    return out


def richardson_order(errors, ratio: float = 2.0) -> float:
    """Observed order from errors on successively refined grids."""
    errors = [float(e) for e in errors]
    if len(errors) < 2:
        raise ValueError("need at least two errors")
    if any(e <= 0 for e in errors):
        raise NonPositiveError("errors must be positive for order estimation")
    rates = [math.log(errors[i] / errors[i + 1]) / math.log(ratio)
             for i in range(len(errors) - 1)]
    return float(np.mean(rates))


def self_convergence_order(coarse: GridFunction, mid: GridFunction,
                           fine: GridFunction, ratio: float = 2.0) -> float:
    """Order estimate without an exact solution, from three nested grids."""
    e1 = sup_error(coarse, mid)
    e2 = sup_error(mid, fine)
    return richardson_order([e1, e2], ratio)
