"""Per-edge grids and the monotone nodewise residual system.

Interior nodes carry the Lax-Friedrichs discretization of
lam*u - (a+eps)*u_xx + H(x, u_x); interior vertices carry the coupling
F(u_v, inward divided differences); boundary vertices carry either the
strong Dirichlet equation or the relaxed (state-constraint) form.

Every assembled system is certified monotone by finite-difference
perturbation probes: the residual at a node is nondecreasing in the node's
own value and nonincreasing in every other node's value.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import MonotonicityProbeFailed, NodeNotInterior, VertexNotBoundary, VertexNotInterior
from .network import BOUNDARY, INTERIOR, Network
from .problem import NetworkProblem

VERTEX_NODE = "vertex"
EDGE_NODE = "edge"


class Grid:
    """Uniform per-edge lattices with shared vertex nodes.

    Global node layout: one node per vertex (in network vertex order), then
    the strictly interior nodes of each edge in edge order.
    """

    def __init__(self, network: Network, nodes_per_edge: Union[int, dict]):
        self.network = network
        self.nodes_per_edge = {}
        for e in network.edges:
            n = nodes_per_edge[e.id] if isinstance(nodes_per_edge, dict) else nodes_per_edge
            if n < 3:
                raise ValueError(f"edge {e.id}: need at least 3 nodes, got {n}")
            self.nodes_per_edge[e.id] = int(n)

        self.vertex_index = {v.id: i for i, v in enumerate(network.vertices)}
        self.node_ids = {}
        self.coords = {}
        self.spacing = {}
        next_id = len(network.vertices)
        for e in network.edges:
            n = self.nodes_per_edge[e.id]
            ids = np.empty(n, dtype=int)
            ids[0] = self.vertex_index[e.tail]
            ids[-1] = self.vertex_index[e.head]
            ids[1:-1] = np.arange(next_id, next_id + n - 2)
            next_id += n - 2
            self.node_ids[e.id] = ids
            self.coords[e.id] = np.linspace(0.0, e.length, n)
            self.spacing[e.id] = e.length / (n - 1)
        self.total_nodes = next_id
        self.h = max(self.spacing.values())

        # reverse lookup: global id -> (edge id, local index) for edge nodes
        self._edge_node = {}
        for eid, ids in self.node_ids.items():
            for k in range(1, len(ids) - 1):
                self._edge_node[int(ids[k])] = (eid, k)

    def vertex_gid(self, vid: int) -> int:
        return self.vertex_index[vid]

    def node_kind(self, gid: int) -> str:
        return VERTEX_NODE if gid < len(self.network.vertices) else EDGE_NODE

    def node_location(self, gid: int):
        """(edge_id, t) of a global node; vertices use the canonical edge."""
        if self.node_kind(gid) == VERTEX_NODE:
            vid = self.network.vertices[gid].id
            p = self.network.vertex_point(vid)
            return p.edge_id, p.t
        eid, k = self._edge_node[gid]
        return eid, float(self.coords[eid][k])

    def edge_values(self, values: np.ndarray, eid: int) -> np.ndarray:
        return values[self.node_ids[eid]]

    def boundary_distances(self) -> np.ndarray:
        """Per-node geodesic distance to the nearest boundary vertex."""
        net = self.network
        bnd = [v.id for v in net.boundary_vertices]
        out = np.full(self.total_nodes, np.inf)
        for v in net.vertices:
            out[self.vertex_gid(v.id)] = min(net.vertex_distance(v.id, w) for w in bnd)
        for e in net.edges:
            t = self.coords[e.id][1:-1]
            via_tail = t + min(net.vertex_distance(e.tail, w) for w in bnd)
            via_head = (e.length - t) + min(net.vertex_distance(e.head, w) for w in bnd)
            out[self.node_ids[e.id][1:-1]] = np.minimum(via_tail, via_head)
        return out

    def interpolate(self, values: np.ndarray, eid: int, t) -> np.ndarray:
        """Linear interpolation of a node vector along one edge."""
        return np.interp(np.asarray(t, dtype=float), self.coords[eid],
                         values[self.node_ids[eid]])


class GridFunction:
    """Real values at every grid node; vertex values stored once."""

    def __init__(self, grid: Grid, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.total_nodes,):
            raise ValueError("value vector does not match grid")
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.total_nodes))

    @classmethod
    def full(cls, grid: Grid, value: float) -> "GridFunction":
        return cls(grid, np.full(grid.total_nodes, float(value)))

    @classmethod
    def from_profile(cls, grid: Grid, fn) -> "GridFunction":
        """fn(edge_id, t_array) -> values; vertex values taken from the
        lowest incident edge id."""
        vals = np.full(grid.total_nodes, np.nan)
        for e in grid.network.edges:
            ids = grid.node_ids[e.id]
            ev = np.asarray(fn(e.id, grid.coords[e.id]), dtype=float)
            vals[ids[1:-1]] = ev[1:-1]
            for pos, gid in ((0, ids[0]), (-1, ids[-1])):
                if np.isnan(vals[gid]):
                    vals[gid] = ev[pos]
        return cls(grid, vals)

    def is_valid(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def on_edge(self, eid: int) -> np.ndarray:
        return self.grid.edge_values(self.values, eid)

    def copy(self) -> "GridFunction":
        return GridFunction(self.grid, self.values.copy())


def lax_friedrichs(ham, x, p_minus, p_plus, theta):
    """Monotone numerical Hamiltonian for any theta >= Lip_p(H)."""
    return ham(x, 0.5 * (p_minus + p_plus)) - 0.5 * theta * (p_plus - p_minus)


@dataclass
class _EdgeStencil:
    eid: int
    ids: np.ndarray
    x: np.ndarray
    h: float
    a_plus_eps: np.ndarray  # at interior nodes
    theta: float
    ham: object


@dataclass
class _VertexStencil:
    vid: int
    gid: int
    kind: str
    # per incident edge, in coupling component order:
    nbr_gids: np.ndarray
    hs: np.ndarray
    signs: np.ndarray  # +1 when the vertex sits at t = 0
    x_at_v: np.ndarray
    a_plus_eps: np.ndarray
    thetas: np.ndarray
    hams: tuple
    correct_2nd: np.ndarray  # ghost-corrected inward slope per edge
    degenerate: np.ndarray
    coupling: object = None  # interior: KirchhoffCondition
    h_dirichlet: float = 0.0  # boundary: Dirichlet datum
    boundary_mode: str = "strong"


class ResidualSystem:
    """Assembled monotone discrete operator; immutable after assembly."""

    def __init__(self, problem: NetworkProblem, grid: Grid, eps: float,
                 junction_mode: str, boundary_modes: dict, thetas: dict):
        self.problem = problem
        self.grid = grid
        self.eps = float(eps)
        self.junction_mode = junction_mode
        self.thetas = thetas
        lam = problem.lam

        self._edges = []
        for e in problem.network.edges:
            x = grid.coords[e.id]
            a = np.asarray(problem.diffusions[e.id].a(x[1:-1]), dtype=float)
            self._edges.append(_EdgeStencil(
                e.id, grid.node_ids[e.id], x, grid.spacing[e.id],
                a + self.eps, thetas[e.id], problem.hamiltonians[e.id],
            ))

        self._vertices = []
        for v in problem.network.vertices:
            incs = problem.network.incidence[v.id]
            nbr, hs, signs, xv, av, th, cors, degs = [], [], [], [], [], [], [], []
            hams = []
            for inc in incs:
                eid = inc.edge.id
                ids = grid.node_ids[eid]
                nbr.append(int(ids[1] if inc.at_tail else ids[-2]))
                h_e = grid.spacing[eid]
                hs.append(h_e)
                signs.append(1.0 if inc.at_tail else -1.0)
                xv.append(inc.vertex_param)
                a_v = problem.a_at_vertex(v.id, eid) + self.eps
                av.append(a_v)
                theta = thetas[eid]
                th.append(theta)
                hams.append(problem.hamiltonians[eid])
                degs.append(a_v == 0.0)
                # second-order ghost correction only where it keeps the
                # stencil monotone: a + eps must dominate theta*h/2
                cors.append(a_v > 0.0 and a_v >= 0.5 * theta * h_e)
            st = _VertexStencil(
                v.id, grid.vertex_gid(v.id), v.kind,
                np.array(nbr), np.array(hs), np.array(signs), np.array(xv),
                np.array(av), np.array(th), tuple(hams),
                np.array(cors, dtype=bool), np.array(degs, dtype=bool),
            )
            if v.kind == INTERIOR:
                st.coupling = problem.kirchhoff[v.id]
            else:
                st.h_dirichlet = problem.dirichlet[v.id]
                st.boundary_mode = boundary_modes[v.id]
            self._vertices.append(st)
        self._vertex_by_gid = {st.gid: st for st in self._vertices}

        # dependency structure (symmetric for this stencil family)
        neigh = [set() for _ in range(grid.total_nodes)]
        for es in self._edges:
            ids = es.ids
            for k in range(1, len(ids) - 1):
                neigh[ids[k]].update((int(ids[k - 1]), int(ids[k + 1])))
        for st in self._vertices:
            neigh[st.gid].update(int(g) for g in st.nbr_gids)
        self._neighbors = [tuple(sorted(s)) for s in neigh]

    # -- residual evaluation ------------------------------------------------

    def inward_slopes(self, st: _VertexStencil, u: np.ndarray) -> np.ndarray:
        """Discrete inward derivatives at a vertex, ghost-corrected on
        uniformly elliptic edges."""
        lam = self.problem.lam
        uv = u[st.gid]
        d = (u[st.nbr_gids] - uv) / st.hs
        if st.correct_2nd.any():
            for i in np.nonzero(st.correct_2nd)[0]:
                hval = float(st.hams[i](st.x_at_v[i], st.signs[i] * d[i]))
                d[i] -= 0.5 * st.hs[i] * (lam * uv + hval) / st.a_plus_eps[i]
        return d

    def _state_constraint_value(self, st: _VertexStencil, i: int, d_i: float) -> float:
        """min over admissible one-sided slopes s <= d_i of H(x_v, oriented s)."""
        ham = st.hams[i]
        if st.signs[i] > 0:
            return float(ham.min_below(st.x_at_v[i], d_i))
        return float(ham.min_above(st.x_at_v[i], -d_i))

    def junction_residual(self, u: np.ndarray, vid: int) -> float:
        st = self._vertex_by_gid[self.grid.vertex_gid(vid)]
        if st.kind != INTERIOR:
            raise VertexNotInterior(f"vertex {vid} is not interior")
        return self._vertex_residual(st, u)

    def boundary_residual(self, u: np.ndarray, vid: int) -> float:
        st = self._vertex_by_gid[self.grid.vertex_gid(vid)]
        if st.kind != BOUNDARY:
            raise VertexNotBoundary(f"vertex {vid} is not boundary")
        return self._vertex_residual(st, u)

    def _vertex_residual(self, st: _VertexStencil, u: np.ndarray) -> float:
        lam = self.problem.lam
        uv = float(u[st.gid])
        d = self.inward_slopes(st, u)
        if st.kind == INTERIOR:
            res = st.coupling(uv, d)
            if self.junction_mode == "minmax":
                for i in np.nonzero(st.degenerate)[0]:
                    res = max(res, lam * uv + self._state_constraint_value(st, int(i), float(d[i])))
            return float(res)
        if st.boundary_mode == "strong":
            return uv - st.h_dirichlet
        eq = lam * uv + self._state_constraint_value(st, 0, float(d[0]))
        return float(max(uv - st.h_dirichlet, eq))

    def interior_residual(self, u: np.ndarray, gid: int) -> float:
        if self.grid.node_kind(gid) != EDGE_NODE:
            raise NodeNotInterior(f"node {gid} is a vertex node")
        eid, k = self.grid._edge_node[gid]
        es = next(s for s in self._edges if s.eid == eid)
        lam = self.problem.lam
        um, uc, up = u[es.ids[k - 1]], u[gid], u[es.ids[k + 1]]
        pm = (uc - um) / es.h
        pp = (up - uc) / es.h
        second = (up - 2.0 * uc + um) / es.h ** 2
        hh = lax_friedrichs(es.ham, es.x[k], pm, pp, es.theta)
        return float(lam * uc - es.a_plus_eps[k - 1] * second + hh)

    def residual_node(self, gid: int, u: np.ndarray) -> float:
        st = self._vertex_by_gid.get(gid)
        if st is not None:
            return self._vertex_residual(st, u)
        return self.interior_residual(u, gid)

    def residual(self, u) -> np.ndarray:
        """Full residual vector; vectorized along edges."""
        if isinstance(u, GridFunction):
            u = u.values
        lam = self.problem.lam
        out = np.empty(self.grid.total_nodes)
        for es in self._edges:
            ue = u[es.ids]
            pm = (ue[1:-1] - ue[:-2]) / es.h
            pp = (ue[2:] - ue[1:-1]) / es.h
            second = (ue[2:] - 2.0 * ue[1:-1] + ue[:-2]) / es.h ** 2
            hh = lax_friedrichs(es.ham, es.x[1:-1], pm, pp, es.theta)
            out[es.ids[1:-1]] = lam * ue[1:-1] - es.a_plus_eps * second + hh
        for st in self._vertices:
            out[st.gid] = self._vertex_residual(st, u)
        return out

    def residual_norm(self, u) -> float:
        return float(np.max(np.abs(self.residual(u))))

    # -- structure ----------------------------------------------------------

    def neighbors(self, gid: int):
        return self._neighbors[gid]

    def dependents(self, gid: int):
        """Nodes whose residual depends on u[gid] (incl. gid itself)."""
        return (gid,) + self._neighbors[gid]

    def node_classification(self, gid: int) -> str:
        st = self._vertex_by_gid.get(gid)
        if st is None:
            return "interior"
        if st.kind == INTERIOR:
            return "junction"
        return f"boundary-{st.boundary_mode}"

    def certify_monotone(self, n_samples: int = 3, step: float = 1e-6,
                         tol: float = 1e-9, rng=None, scale: float = 2.0):
        """Perturbation probe of the monotone-scheme property.

        Returns None when no witness is found, else a dict describing the
        violating (sample, node, direction).
        """
        rng = np.random.default_rng(0) if rng is None else rng
        n = self.grid.total_nodes
        for s in range(n_samples):
            u = rng.uniform(-scale, scale, size=n)
            for j in range(n):
                base = {i: self.residual_node(i, u) for i in self.dependents(j)}
                u[j] += step
                for i, r0 in base.items():
                    r1 = self.residual_node(i, u)
                    if i == j and r1 - r0 < -tol:
                        return {"sample": s, "node": j, "row": i,
                                "direction": "own", "delta": r1 - r0}
                    if i != j and r1 - r0 > tol:
                        return {"sample": s, "node": j, "row": i,
                                "direction": "cross", "delta": r1 - r0}
                u[j] -= step
        return None

    def own_slope(self, gid: int, u: np.ndarray, step: float = 1e-6) -> float:
        r0 = self.residual_node(gid, u)
        u2 = u.copy()
        u2[gid] += step
        return (self.residual_node(gid, u2) - r0) / step


def resolve_theta(problem: NetworkProblem, theta) -> dict:
    if theta == "auto" or theta is None:
        return {e.id: float(problem.hamiltonians[e.id].lipschitz_p)
                for e in problem.network.edges}
    if isinstance(theta, dict):
        return {int(k): float(v) for k, v in theta.items()}
    return {e.id: float(theta) for e in problem.network.edges}


def resolve_boundary_modes(problem: NetworkProblem, mode, eps: float) -> dict:
    out = {}
    for v in problem.network.boundary_vertices:
        if isinstance(mode, dict):
            m = mode.get(v.id, "auto")
        else:
            m = mode
        if m == "auto":
            eid = problem.network.incidence[v.id][0].edge.id
            if problem.a_at_vertex(v.id, eid) + eps > 0.0:
                m = "strong"
            elif problem.hamiltonians[eid].coercive:
                m = "relaxed"
            else:
                m = "strong"
        if m not in ("strong", "relaxed"):
            raise ValueError(f"unknown boundary mode {m!r}")
        out[v.id] = m
    return out


def assemble(problem: NetworkProblem, grid: Grid, eps: float = 0.0,
             junction_mode: str = "kirchhoff", boundary_mode="auto",
             theta="auto", probe_samples: int = 3, rng=None) -> ResidualSystem:
    """Build the residual system and certify the monotone-scheme property.

    Raises MonotonicityProbeFailed with the witness node when certification
    fails; pass probe_samples=0 to skip (used by deliberate counterexample
    tests).
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if junction_mode not in ("kirchhoff", "minmax"):
        raise ValueError(f"unknown junction mode {junction_mode!r}")
    thetas = resolve_theta(problem, theta)
    modes = resolve_boundary_modes(problem, boundary_mode, eps)
    system = ResidualSystem(problem, grid, eps, junction_mode, modes, thetas)
    if probe_samples > 0:
        witness = system.certify_monotone(n_samples=probe_samples, rng=rng)
        if witness is not None:
            raise MonotonicityProbeFailed(
                f"monotone-scheme probe failed: {witness}",
                node=witness["node"], direction=witness["direction"],
            )
    return system
