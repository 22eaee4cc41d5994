"""Grids, grid functions, and the monotone residual systems."""

import numpy as np
import pytest

from knet.catalog import entry_by_name
from knet.discretization import (
    Grid,
    GridFunction,
    assemble,
    lax_friedrichs,
    resolve_boundary_modes,
    resolve_theta,
)
from knet.errors import MonotonicityProbeFailed, NodeNotInterior
from knet.network import star_junction
from knet.oracle import richardson_order
from knet.problem import (
    NetworkProblem,
    advection,
    constant_diffusion,
    eikonal,
    make_kirchhoff,
)


# ---------------------------------------------------------------------------
# Grid layout


def test_grid_layout_star():
    net = star_junction(3)
    grid = Grid(net, 5)
    assert grid.total_nodes == 4 + 3 * 3
    for eid in range(3):
        ids = grid.node_ids[eid]
        assert ids[0] == grid.vertex_gid(0)  # junction at the tail
        assert ids[-1] == grid.vertex_gid(eid + 1)
        assert grid.spacing[eid] == pytest.approx(0.25)
    assert grid.h == pytest.approx(0.25)
    assert grid.node_kind(0) == "vertex"
    assert grid.node_kind(4) == "edge"


def test_grid_mixed_resolution():
    net = star_junction(2)
    grid = Grid(net, {0: 5, 1: 9})
    assert grid.spacing[0] == pytest.approx(0.25)
    assert grid.spacing[1] == pytest.approx(0.125)
    assert grid.h == pytest.approx(0.25)


def test_grid_rejects_too_few_nodes():
    with pytest.raises(ValueError):
        Grid(star_junction(2), 2)


def test_boundary_distances():
    net = star_junction(3)
    grid = Grid(net, 5)
    dist = grid.boundary_distances()
    assert dist[grid.vertex_gid(0)] == pytest.approx(1.0)
    assert dist[grid.vertex_gid(1)] == pytest.approx(0.0)
    # node at t = 0.25 on edge 0: nearer the boundary via its own head
    gid = grid.node_ids[0][1]
    assert dist[gid] == pytest.approx(0.75)


def test_gridfunction_from_profile_canonical_vertex():
    """Vertex values come from the lowest incident edge id when the
    profile disagrees across edges."""
    net = star_junction(3)
    grid = Grid(net, 5)
    u = GridFunction.from_profile(grid, lambda eid, t: eid + 0.0 * np.asarray(t))
    assert u.values[grid.vertex_gid(0)] == 0.0
    assert u.is_valid()


def test_gridfunction_shape_check_and_copy():
    grid = Grid(star_junction(2), 5)
    with pytest.raises(ValueError):
        GridFunction(grid, np.zeros(3))
    u = GridFunction.full(grid, 2.0)
    v = u.copy()
    v.values[0] = -1.0
    assert u.values[0] == 2.0
    np.testing.assert_allclose(u.on_edge(0), 2.0)


def test_interpolate():
    grid = Grid(star_junction(2), 11)
    u = GridFunction.from_profile(grid, lambda eid, t: 2.0 * np.asarray(t))
    assert grid.interpolate(u.values, 0, 0.35) == pytest.approx(0.7)


# ---------------------------------------------------------------------------
# Numerical Hamiltonian


def test_lax_friedrichs_direct():
    H = eikonal(1.0, 0.0)
    # H((p- + p+)/2) - theta/2 (p+ - p-) at a kink straddle
    assert lax_friedrichs(H, 0.0, 1.0, -1.0, 1.0) == pytest.approx(1.0)
    assert lax_friedrichs(H, 0.0, 0.5, 0.5, 1.0) == pytest.approx(0.5)
    # theta = 0 reduces to the centered evaluation
    assert lax_friedrichs(H, 0.0, 1.0, -1.0, 0.0) == pytest.approx(0.0)


def test_constant_compatibility_residual_zero(catalog, system_cached):
    """When the constant solves the continuous problem it solves the
    discrete one exactly, at every resolution."""
    for name in ("star3_constant", "graph5_constant"):
        for n in (5, 21):
            system = system_cached(name, n)
            ones = GridFunction.full(system.grid, 1.0)
            assert system.residual_norm(ones) <= 1e-12, (name, n)


def test_interior_residual_linear_profile(system_cached):
    """On a degenerate edge a linear profile p*t has residual
    lam*u + |p| - 1 at every interior node (no dissipation error)."""
    system = system_cached("star3_constant", 11)
    grid = system.grid
    u = GridFunction.from_profile(grid, lambda eid, t: 0.7 * np.asarray(t))
    gid = grid.node_ids[0][5]
    expect = 1.0 * u.values[gid] + 0.7 - 1.0
    assert system.interior_residual(u.values, gid) == pytest.approx(expect)
    with pytest.raises(NodeNotInterior):
        system.interior_residual(u.values, grid.vertex_gid(0))


def test_junction_residual_direct(system_cached):
    """Inward slopes of 1 on all three degenerate edges against the
    classical coupling give F = -3."""
    system = system_cached("star3_constant", 11)
    grid = system.grid
    u = np.zeros(grid.total_nodes)
    for eid in range(3):
        u[grid.node_ids[eid][1]] = 0.1  # h = 0.1, so slope 1 inward
    assert system.junction_residual(u, 0) == pytest.approx(-3.0)


def test_epsilon_adds_uniform_diffusion(catalog):
    entry = entry_by_name("star3_constant")
    grid = Grid(entry.problem.network, 11)
    s0 = assemble(entry.problem, grid, eps=0.0)
    s5 = assemble(entry.problem, grid, eps=0.5)
    u = GridFunction.from_profile(grid, lambda eid, t: np.asarray(t) ** 2)
    gid = grid.node_ids[0][5]
    r0 = s0.interior_residual(u.values, gid)
    r5 = s5.interior_residual(u.values, gid)
    # second difference of t^2 is exactly 2
    assert r0 - r5 == pytest.approx(0.5 * 2.0, abs=1e-10)


def test_interior_consistency_order():
    """Interior residual against the continuum operator on a smooth
    profile: first order with dissipation, second order without."""
    net = star_junction(2)
    # non-polynomial profile so the second difference is not exact
    phi = lambda t: np.exp(0.5 * np.asarray(t))
    dphi = lambda t: 0.5 * np.exp(0.5 * t)  # positive on [0, 1]
    d2phi = lambda t: 0.25 * np.exp(0.5 * t)

    cases = [
        # (hamiltonian, a, H(x, p) as float fn, expected minimal order)
        (eikonal(1.0, 1.0), 0.0, lambda x, p: abs(p) - 1.0, 0.9),
        (advection(0.0, -1.0), 1.0, lambda x, p: -1.0, 1.9),
    ]
    for ham, a, h_exact, min_order in cases:
        problem = NetworkProblem(
            net, 1.0,
            {e.id: ham for e in net.edges},
            {e.id: constant_diffusion(a) for e in net.edges},
            {0: make_kirchhoff("classical", 2)},
            {1: phi(1.0), 2: phi(1.0)},
        )
        errs = []
        for n in (21, 41, 81):
            grid = Grid(net, n)
            system = assemble(problem, grid, probe_samples=0)
            u = GridFunction.from_profile(grid, lambda eid, t: phi(np.asarray(t)))
            worst = 0.0
            for k in range(1, n - 1):
                gid = grid.node_ids[0][k]
                t = grid.coords[0][k]
                exact = phi(t) - a * d2phi(t) + h_exact(t, dphi(t))
                worst = max(worst, abs(system.interior_residual(u.values, gid) - exact))
            errs.append(worst)
        assert richardson_order(errs) >= min_order, (ham.name, errs)


# ---------------------------------------------------------------------------
# Monotonicity certification


def test_probe_passes_with_matching_dissipation(system_cached):
    system = system_cached("star3_eikonal", 11)
    assert system.certify_monotone(n_samples=5) is None


def test_probe_fails_with_insufficient_dissipation():
    """theta below the p-Lipschitz constant of |p| breaks monotonicity and
    the assembly probe must catch it with a witness."""
    entry = entry_by_name("star3_eikonal")
    grid = Grid(entry.problem.network, 21)
    with pytest.raises(MonotonicityProbeFailed) as exc:
        assemble(entry.problem, grid, theta=0.5, probe_samples=10)
    assert exc.value.node is not None
    assert exc.value.direction in ("own", "cross")


def test_properness_own_slope(system_cached):
    """The residual is strictly increasing in the node's own value, with
    slope at least lam at interior nodes."""
    system = system_cached("star3_mixed", 11)
    rng = np.random.default_rng(3)
    u = rng.uniform(-1.0, 1.0, system.grid.total_nodes)
    lam = system.problem.lam
    for gid in range(system.grid.total_nodes):
        slope = system.own_slope(gid, u)
        assert slope > 0.0, gid
        if system.node_classification(gid) == "interior":
            assert slope >= lam - 1e-6


def test_affine_junction_own_slope(system_cached):
    """The coupling residual gains at least sum(alpha_i)/h per unit of the
    vertex value through the inward divided differences."""
    system = system_cached("star3_linear", 21)
    grid = system.grid
    cond = system.problem.kirchhoff[0]
    u = GridFunction.zeros(grid).values
    slope = system.own_slope(grid.vertex_gid(0), u)
    assert slope >= sum(cond.params["alphas"]) / grid.h - 1e-6


def test_node_classification_and_dependents(system_cached):
    system = system_cached("star3_eikonal", 11)
    grid = system.grid
    assert system.node_classification(grid.vertex_gid(0)) == "junction"
    assert system.node_classification(grid.vertex_gid(1)) == "boundary-relaxed"
    assert system.node_classification(grid.node_ids[0][3]) == "interior"
    # dependency structure is symmetric for this stencil family
    for gid in range(grid.total_nodes):
        for nbr in system.neighbors(gid):
            assert gid in system.neighbors(nbr)
    assert grid.vertex_gid(0) in system.dependents(grid.node_ids[0][1])


def test_resolve_boundary_modes():
    degen = entry_by_name("star3_eikonal").problem
    elliptic = entry_by_name("star2_linear").problem
    assert set(resolve_boundary_modes(degen, "auto", 0.0).values()) == {"relaxed"}
    assert set(resolve_boundary_modes(degen, "auto", 0.1).values()) == {"strong"}
    assert set(resolve_boundary_modes(elliptic, "auto", 0.0).values()) == {"strong"}
    assert set(resolve_boundary_modes(degen, "strong", 0.0).values()) == {"strong"}
    with pytest.raises(ValueError):
        resolve_boundary_modes(degen, "bogus", 0.0)


def test_resolve_theta():
    problem = entry_by_name("star3_mixed").problem
    auto = resolve_theta(problem, "auto")
    assert auto[0] == pytest.approx(1.0)  # eikonal edge
    assert auto[1] == pytest.approx(0.0)  # drift-free linear edge
    assert resolve_theta(problem, 2.0)[2] == pytest.approx(2.0)
    assert resolve_theta(problem, {0: 1.5, 1: 0.0, 2: 0.0})[0] == pytest.approx(1.5)


def test_assemble_rejects_bad_arguments():
    entry = entry_by_name("star3_constant")
    grid = Grid(entry.problem.network, 5)
    with pytest.raises(ValueError):
        assemble(entry.problem, grid, eps=-0.1)
    with pytest.raises(ValueError):
        assemble(entry.problem, grid, junction_mode="bogus")
