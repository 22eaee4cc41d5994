"""Nonlinear solvers: nodewise sweeps, semismooth Newton, barriers, and
the vanishing-viscosity continuation."""

import numpy as np
import pytest

from knet.catalog import all_entries, entry_by_name
from knet.discretization import Grid, GridFunction, assemble
from knet.solver import (
    SolveConfig,
    build_barriers,
    multistart_solve,
    newton_solve,
    solve_node,
    solve_system,
    sweep_solve,
    vanishing_viscosity,
)


def _certified_sub(system, u, slack):
    return bool(np.all(system.residual(u) <= slack))


def _certified_super(system, u, slack):
    return bool(np.all(system.residual(u) >= -slack))


def test_barriers_certified_and_bracketing(system_cached, solve_cached):
    system = system_cached("star3_eikonal", 21)
    bars = build_barriers(system)
    slack = 1e-8 * max(1.0, bars.offset)
    assert _certified_super(system, bars.upper.values, slack)
    assert _certified_sub(system, bars.lower.values, slack)
    u = solve_cached("star3_eikonal", 21).u.values
    assert np.all(bars.lower.values - 1e-9 <= u)
    assert np.all(u <= bars.upper.values + 1e-9)


def test_discrete_comparison_on_shifted_pairs(system_cached, solve_cached):
    """Constant shifts of a solution stay certified sub/supersolutions by
    properness, and every certified pair is ordered."""
    for name in ("star3_eikonal", "star3_mixed", "graph5_constant"):
        system = system_cached(name, 21)
        res = solve_cached(name, 21)
        assert res.converged
        u = res.u.values
        scale = max(1.0, float(np.max(np.abs(u))))
        subs, supers = [], []
        for c in (0.25, 1.0, 4.0):
            subs.append(u - c)
            supers.append(u + c)
        bars = build_barriers(system)
        subs.append(bars.lower.values)
        supers.append(bars.upper.values)
        slack = 1e-8 * max(scale, bars.offset)
        for s in subs:
            assert _certified_sub(system, s, slack), name
        for s in supers:
            assert _certified_super(system, s, slack), name
        for s in subs:
            for t in supers:
                assert np.all(s <= t + 1e-12), name


def test_solve_node_finds_local_root(system_cached):
    system = system_cached("star3_eikonal", 11)
    rng = np.random.default_rng(1)
    u = rng.uniform(-0.5, 0.5, system.grid.total_nodes)
    for gid in (0, 5, system.grid.total_nodes - 1):
        solve_node(system, gid, u)
        assert abs(system.residual_node(gid, u)) <= 1e-12


def test_sweep_stays_inside_barriers(system_cached):
    """Monotone nodewise updates started inside a certified bracket never
    leave it."""
    system = system_cached("star3_eikonal", 11)
    bars = build_barriers(system)
    mid = GridFunction(system.grid,
                       0.5 * (bars.lower.values + bars.upper.values))
    cfg = SolveConfig(method="sweep", max_sweeps=4)
    res = sweep_solve(system, cfg, mid)
    assert np.all(res.u.values >= bars.lower.values - 1e-9)
    assert np.all(res.u.values <= bars.upper.values + 1e-9)


def test_newton_fast_on_linear_problem(system_cached):
    system = system_cached("star3_linear", 41)
    res = newton_solve(system, SolveConfig(method="newton"))
    assert res.converged
    assert res.iterations <= 5
    assert res.bracket_violations == 0


def test_methods_agree(system_cached):
    # n = 11 keeps plain Gauss-Seidel fast enough on the elliptic edges
    system = system_cached("star3_mixed", 11)
    results = {}
    for method in ("sweep", "newton", "hybrid"):
        r = solve_system(system, SolveConfig(method=method))
        assert r.converged, method
        assert r.method == method
        results[method] = r.u.values
    for method in ("newton", "hybrid"):
        assert np.max(np.abs(results[method] - results["sweep"])) <= 1e-8


def test_junction_modes_agree_at_solution(catalog):
    """The minmax junction form and the coupling-equation form coincide on
    the catalog (the envelope clauses are inactive at F = 0)."""
    entry = entry_by_name("star3_eikonal")
    grid = Grid(entry.problem.network, 41)
    u_k = solve_system(assemble(entry.problem, grid)).u.values
    u_m = solve_system(assemble(entry.problem, grid, junction_mode="minmax")).u.values
    assert np.max(np.abs(u_k - u_m)) <= 1e-8


def test_multistart_unique_root(system_cached):
    system = system_cached("star3_mixed", 21)
    runs = multistart_solve(system)
    assert all(r.converged for r in runs)
    stack = np.stack([r.u.values for r in runs])
    assert float(np.max(stack.max(axis=0) - stack.min(axis=0))) <= 1e-9


def test_unknown_method_rejected(system_cached):
    with pytest.raises(ValueError):
        solve_system(system_cached("star3_constant", 5),
                     SolveConfig(method="bogus"))


def test_vanishing_viscosity_structure():
    entry = entry_by_name("star3_eikonal")
    schedule = [0.5 ** k for k in range(4)]
    sweep = vanishing_viscosity(entry.problem, 11, schedule)
    assert sweep.base.converged and sweep.base.eps == 0.0
    eps_seen = [s.eps for s in sweep.steps]
    assert eps_seen == sorted(eps_seen, reverse=True)
    assert len(sweep.deltas) == 3
    for s in sweep.steps:
        assert s.result.converged
        assert set(s.sup_diff_interior) == set(sweep.deltas)
        assert s.sup_diff_full >= max(s.sup_diff_interior.values()) - 1e-15
    # Cauchy differences recorded from the second step on
    assert not sweep.steps[0].cauchy_interior
    for s in sweep.steps[1:]:
        assert set(s.cauchy_interior) == set(sweep.deltas)
    rows = sweep.table()
    assert len(rows) == len(schedule)
    assert all("eps" in row and "sup_full" in row for row in rows)


def test_warm_start_reuses_profile(system_cached, solve_cached):
    """Restarting from the converged profile finishes immediately."""
    system = system_cached("star3_eikonal", 21)
    res = solve_cached("star3_eikonal", 21)
    again = solve_system(system, SolveConfig(), res.u)
    assert again.converged
    assert again.iterations <= 2
