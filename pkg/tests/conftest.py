"""Shared fixtures: catalog access and a session-wide solve cache so the
same (entry, resolution) pair is never solved twice across test modules."""

import numpy as np
import pytest

from knet.catalog import all_entries, entry_by_name
from knet.discretization import Grid, assemble
from knet.solver import SolveConfig, solve_problem


@pytest.fixture(scope="session")
def catalog():
    return {e.name: e for e in all_entries()}


@pytest.fixture(scope="session")
def solve_cached():
    """solve_cached(name, nodes, **kwargs) -> SolveResult, memoized."""
    cache = {}

    def get(name, nodes, **kwargs):
        key = (name, nodes, tuple(sorted(kwargs.items())))
        if key not in cache:
            entry = entry_by_name(name)
            cache[key] = solve_problem(entry.problem, nodes, **kwargs)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def system_cached():
    """system_cached(name, nodes, **kwargs) -> assembled ResidualSystem."""
    cache = {}

    def get(name, nodes, **kwargs):
        key = (name, nodes, tuple(sorted(kwargs.items())))
        if key not in cache:
            entry = entry_by_name(name)
            grid = Grid(entry.problem.network, nodes)
            cache[key] = assemble(entry.problem, grid, **kwargs)
        return cache[key]

    return get
