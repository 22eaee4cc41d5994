#!/usr/bin/env python3
"""Convergence study across the problem catalog.

For each entry, solve on a ladder of grids and report sup errors against
the best available reference (exact profile, direct linear solve, or a
4x-refined run of the same scheme) together with observed orders.

Usage:
    python3 scripts/convergence_study.py
    python3 scripts/convergence_study.py --entries star3_eikonal,star2_linear \
        --resolutions 21,41,81,161 --csv out.csv
"""

import argparse
import csv
import sys
import time

import numpy as np

from knet.catalog import all_entries, entry_by_name
from knet.discretization import Grid, GridFunction
from knet.errors import ProblemNotLinear
from knet.oracle import direct_linear_solve, fine_grid_reference, sup_error
from knet.solver import solve_problem


def reference_for(entry, nodes):
    if entry.exact is not None:
        grid = Grid(entry.problem.network, nodes)
        return GridFunction.from_profile(grid, entry.exact), "exact"
    try:
        return direct_linear_solve(entry.problem, nodes).u, "direct-linear"
    except ProblemNotLinear:
        return fine_grid_reference(entry.problem, nodes, refine=4).u, "fine-grid"


def study(entry, resolutions):
    rows = []
    prev = None
    for n in resolutions:
        t0 = time.perf_counter()
        res = solve_problem(entry.problem, n)
        wall = time.perf_counter() - t0
        ref, ref_kind = reference_for(entry, n)
        err = sup_error(res.u, ref)
        h = res.u.grid.h
        if prev is not None and err > 0 and prev[1] > 0:
            order = np.log(prev[1] / err) / np.log(prev[0] / h)
        else:
            order = float("nan")
        rows.append({
            "entry": entry.name, "nodes": n, "h": h, "error": err,
            "order": order, "reference": ref_kind,
            "converged": res.converged, "iterations": res.iterations,
            "wall_time": wall,
        })
        prev = (h, err)
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--entries", default=None,
                    help="comma-separated catalog names (default: all)")
    ap.add_argument("--resolutions", default="21,41,81,161")
    ap.add_argument("--csv", default=None, help="also write rows to this CSV")
    args = ap.parse_args(argv)

    resolutions = [int(r) for r in args.resolutions.split(",")]
    if args.entries:
        entries = [entry_by_name(n) for n in args.entries.split(",")]
    else:
        entries = all_entries()

    all_rows = []
    for entry in entries:
        rows = study(entry, resolutions)
        all_rows.extend(rows)
        print(f"\n{entry.name}  ({rows[0]['reference']} reference)")
        print(f"  {'nodes':>6} {'h':>10} {'sup error':>12} {'order':>7} "
              f"{'iters':>6} {'time':>8}")
        for r in rows:
            print(f"  {r['nodes']:>6} {r['h']:>10.4g} {r['error']:>12.4e} "
                  f"{r['order']:>7.3f} {r['iterations']:>6} "
                  f"{r['wall_time']:>7.2f}s"
                  + ("" if r["converged"] else "  NOT CONVERGED"))

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(all_rows[0]))
            writer.writeheader()
            writer.writerows(all_rows)
        print(f"\nwrote {len(all_rows)} rows to {args.csv}")

    return 0 if all(r["converged"] for r in all_rows) else 1


if __name__ == "__main__":
    sys.exit(main())
