"""Brute-force agreement suite.

Each problem kind is checked two ways: the dedicated exact solver (where
one exists) against the cached enumeration, and the cached enumeration
against a second, independently coded enumeration route. The connected
kappa=2 factor doubles as a cross-check of the alternating-cycle DP.
"""

from __future__ import annotations

import itertools

import numpy as np

from .combinatorial import (
    BIPARTITE_TSP,
    MATCHING,
    ProblemKind,
    connected_kfactor,
    kbounded_mst,
    kfactor,
)
from .solvers import (
    brute_force,
    feasible_edge_sets,
    solve_bipartite_tsp_exact,
    solve_kfactor_exact,
    solve_matching_exact,
)

__all__ = ["independent_edge_sets", "run_oracle_suite"]


def _subset_edge_sets(z: int, n_edges: int, predicate) -> set[tuple[int, ...]]:
    out = set()
    for combo in itertools.combinations(range(z * z), n_edges):
        if predicate(combo, z):
            out.add(combo)
    return out


def _is_perfect_matching(combo, z) -> bool:
    rows = [e // z for e in combo]
    cols = [e % z for e in combo]
    return len(set(rows)) == z and len(set(cols)) == z


def _degrees(combo, z):
    dx = [0] * z
    dy = [0] * z
    for e in combo:
        dx[e // z] += 1
        dy[e % z] += 1
    return dx, dy


def _is_connected(combo, z) -> bool:
    parent = list(range(2 * z))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    touched = set()
    for e in combo:
        i, j = e // z, z + e % z
        touched.update((i, j))
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    roots = {find(v) for v in touched}
    return len(roots) == 1 and len(touched) == 2 * z


def _is_regular(kappa):
    def check(combo, z):
        dx, dy = _degrees(combo, z)
        return all(v == kappa for v in dx) and all(v == kappa for v in dy)
    return check


def _is_connected_regular(kappa):
    reg = _is_regular(kappa)

    def check(combo, z):
        return reg(combo, z) and _is_connected(combo, z)
    return check


def _is_bounded_tree(kappa):
    def check(combo, z):
        dx, dy = _degrees(combo, z)
        if max(dx + dy) > kappa:
            return False
        return _is_connected(combo, z)  # 2z-1 edges + connected => tree
    return check


def independent_edge_sets(kind: ProblemKind, z: int) -> set[tuple[int, ...]]:
    """Feasible set by brute subset filtering (second enumeration route)."""
    if kind.name == "matching":
        return _subset_edge_sets(z, z, _is_perfect_matching)
    if kind.name == "tsp":
        return _subset_edge_sets(z, 2 * z, _is_connected_regular(2))
    if kind.name == "connected_kfactor":
        return _subset_edge_sets(z, kind.kappa * z,
                                 _is_connected_regular(kind.kappa))
    if kind.name == "kfactor":
        return _subset_edge_sets(z, kind.kappa * z, _is_regular(kind.kappa))
    if kind.name == "kbounded_mst":
        return _subset_edge_sets(z, 2 * z - 1, _is_bounded_tree(kind.kappa))
    raise ValueError(kind.name)


def structure_sets_agree(kind: ProblemKind, z: int) -> bool:
    primary = {tuple(row) for row in feasible_edge_sets(kind, z).tolist()}
    return primary == independent_edge_sets(kind, z)


def run_oracle_suite(seed: int = 0, instances: int = 25,
                     dims=(2, 3), ps=(1.0, 2.0)) -> dict:
    """Exact-vs-brute agreement over random instances plus structure-set
    equality between the two enumeration routes."""
    rng = np.random.default_rng(seed)
    lines = []
    max_gap = 0.0
    checks = 0
    ok = True

    struct_cases = [
        (MATCHING, 3), (MATCHING, 4),
        (BIPARTITE_TSP, 3), (BIPARTITE_TSP, 4),
        (connected_kfactor(2), 4), (connected_kfactor(3), 4),
        (kfactor(2), 4),
        (kbounded_mst(2), 4), (kbounded_mst(3), 4),
    ]
    for kind, z in struct_cases:
        agree = structure_sets_agree(kind, z)
        ok &= agree
        checks += 1
        lines.append(f"structure sets {kind.label()} z={z}: "
                     f"{'agree' if agree else 'MISMATCH'}")

    def rel_gap(a, b):
        return abs(a - b) / max(1.0, abs(a), abs(b))

    cases = [
        (MATCHING, 8, "lsa"),
        (BIPARTITE_TSP, 5, "dp"),
        (kfactor(2), 5, "flow"),
        (kfactor(3), 5, "flow"),
        (connected_kfactor(2), 5, "tsp-dp"),
        (connected_kfactor(3), 5, None),
        (kbounded_mst(2), 5, None),
        (kbounded_mst(3), 5, None),
    ]
    for kind, cap, exact_route in cases:
        worst = 0.0
        for d in dims:
            for p in ps:
                for _ in range(instances):
                    n = int(rng.integers(max(kind.min_size, 1), cap + 1))
                    x = rng.random((n, d))
                    y = rng.random((n, d))
                    b = brute_force(kind, x, y, p).solution.cost
                    if exact_route == "lsa":
                        e = solve_matching_exact(x, y, p).solution.cost
                    elif exact_route == "dp" and n >= 2:
                        e = solve_bipartite_tsp_exact(x, y, p).solution.cost
                    elif exact_route == "flow" and n >= kind.kappa:
                        e = solve_kfactor_exact(x, y, p, kind.kappa).solution.cost
                    elif exact_route == "tsp-dp" and n >= 2:
                        e = solve_bipartite_tsp_exact(x, y, p).solution.cost
                    else:
                        e = b
                    gap = rel_gap(e, b)
                    worst = max(worst, gap)
                    checks += 1
        max_gap = max(max_gap, worst)
        ok &= worst <= 1e-9
        lines.append(f"oracle {kind.label()} (exact={exact_route or 'enumeration'}): "
                     f"max relative gap {worst:.3e}")
    return {"ok": bool(ok), "lines": lines, "checks": checks,
            "max_relative_gap": max_gap}
