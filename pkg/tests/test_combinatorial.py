import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ebopt.combinatorial import (
    BIPARTITE_TSP,
    BipartiteInstance,
    MATCHING,
    ProblemKind,
    Solution,
    capelli_construct,
    connected_kfactor,
    cost,
    glue,
    is_feasible,
    kbounded_mst,
    kfactor,
    solution_from_csv,
    solution_to_csv,
)
from ebopt.solvers import brute_force, feasible_edge_sets, solve_heuristic


class TestProblemKind:
    @pytest.mark.parametrize("kind,c2,c3,c4", [
        (MATCHING, 1, 1, 0),
        (BIPARTITE_TSP, 2, 2, 0),
        (connected_kfactor(3), 3, 3, 0),
        (connected_kfactor(5), 5, 5, 0),
        (kfactor(1), 1, 1, 0),
        (kbounded_mst(2), 1, 2, 1),
        (kbounded_mst(4), 1, 4, 1),
    ])
    def test_structural_constants(self, kind, c2, c3, c4):
        assert kind.min_size == c2
        assert kind.max_degree == c3
        assert kind.extra_glue_edges == c4

    def test_labels_roundtrip(self):
        for kind in (MATCHING, BIPARTITE_TSP, connected_kfactor(3),
                     kfactor(2), kbounded_mst(4)):
            assert ProblemKind.from_label(kind.label()) == kind

    def test_invalid_kinds(self):
        with pytest.raises(ValueError):
            ProblemKind("tsp", 3)
        with pytest.raises(ValueError):
            ProblemKind("kbounded_mst", 1)


class TestCost:
    def test_single_edge_squared(self):
        inst = BipartiteInstance([[0, 0]], [[1, 0]], 2.0, MATCHING)
        assert cost(inst, [(0, 0)]) == 1.0

    def test_single_edge_euclidean(self):
        inst = BipartiteInstance([[0, 0]], [[1, 1]], 1.0, MATCHING)
        assert cost(inst, [(0, 0)]) == pytest.approx(math.sqrt(2), rel=1e-15)

    def test_three_edge_matching_vs_high_precision(self):
        # recompute with Fraction-exact squared distances and mpmath-free
        # high-precision powers via the math module on exact ratios
        x = np.array([[0.125, 0.25], [0.5, 0.75], [0.875, 0.0]])
        y = np.array([[0.0, 1.0], [0.25, 0.125], [1.0, 0.5]])
        p = 1.7
        edges = [(0, 1), (1, 0), (2, 2)]
        inst = BipartiteInstance(x, y, p, MATCHING)
        expected = 0.0
        for i, j in edges:
            d2 = sum((Fraction(str(a)) - Fraction(str(b))) ** 2
                     for a, b in zip(x[i], y[j]))
            expected += float(d2) ** (p / 2)
        assert cost(inst, edges) == pytest.approx(expected, rel=1e-12)

    def test_out_of_range_index(self):
        inst = BipartiteInstance([[0.0]], [[1.0]], 1.0, MATCHING)
        with pytest.raises(IndexError):
            cost(inst, [(0, 3)])

    def test_p_validation(self):
        with pytest.raises(ValueError):
            BipartiteInstance([[0.0]], [[1.0]], 0.5, MATCHING)


SQUARE_X = np.array([[0.0, 0.0], [1.0, 1.0]])
SQUARE_Y = np.array([[0.0, 1.0], [1.0, 0.0]])


class TestIsFeasible:
    def test_four_cycle_is_tsp_feasible(self):
        inst = BipartiteInstance(SQUARE_X, SQUARE_Y, 1.0, BIPARTITE_TSP)
        sol = Solution(((0, 0), (0, 1), (1, 0), (1, 1)), 4.0)
        assert is_feasible(inst, sol).ok

    def test_four_cycle_is_not_a_matching(self):
        inst = BipartiteInstance(SQUARE_X, SQUARE_Y, 1.0, MATCHING)
        sol = Solution(((0, 0), (0, 1), (1, 0), (1, 1)), 4.0)
        report = is_feasible(inst, sol)
        assert not report.ok
        assert any("degree" in v for v in report.violations)

    def test_random_sigma_tau_cycle_feasible(self):
        # cycle built from two permutations: edges (sigma(i), tau(i)) and
        # (sigma(i), tau(i+1)); the visiting order of an alternating cycle
        rng = np.random.default_rng(3)
        n = 5
        x, y = rng.random((n, 2)), rng.random((n, 2))
        sigma = rng.permutation(n)
        tau = rng.permutation(n)
        edges = set()
        for i in range(n):
            edges.add((int(sigma[i]), int(tau[i])))
            edges.add((int(sigma[i]), int(tau[(i + 1) % n])))
        inst = BipartiteInstance(x, y, 2.0, BIPARTITE_TSP)
        sol = Solution(tuple(sorted(edges)), cost(inst, sorted(edges)))
        assert is_feasible(inst, sol).ok

    def test_empty_solution_rules(self):
        inst = BipartiteInstance(np.empty((0, 2)), np.empty((0, 2)), 1.0, MATCHING)
        assert is_feasible(inst, Solution((), 0.0)).ok
        inst1 = BipartiteInstance([[0.0, 0.0]], [[1.0, 0.0]], 1.0, MATCHING)
        assert not is_feasible(inst1, Solution((), 0.0)).ok
        # TSP needs 2 points per side, so 1+1 admits only the empty solution
        inst2 = BipartiteInstance([[0.0, 0.0]], [[1.0, 0.0]], 1.0, BIPARTITE_TSP)
        assert is_feasible(inst2, Solution((), 0.0)).ok

    def test_tree_predicate(self):
        rng = np.random.default_rng(5)
        x, y = rng.random((3, 2)), rng.random((3, 2))
        inst = BipartiteInstance(x, y, 1.0, kbounded_mst(2))
        path = Solution(((0, 0), (1, 0), (1, 1), (2, 1), (2, 2)), 0.0)
        assert is_feasible(inst, path).ok
        cycle_extra = Solution(((0, 0), (1, 0), (1, 1), (2, 1), (2, 2), (0, 2)), 0.0)
        assert not is_feasible(inst, cycle_extra).ok

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000))
    def test_relabeling_invariance(self, seed):
        # feasibility is invariant under independent side relabelings
        rng = np.random.default_rng(seed)
        kind = [MATCHING, BIPARTITE_TSP, connected_kfactor(2),
                kfactor(2), kbounded_mst(2)][seed % 5]
        n = int(rng.integers(max(kind.min_size, 2), 6))
        x, y = rng.random((n, 2)), rng.random((n, 2))
        rep = solve_heuristic(kind, x, y, 1.0)
        perm_x = rng.permutation(n)
        perm_y = rng.permutation(n)
        inst2 = BipartiteInstance(x[perm_x], y[perm_y], 1.0, kind)
        inv_x = np.argsort(perm_x)
        inv_y = np.argsort(perm_y)
        edges2 = tuple(sorted((int(inv_x[i]), int(inv_y[j]))
                              for i, j in rep.solution.edges))
        sol2 = Solution(edges2, cost(inst2, edges2))
        assert is_feasible(inst2, sol2).ok


class TestGlue:
    def _tsp_cycle(self, x, y, p=1.0):
        inst = BipartiteInstance(x, y, p, BIPARTITE_TSP)
        edges = tuple(sorted([(0, 0), (0, 1), (1, 0), (1, 1)]))
        return inst, Solution(edges, cost(inst, edges))

    def test_two_cycles_glue_to_hamiltonian(self):
        rng = np.random.default_rng(1)
        ia, sa = self._tsp_cycle(rng.random((2, 2)), rng.random((2, 2)))
        ib, sb = self._tsp_cycle(rng.random((2, 2)) + 2.0, rng.random((2, 2)) + 2.0)
        merged, sol = glue(ia, sa, ib, sb, 0, 0)
        assert is_feasible(merged, sol).ok
        # membership in the enumerated feasible set F_{4,4}
        structures = {tuple(sorted(row)) for row in
                      feasible_edge_sets(BIPARTITE_TSP, 4).tolist()}
        flat = tuple(sorted(i * 4 + j for i, j in sol.edges))
        assert flat in structures

    def test_two_matchings_glue_cost(self):
        xa, ya = np.array([[0.0, 0.0]]), np.array([[0.0, 1.0]])
        xb, yb = np.array([[3.0, 0.0]]), np.array([[3.0, 1.0]])
        ia = BipartiteInstance(xa, ya, 1.0, MATCHING)
        ib = BipartiteInstance(xb, yb, 1.0, MATCHING)
        sa = Solution(((0, 0),), cost(ia, [(0, 0)]))
        sb = Solution(((0, 0),), cost(ib, [(0, 0)]))
        merged, sol = glue(ia, sa, ib, sb, 0, 0)
        assert is_feasible(merged, sol).ok
        # the swap crosses the edges: cost = both crossed distances
        assert sol.cost == pytest.approx(
            math.hypot(3.0, 1.0) + math.hypot(3.0, 1.0), rel=1e-12)

    def test_complete_k33_factors_glue(self):
        rng = np.random.default_rng(7)
        x1, y1 = rng.random((3, 2)), rng.random((3, 2))
        x2, y2 = rng.random((3, 2)), rng.random((3, 2))
        kind = connected_kfactor(3)
        edges = tuple((i, j) for i in range(3) for j in range(3))
        ia = BipartiteInstance(x1, y1, 1.0, kind)
        ib = BipartiteInstance(x2, y2, 1.0, kind)
        sa = Solution(edges, cost(ia, edges))
        sb = Solution(edges, cost(ib, edges))
        merged, sol = glue(ia, sa, ib, sb, 0, 0)
        assert is_feasible(merged, sol).ok
        # 2-connectivity: still connected after removing any single edge
        for drop in sol.edges:
            remaining = tuple(e for e in sol.edges if e != drop)
            probe = Solution(remaining, 0.0)
            report = is_feasible(merged, probe)
            assert all("connected" not in v for v in report.violations), drop

    def test_neighborhood_preservation(self):
        rng = np.random.default_rng(11)
        kind = BIPARTITE_TSP
        n1, n2 = 4, 5
        x1, y1 = rng.random((n1, 2)), rng.random((n1, 2))
        x2, y2 = rng.random((n2, 2)), rng.random((n2, 2))
        sa = solve_heuristic(kind, x1, y1, 1.0).solution
        sb = solve_heuristic(kind, x2, y2, 1.0).solution
        ia = BipartiteInstance(x1, y1, 1.0, kind)
        ib = BipartiteInstance(x2, y2, 1.0, kind)
        x2v = 2
        merged, sol = glue(ia, sa, ib, sb, 0, x2v)

        def nbrs(edges, i):
            return {j for a, j in edges if a == i}

        touched = nbrs(sb.edges, x2v) | {x2v}
        for i in range(n2):
            if i in touched:
                continue
            before = {j + n1 for j in nbrs(sb.edges, i)}
            after = nbrs(sol.edges, i + n1)
            assert after == before, i

    def test_empty_solution_rejected(self):
        inst = BipartiteInstance([[0.0, 0.0]], [[1.0, 0.0]], 1.0, MATCHING)
        with pytest.raises(ValueError):
            glue(inst, Solution((), 0.0), inst, Solution(((0, 0),), 1.0), 0, 0)


class TestCapelli:
    def test_identity_permutations_kappa2(self):
        x = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        y = np.array([[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]])
        sol = capelli_construct(x, y, 1.0, 2, [0, 1, 2], [0, 1, 2])
        # edges (i, i) and (i, i+1 mod 3): the alternating cycle
        assert set(sol.edges) == {(0, 0), (0, 1), (1, 1), (1, 2), (2, 2), (2, 0)}
        inst = BipartiteInstance(x, y, 1.0, BIPARTITE_TSP)
        assert is_feasible(inst, sol).ok

    def test_kappa2_contains_sigma_tau_cycle(self):
        rng = np.random.default_rng(13)
        n = 6
        x, y = rng.random((n, 2)), rng.random((n, 2))
        sigma = rng.permutation(n)
        rho = rng.permutation(n)
        sol = capelli_construct(x, y, 1.0, 2, sigma, rho)
        tau = rho[sigma]
        expected = set()
        for i in range(n):
            expected.add((int(sigma[i]), int(tau[i])))
            expected.add((int(sigma[i]), int(tau[(i + 1) % n])))
        assert expected <= set(sol.edges)

    def test_kappa3_regular_connected(self):
        rng = np.random.default_rng(17)
        n = 4
        x, y = rng.random((n, 2)), rng.random((n, 2))
        sol = capelli_construct(x, y, 1.5, 3, rng.permutation(n), rng.permutation(n))
        assert len(sol.edges) == 3 * n
        inst = BipartiteInstance(x, y, 1.5, connected_kfactor(3))
        assert is_feasible(inst, sol).ok

    def test_cost_dominated_by_exact_with_measured_constant(self):
        # tour-plus-matching cost vs the exact optimum over 100 seeds
        worst = 0.0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            n = 5
            x, y = rng.random((n, 2)), rng.random((n, 2))
            heur = solve_heuristic(BIPARTITE_TSP, x, y, 1.0).solution.cost
            exact = brute_force(BIPARTITE_TSP, x, y, 1.0).solution.cost
            assert heur >= exact - 1e-12
            worst = max(worst, heur / exact)
        assert worst < 2.5  # measured constant, recorded

    def test_size_validation(self):
        with pytest.raises(ValueError):
            capelli_construct(np.zeros((2, 2)), np.zeros((2, 2)), 1.0, 3,
                              [0, 1], [0, 1])


class TestTreeLeaves:
    def test_generated_trees_have_leaves_on_both_sides(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            n = int(rng.integers(2, 9))
            x, y = rng.random((n, 2)), rng.random((n, 2))
            sol = solve_heuristic(kbounded_mst(3), x, y, 1.0).solution
            deg_x = {}
            deg_y = {}
            for i, j in sol.edges:
                deg_x[i] = deg_x.get(i, 0) + 1
                deg_y[j] = deg_y.get(j, 0) + 1
            assert any(v == 1 for v in deg_x.values())
            assert any(v == 1 for v in deg_y.values())


class TestSolutionSerialization:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(29)
        x, y = rng.random((4, 2)), rng.random((4, 2))
        inst = BipartiteInstance(x, y, 2.0, BIPARTITE_TSP)
        sol = solve_heuristic(BIPARTITE_TSP, x, y, 2.0).solution
        path = tmp_path / "sol.csv"
        solution_to_csv(path, inst, sol)
        meta, back = solution_from_csv(path)
        assert back.edges == sol.edges
        assert back.cost == sol.cost
        assert meta["kind"] == "tsp"
        assert int(meta["n"]) == 4
