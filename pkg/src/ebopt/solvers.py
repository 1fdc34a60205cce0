"""Exact and heuristic minimizers for every problem kind, plus brute-force
oracles at tiny sizes.

Brute force enumerates each kind's feasible set once per (kind, size) and
caches it as an edge-index matrix, so repeated oracle calls reduce to a
vectorized argmin over structures. Cost ties are broken by the
lexicographically smallest edge list.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .combinatorial import (
    BIPARTITE_TSP,
    BipartiteInstance,
    MATCHING,
    ProblemKind,
    Solution,
    capelli_construct,
    connected_kfactor,
    cost,
    power_cost_matrix,
)
from .transport import min_cost_transport

__all__ = [
    "SolveReport",
    "SizeLimitError",
    "solve_matching_exact",
    "solve_bipartite_tsp_exact",
    "solve_mono_tsp",
    "solve_kfactor_exact",
    "solve_heuristic",
    "brute_force",
    "hilbert_order",
    "two_opt",
    "BRUTE_CAPS",
]

BRUTE_CAPS = {"matching": 8, "tsp": 5, "connected_kfactor": 5, "kfactor": 5,
              "kbounded_mst": 5}
EXACT_TSP_CAP = 9
EXACT_MONO_TSP_CAP = 16


class SizeLimitError(ValueError):
    """Instance exceeds an exact solver's size cap."""


@dataclass(frozen=True)
class SolveReport:
    solution: Solution
    method: str       # "brute" | "exact" | "heuristic(<name>)"
    optimality: str   # "proven" | "heuristic"
    runtime_ms: float


def _report(solution, method, optimality, t0) -> SolveReport:
    return SolveReport(solution, method, optimality, (time.perf_counter() - t0) * 1e3)


def _empty_report(method: str, t0) -> SolveReport:
    return _report(Solution((), 0.0), method, "proven", t0)


# ---------------------------------------------------------------------------
# assignment

def solve_matching_exact(x, y, p: float) -> SolveReport:
    """Optimal assignment of the smaller side into the larger one."""
    t0 = time.perf_counter()
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    if min(len(x), len(y)) == 0:
        return _empty_report("exact", t0)
    C = power_cost_matrix(x, y, p)
    rows, cols = linear_sum_assignment(C)
    edges = tuple(sorted(zip(rows.tolist(), cols.tolist())))
    return _report(Solution(edges, float(C[rows, cols].sum())), "exact", "proven", t0)


# ---------------------------------------------------------------------------
# bipartite TSP (exact, alternating DP)

def _tsp_dp_equal(C: np.ndarray) -> tuple[float, tuple[tuple[int, int], ...]]:
    """Optimal alternating Hamiltonian cycle on an n+n instance.

    DP state: (mask of x beyond the anchor x_0, mask of y, last y); each
    transition appends one x and one y, so |mask_y| = |mask_x| + 1.
    """
    n = C.shape[0]
    full_x = (1 << n) - 2  # x_0 is the anchor, excluded from the mask
    full_y = (1 << n) - 1
    INF = math.inf
    layer: dict[tuple[int, int], np.ndarray] = {}
    parent: dict[tuple[int, int], np.ndarray] = {}
    for j in range(n):
        key = (0, 1 << j)
        vals = np.full(n, INF)
        vals[j] = C[0, j]
        layer[key] = vals
        parent[key] = np.full((n, 2), -1, dtype=int)
    for _ in range(n - 1):
        nxt: dict[tuple[int, int], np.ndarray] = {}
        nparent: dict[tuple[int, int], np.ndarray] = {}
        for (mx, my), vals in layer.items():
            finite = np.isfinite(vals)
            lasts = np.nonzero(finite)[0]
            for i in range(1, n):
                bit = 1 << i
                if mx & bit:
                    continue
                via = vals[lasts] + C[i, lasts]
                k = int(np.argmin(via))
                base = via[k]
                last_y = int(lasts[k])
                row = base + C[i]
                for j in range(n):
                    if my >> j & 1:
                        continue
                    nkey = (mx | bit, my | (1 << j))
                    cand = row[j]
                    if nkey not in nxt:
                        nxt[nkey] = np.full(n, INF)
                        nparent[nkey] = np.full((n, 2), -1, dtype=int)
                    if cand < nxt[nkey][j]:
                        nxt[nkey][j] = cand
                        nparent[nkey][j] = (i, last_y)
        # keep parents of consumed layers for reconstruction
        parent.update(nparent)
        layer = nxt
    vals = layer[(full_x, full_y)]
    closed = vals + C[0]
    last = int(np.argmin(closed))
    best = float(closed[last])
    # reconstruct the alternating sequence backwards
    mx, my, j = full_x, full_y, last
    xs = [0]
    ys = []
    while True:
        ys.append(j)
        i, prev_y = parent[(mx, my)][j]
        if i < 0:
            break
        xs.append(int(i))
        mx &= ~(1 << int(i))
        my &= ~(1 << j)
        j = int(prev_y)
    # xs = [0, i_{n-1}, ..., i_1]; ys = [last, ..., first]; rebuild forward
    seq_x = [0] + xs[1:][::-1]
    seq_y = ys[::-1]
    edges = set()
    for t in range(len(seq_y)):
        edges.add((seq_x[t], seq_y[t]))
        edges.add((seq_x[(t + 1) % len(seq_x)], seq_y[t]))
    return best, tuple(sorted(edges))


def solve_bipartite_tsp_exact(x, y, p: float,
                              size_cap: int = EXACT_TSP_CAP) -> SolveReport:
    """Optimal alternating Hamiltonian cycle over the best z+z subsets."""
    t0 = time.perf_counter()
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    z = min(len(x), len(y))
    if z < 2:
        return _empty_report("exact", t0)
    if z > size_cap:
        raise SizeLimitError(
            f"exact bipartite TSP capped at {size_cap} (got {z}); "
            "use solve_heuristic for larger instances")
    C = power_cost_matrix(x, y, p)
    best = (math.inf, ())
    subsets_x = (list(itertools.combinations(range(len(x)), z))
                 if len(x) > z else [tuple(range(z))])
    subsets_y = (list(itertools.combinations(range(len(y)), z))
                 if len(y) > z else [tuple(range(z))])
    if len(subsets_x) * len(subsets_y) > 4000:
        raise SizeLimitError("too many z-subsets for the exact solver")
    for sx in subsets_x:
        for sy in subsets_y:
            val, edges = _tsp_dp_equal(C[np.ix_(sx, sy)])
            edges = tuple(sorted((sx[i], sy[j]) for i, j in edges))
            if (val, edges) < best:
                best = (val, edges)
    return _report(Solution(best[1], best[0]), "exact", "proven", t0)


# ---------------------------------------------------------------------------
# mono (non-bipartite) TSP

def _hilbert_indices(points: np.ndarray, bits: int = 10) -> np.ndarray:
    """Hilbert curve index per point (Skilling's transpose algorithm),
    vectorized over points after snapping to a 2^bits grid per axis."""
    pts = np.atleast_2d(np.asarray(points, float))
    n, d = pts.shape
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    span[span == 0] = 1.0
    side = 1 << bits
    X = np.minimum((pts - lo) / span * side, side - 1).astype(np.int64)
    if d == 1:
        return X[:, 0]
    q = side >> 1
    while q > 1:
        pmask = q - 1
        for i in range(d):
            hasq = (X[:, i] & q) != 0
            X[hasq, 0] ^= pmask
            t = (X[~hasq, 0] ^ X[~hasq, i]) & pmask
            X[~hasq, 0] ^= t
            X[~hasq, i] ^= t
        q >>= 1
    for i in range(1, d):
        X[:, i] ^= X[:, i - 1]
    t = np.zeros(n, dtype=np.int64)
    q = side >> 1
    while q > 1:
        mask = (X[:, d - 1] & q) != 0
        t[mask] ^= q - 1
        q >>= 1
    X ^= t[:, None]
    idx = np.zeros(n, dtype=np.int64)
    for bit in range(bits - 1, -1, -1):
        for i in range(d):
            idx = (idx << 1) | ((X[:, i] >> bit) & 1)
    return idx


def hilbert_order(points: np.ndarray) -> np.ndarray:
    """Point indices sorted along the Hilbert space-filling curve."""
    idx = _hilbert_indices(points)
    return np.argsort(idx, kind="stable")


def _tour_cost(D: np.ndarray, tour: np.ndarray) -> float:
    nxt = np.roll(tour, -1)
    return float(D[tour, nxt].sum())


def two_opt(D: np.ndarray, tour: np.ndarray, max_sweeps: int = 50) -> np.ndarray:
    """First-improvement 2-opt sweeps on a cyclic tour; at most
    ``max_sweeps`` passes, stopping early when a sweep finds no move."""
    tour = np.asarray(tour).copy()
    n = len(tour)
    if n < 4:
        return tour
    for _ in range(max_sweeps):
        improved = False
        for i in range(n - 1):
            a, b = tour[i], tour[i + 1]
            js = np.arange(i + 2, n if i > 0 else n - 1)
            if len(js) == 0:
                continue
            c = tour[js]
            dnt = tour[(js + 1) % n]
            gains = D[a, b] + D[c, dnt] - D[a, c] - D[b, dnt]
            pos = np.nonzero(gains > 1e-15)[0]
            if len(pos) == 0:
                continue
            j = js[pos[0]]
            tour[i + 1: j + 1] = tour[i + 1: j + 1][::-1]
            improved = True
        if not improved:
            break
    return tour


def solve_mono_tsp(x, p: float, mode: str = "heuristic",
                   max_sweeps: int = 50) -> tuple[np.ndarray, float]:
    """Tour over one point family; returns (permutation, cost).

    Exact mode is Held-Karp (capped); heuristic mode orders the points
    along a Hilbert curve and then runs 2-opt, so its cost never exceeds
    the Hilbert-order cost.
    """
    x = np.atleast_2d(np.asarray(x, float))
    n = len(x)
    if n <= 1:
        return np.arange(n), 0.0
    D = power_cost_matrix(x, x, p)
    if mode == "exact":
        if n > EXACT_MONO_TSP_CAP:
            raise SizeLimitError(f"exact mono TSP capped at {EXACT_MONO_TSP_CAP}")
        tour = _held_karp(D)
    elif mode == "heuristic":
        tour = two_opt(D, hilbert_order(x), max_sweeps=max_sweeps)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return tour, _tour_cost(D, tour)


def _held_karp(D: np.ndarray) -> np.ndarray:
    n = D.shape[0]
    if n == 2:
        return np.arange(2)
    size = 1 << n
    dp = np.full((size, n), math.inf)
    par = np.full((size, n), -1, dtype=np.int8)
    dp[1, 0] = 0.0
    for mask in range(1, size):
        if not mask & 1:
            continue
        vals = dp[mask]
        active = np.isfinite(vals)
        if not active.any():
            continue
        via = vals[active, None] + D[active]
        src = np.nonzero(active)[0]
        best = np.argmin(via, axis=0)
        cand = via[best, np.arange(n)]
        for j in range(1, n):
            if mask >> j & 1:
                continue
            nm = mask | (1 << j)
            if cand[j] < dp[nm, j]:
                dp[nm, j] = cand[j]
                par[nm, j] = src[best[j]]
    full = size - 1
    closed = dp[full] + D[:, 0]
    closed[0] = math.inf
    last = int(np.argmin(closed))
    tour = []
    mask, j = full, last
    while j >= 0:
        tour.append(j)
        pj = int(par[mask, j])
        mask &= ~(1 << j)
        j = pj
    return np.array(tour[::-1])


# ---------------------------------------------------------------------------
# exact kappa-factor via unit-capacity min-cost flow

def solve_kfactor_exact(x, y, p: float, kappa: int) -> SolveReport:
    """Minimum-weight kappa-regular subgraph of K(x, y), |x| = |y|.

    The degree-constrained relaxation is integral, so the unit-capacity
    flow optimum is an exact solution of the (possibly disconnected)
    kappa-factor problem.
    """
    t0 = time.perf_counter()
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    n = len(x)
    if len(y) != n:
        raise ValueError("solve_kfactor_exact requires equal sides")
    if n < kappa:
        return _empty_report("exact", t0)
    C = power_cost_matrix(x, y, p)
    plan = min_cost_transport(C, np.full(n, float(kappa)),
                              np.full(n, float(kappa)), capacity=np.ones((n, n)))
    edges = tuple(sorted((i, j) for i, j, m in plan.flows if m > 0.5))
    return _report(Solution(edges, plan.cost), "exact", "proven", t0)


# ---------------------------------------------------------------------------
# heuristics

def _or_opt_pair_relocation(C: np.ndarray, seq_x: np.ndarray, seq_y: np.ndarray,
                            max_sweeps: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """First-improvement relocation of aligned (x, y) pairs along an
    alternating cycle; preserves alternation and 2-regularity."""
    seq_x = seq_x.copy()
    seq_y = seq_y.copy()
    n = len(seq_x)
    if n < 3:
        return seq_x, seq_y
    for _ in range(max_sweeps):
        improved = False
        i = 1
        while i < n:
            xi, yi = seq_x[i], seq_y[i]
            prev_y = seq_y[i - 1]
            next_x = seq_x[(i + 1) % n]
            ks = np.arange(n)
            valid = (ks != i) & (ks != i - 1) & ((ks + 1) % n != i)
            ks = ks[valid]
            yk = seq_y[ks]
            xk1 = seq_x[(ks + 1) % n]
            delta = (C[next_x, prev_y] + C[xi, yk] + C[xk1, yi]
                     - C[xi, prev_y] - C[next_x, yi] - C[xk1, yk])
            pos = np.nonzero(delta < -1e-15)[0]
            if len(pos):
                k = int(ks[pos[0]])
                xs = seq_x.tolist()
                ys = seq_y.tolist()
                del xs[i]; del ys[i]
                k2 = k if k < i else k - 1
                xs.insert(k2 + 1, xi)
                ys.insert(k2 + 1, yi)
                seq_x = np.array(xs)
                seq_y = np.array(ys)
                improved = True
            else:
                i += 1
        if not improved:
            break
    return seq_x, seq_y


def _cycle_sequences(n: int, sigma: np.ndarray, rho: np.ndarray):
    """Alternating cycle of the kappa=2 construction as aligned sequences:
    edges (seq_x[t], seq_y[t]) and (seq_y[t], seq_x[t+1])."""
    seq_x = sigma.copy()
    seq_y = rho[sigma[(np.arange(n) + 1) % n]]
    return seq_x, seq_y


def _tsp_heuristic(x, y, p) -> Solution:
    n = len(x)
    sigma, _ = solve_mono_tsp(x, p, "heuristic")
    rho_edges = solve_matching_exact(x, y, p).solution.edges
    rho = np.empty(n, dtype=int)
    for i, j in rho_edges:
        rho[i] = j
    C = power_cost_matrix(x, y, p)
    seq_x, seq_y = _cycle_sequences(n, np.asarray(sigma, int), rho)
    seq_x, seq_y = _or_opt_pair_relocation(C, seq_x, seq_y)
    edges = set()
    for t in range(n):
        edges.add((int(seq_x[t]), int(seq_y[t])))
        edges.add((int(seq_x[(t + 1) % n]), int(seq_y[t])))
    edges = tuple(sorted(edges))
    return Solution(edges, float(sum(C[i, j] for i, j in edges)))


def _bfs_tree(edges, n: int) -> list[tuple[int, int]]:
    """Spanning tree of the bipartite graph by BFS from x_0; neighbor
    scan in sorted order for determinism. Vertices are 0..n-1 on side 1
    and n..2n-1 on side 2."""
    from collections import deque

    adj: dict[int, list[int]] = {}
    for i, j in edges:
        adj.setdefault(i, []).append(n + j)
        adj.setdefault(n + j, []).append(i)
    for v in adj:
        adj[v].sort()
    seen = {0}
    queue = deque([0])
    tree = []
    while queue:
        v = queue.popleft()
        for w in adj.get(v, ()):
            if w not in seen:
                seen.add(w)
                tree.append((v, w) if v < n else (w, v))
                queue.append(w)
    return [(i, j - n) for i, j in tree]


def _mst_improve(C: np.ndarray, tree: list[tuple[int, int]], kappa: int,
                 max_swaps: int, top_edges: int = 16,
                 max_passes: int = 6) -> list[tuple[int, int]]:
    """Heaviest-edge reconnection passes preserving the degree bound.

    Each pass tries to replace the heaviest tree edges by the cheapest
    cross-component edge; a swap is accepted only when the result is still
    a spanning tree with degrees <= kappa and strictly lower cost. A pass
    restarts after an accepted swap so edge indices stay coherent.
    """
    n = C.shape[0]
    swaps = 0
    for _ in range(max_passes):
        changed = False
        weights = np.array([C[i, j] for i, j in tree])
        order = np.argsort(-weights, kind="stable")[:top_edges]
        for ei in order:
            if swaps >= max_swaps:
                return tree
            i0, j0 = tree[ei]
            others = [tree[k] for k in range(len(tree)) if k != ei]
            # split components without the removed edge
            comp = np.full(2 * n, -1, dtype=int)
            adj: dict[int, list[int]] = {}
            for i, j in others:
                adj.setdefault(i, []).append(n + j)
                adj.setdefault(n + j, []).append(i)
            label = 0
            for start in range(2 * n):
                if comp[start] >= 0:
                    continue
                stack = [start]
                comp[start] = label
                while stack:
                    v = stack.pop()
                    for w in adj.get(v, ()):
                        if comp[w] < 0:
                            comp[w] = label
                            stack.append(w)
                label += 1
            deg_x = np.zeros(n, dtype=int)
            deg_y = np.zeros(n, dtype=int)
            for i, j in others:
                deg_x[i] += 1
                deg_y[j] += 1
            cx = comp[:n]
            cy = comp[n:]
            cross = cx[:, None] != cy[None, :]
            allowed = cross & (deg_x[:, None] < kappa) & (deg_y[None, :] < kappa)
            if not allowed.any():
                continue
            masked = np.where(allowed, C, math.inf)
            flat = int(np.argmin(masked))
            bi, bj = divmod(flat, n)
            if masked[bi, bj] < C[i0, j0] - 1e-15:
                tree = others + [(int(bi), int(bj))]
                swaps += 1
                changed = True
                break  # restart the pass on the updated tree
        if not changed:
            break
    return tree


def _mst_heuristic(x, y, p, kappa: int) -> Solution:
    n = len(x)
    C = power_cost_matrix(x, y, p)
    if n == 1:
        return Solution(((0, 0),), float(C[0, 0]))
    factor = _capelli_from_heuristics(x, y, p, min(max(kappa, 2), n))
    tree = _bfs_tree(factor.edges, n)
    tree = _mst_improve(C, tree, kappa, max_swaps=10 * n)
    edges = tuple(sorted(tree))
    return Solution(edges, float(sum(C[i, j] for i, j in edges)))


def _capelli_from_heuristics(x, y, p, kappa: int) -> Solution:
    n = len(x)
    sigma, _ = solve_mono_tsp(x, p, "heuristic")
    rho_edges = solve_matching_exact(x, y, p).solution.edges
    rho = np.empty(n, dtype=int)
    for i, j in rho_edges:
        rho[i] = j
    return capelli_construct(x, y, p, kappa, sigma, rho)


def solve_heuristic(kind: ProblemKind, x, y, p: float) -> SolveReport:
    """Feasible upper-bound solution for any kind on equal-size sides.

    TSP and connected kappa-factors come from the tour-plus-matching
    construction (TSP additionally gets pair-relocation improvement); the
    degree-bounded spanning tree is extracted from the connected factor by
    BFS and improved by degree-preserving edge swaps; matching is exact.
    """
    t0 = time.perf_counter()
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    z = min(len(x), len(y))
    if z < kind.min_size:
        return _empty_report("heuristic(empty)", t0)
    if kind.name == "matching":
        rep = solve_matching_exact(x, y, p)
        return _report(rep.solution, "exact", "proven", t0)
    if len(x) != len(y):
        keep = solve_matching_exact(x, y, p).solution
        sx = sorted(keep.used_x)
        sy = sorted(keep.used_y)
        inner = solve_heuristic(kind, x[sx], y[sy], p)
        edges = tuple(sorted((sx[i], sy[j]) for i, j in inner.solution.edges))
        return _report(Solution(edges, inner.solution.cost),
                       inner.method, "heuristic", t0)
    if kind.name == "tsp":
        sol = _tsp_heuristic(x, y, p)
        return _report(sol, "heuristic(tour+matching)", "heuristic", t0)
    if kind.name in ("connected_kfactor", "kfactor"):
        sol = _capelli_from_heuristics(x, y, p, kind.kappa)
        return _report(sol, "heuristic(tour+matching)", "heuristic", t0)
    if kind.name == "kbounded_mst":
        sol = _mst_heuristic(x, y, p, kind.kappa)
        return _report(sol, "heuristic(factor-tree)", "heuristic", t0)
    raise ValueError(f"unsupported kind {kind}")


# ---------------------------------------------------------------------------
# brute force

_STRUCTURE_CACHE: dict[tuple, np.ndarray] = {}


def _matching_structures(z: int) -> np.ndarray:
    perms = np.array(list(itertools.permutations(range(z))), dtype=np.int64)
    rows = np.arange(z, dtype=np.int64)[None, :]
    return rows * z + perms


def _tsp_structures(z: int) -> np.ndarray:
    out = []
    for sigma in itertools.permutations(range(1, z)):
        sig = (0,) + sigma
        for tau in itertools.permutations(range(z)):
            edges = set()
            for t in range(z):
                edges.add(sig[t] * z + tau[t])
                edges.add(sig[t] * z + tau[(t + 1) % z])
            out.append(sorted(edges))
    return np.unique(np.array(out, dtype=np.int64), axis=0)


def _regular_matrices(z: int, kappa: int) -> list[tuple[tuple[int, ...], ...]]:
    """All 0-1 z x z matrices with row and column sums kappa, as per-row
    neighbor subsets, via backtracking with column budgets."""
    rows = list(itertools.combinations(range(z), kappa))
    out = []
    budget = [kappa] * z

    def rec(r, chosen):
        if r == z:
            out.append(tuple(chosen))
            return
        remaining = z - r
        for subset in rows:
            if any(budget[c] == 0 for c in subset):
                continue
            # prune: every column must still be fillable
            for c in subset:
                budget[c] -= 1
            if all(b <= remaining - 1 for b in budget):
                chosen.append(subset)
                rec(r + 1, chosen)
                chosen.pop()
            for c in subset:
                budget[c] += 1

    rec(0, [])
    return out


def _factor_structures(z: int, kappa: int, connected: bool) -> np.ndarray:
    mats = _regular_matrices(z, kappa)
    keep = []
    for rows in mats:
        if connected and not _rows_connected(rows, z):
            continue
        edges = sorted(i * z + j for i, subset in enumerate(rows) for j in subset)
        keep.append(edges)
    return np.array(keep, dtype=np.int64)


def _rows_connected(rows, z: int) -> bool:
    parent = list(range(2 * z))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, subset in enumerate(rows):
        for j in subset:
            ra, rb = find(i), find(z + j)
            if ra != rb:
                parent[ra] = rb
    root = find(0)
    return all(find(v) == root for v in range(2 * z))


def _tree_structures(z: int, kappa: int) -> np.ndarray:
    """All spanning trees of K_{z,z} with degree <= kappa, enumerated via
    rooted parent arrays (root x_0, parents alternate sides)."""
    trees, degs = _all_tree_parents(z)
    keep = trees[(degs <= kappa).all(axis=1)]
    out = np.empty((len(keep), 2 * z - 1), dtype=np.int64)
    # vertices: x_i parents are y-ids (z..2z-1), y_j parents are x-ids
    col = 0
    for v in range(1, 2 * z):
        par = keep[:, v]
        if v < z:   # x_v -> y_(par - z)
            out[:, col] = v * z + (par - z)
        else:       # y_(v - z) -> x_par
            out[:, col] = par * z + (v - z)
        col += 1
    out.sort(axis=1)
    return out


_TREE_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _all_tree_parents(z: int) -> tuple[np.ndarray, np.ndarray]:
    """Parent arrays of all spanning trees of K_{z,z} rooted at x_0, plus
    per-vertex degree tables. Rooted parent arrays whose pointer chains all
    reach the root are exactly the spanning trees (z^(z-1) * z^(z-1))."""
    if z in _TREE_CACHE:
        return _TREE_CACHE[z]
    n_vert = 2 * z
    choice_sets = []
    for v in range(1, n_vert):
        if v < z:
            choice_sets.append(np.arange(z, 2 * z, dtype=np.int8))
        else:
            choice_sets.append(np.arange(z, dtype=np.int8))
    grids = np.meshgrid(*choice_sets, indexing="ij")
    combos = np.stack([g.ravel() for g in grids], axis=-1)
    parents = np.concatenate(
        [np.zeros((len(combos), 1), dtype=np.int8), combos], axis=1)
    reach = parents.copy()
    for _ in range(int(math.ceil(math.log2(n_vert))) + 1):
        reach = np.take_along_axis(reach, reach, axis=1)
    ok = (reach == 0).all(axis=1)
    trees = parents[ok]
    degs = np.zeros((len(trees), n_vert), dtype=np.int64)
    for v in range(n_vert):
        degs[:, v] = (trees[:, 1:] == v).sum(axis=1)
    degs[:, 1:] += 1  # each non-root vertex also touches its parent edge
    _TREE_CACHE[z] = (trees, degs)
    return trees, degs


def feasible_edge_sets(kind: ProblemKind, z: int) -> np.ndarray:
    """Edge-index matrix (structures x edges) of the full feasible set
    F_{z,z}; indices address the flattened z x z cost matrix."""
    key = (kind.name, kind.kappa, z)
    if key not in _STRUCTURE_CACHE:
        if kind.name == "matching":
            arr = _matching_structures(z)
        elif kind.name == "tsp":
            arr = _tsp_structures(z) if z >= 2 else np.empty((0, 0), np.int64)
        elif kind.name in ("connected_kfactor", "kfactor"):
            arr = _factor_structures(z, kind.kappa,
                                     kind.name == "connected_kfactor")
        elif kind.name == "kbounded_mst":
            arr = _tree_structures(z, kind.kappa)
        else:
            raise ValueError(kind.name)
        _STRUCTURE_CACHE[key] = arr
    return _STRUCTURE_CACHE[key]


def brute_force(kind: ProblemKind, x, y, p: float) -> SolveReport:
    """Exhaustive minimum over the feasible set, subsets included."""
    t0 = time.perf_counter()
    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    z = min(len(x), len(y))
    if z < kind.min_size:
        return _empty_report("brute", t0)
    cap = BRUTE_CAPS[kind.name]
    if z > cap:
        raise SizeLimitError(f"brute force for {kind.label()} capped at {cap}")
    structures = feasible_edge_sets(kind, z)
    if len(structures) == 0:
        return _empty_report("brute", t0)
    C = power_cost_matrix(x, y, p)
    best_val = math.inf
    best_edges = None
    subsets_x = (list(itertools.combinations(range(len(x)), z))
                 if len(x) > z else [tuple(range(z))])
    subsets_y = (list(itertools.combinations(range(len(y)), z))
                 if len(y) > z else [tuple(range(z))])
    for sx in subsets_x:
        for sy in subsets_y:
            sub = C[np.ix_(sx, sy)].ravel()
            costs = sub[structures].sum(axis=1)
            k = int(np.argmin(costs))
            val = float(costs[k])
            if val > best_val:
                continue
            ties = np.nonzero(costs == costs[k])[0]
            for t in ties:
                edges = tuple(sorted((sx[e // z], sy[e % z])
                                     for e in structures[t]))
                if val < best_val or edges < best_edges:
                    best_val, best_edges = val, edges
    return _report(Solution(best_edges, best_val), "brute", "proven", t0)
