"""Problem kinds over complete bipartite geometric graphs, solution model,
feasibility predicates, and the local-merging (gluing) operation.

A problem kind prescribes the feasible subgraphs of K(x, y) together with
three structural constants: ``min_size`` (below which only the empty
solution is feasible), ``max_degree``, and ``extra_glue_edges`` (how many
edges beyond the two swapped ones a glue may add, always inside the first
solution's vertex set).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

__all__ = [
    "ProblemKind",
    "MATCHING",
    "BIPARTITE_TSP",
    "connected_kfactor",
    "kfactor",
    "kbounded_mst",
    "BipartiteInstance",
    "Solution",
    "FeasibilityReport",
    "cost",
    "is_feasible",
    "glue",
    "capelli_construct",
    "solution_to_csv",
    "solution_from_csv",
    "pairwise_power_costs",
    "power_cost_matrix",
]


@dataclass(frozen=True)
class ProblemKind:
    name: str  # matching | tsp | connected_kfactor | kfactor | kbounded_mst
    kappa: int = 1

    def __post_init__(self):
        valid = {"matching", "tsp", "connected_kfactor", "kfactor", "kbounded_mst"}
        if self.name not in valid:
            raise ValueError(f"unknown problem kind {self.name!r}")
        if self.name == "tsp" and self.kappa != 2:
            raise ValueError("tsp is the kappa=2 connected factor")
        if self.name in ("connected_kfactor", "kbounded_mst") and self.kappa < 2:
            raise ValueError(f"{self.name} requires kappa >= 2")
        if self.name == "kfactor" and self.kappa < 1:
            raise ValueError("kfactor requires kappa >= 1")

    @property
    def min_size(self) -> int:
        """Smallest n for which nonempty feasible solutions exist (c_A2)."""
        return {"matching": 1, "tsp": 2, "connected_kfactor": self.kappa,
                "kfactor": self.kappa, "kbounded_mst": 1}[self.name]

    @property
    def max_degree(self) -> int:
        """Uniform degree bound over feasible solutions (c_A3)."""
        return {"matching": 1, "tsp": 2, "connected_kfactor": self.kappa,
                "kfactor": self.kappa, "kbounded_mst": self.kappa}[self.name]

    @property
    def extra_glue_edges(self) -> int:
        """Extra edges a glue may add beyond the two swapped ones (c_A4)."""
        return 1 if self.name == "kbounded_mst" else 0

    def label(self) -> str:
        if self.name in ("matching", "tsp"):
            return self.name
        return f"{self.name}{self.kappa}"

    @staticmethod
    def from_label(label: str) -> "ProblemKind":
        for base in ("connected_kfactor", "kbounded_mst", "kfactor"):
            if label.startswith(base):
                suffix = label[len(base):]
                return ProblemKind(base, int(suffix) if suffix else 2)
        if label in ("matching", "tsp"):
            return ProblemKind(label, 2 if label == "tsp" else 1)
        raise ValueError(f"unknown problem label {label!r}")


MATCHING = ProblemKind("matching", 1)
BIPARTITE_TSP = ProblemKind("tsp", 2)


def connected_kfactor(kappa: int) -> ProblemKind:
    return ProblemKind("connected_kfactor", kappa)


def kfactor(kappa: int) -> ProblemKind:
    return ProblemKind("kfactor", kappa)


def kbounded_mst(kappa: int) -> ProblemKind:
    return ProblemKind("kbounded_mst", kappa)


@dataclass(frozen=True)
class BipartiteInstance:
    """Two point families plus the weight exponent p and the problem kind."""

    x: np.ndarray
    y: np.ndarray
    p: float
    kind: ProblemKind

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if self.x is not None and len(np.asarray(self.x)) == 0:
            x = x.reshape(0, y.shape[1] if y.size else 1)
        if self.y is not None and len(np.asarray(self.y)) == 0:
            y = y.reshape(0, x.shape[1] if x.size else 1)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.size and y.size and x.shape[1] != y.shape[1]:
            raise ValueError("point families have different dimensions")
        if self.p < 1:
            raise ValueError("weight exponent p must be >= 1")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def z(self) -> int:
        return min(self.n, self.m)


def pairwise_power_costs(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """|a_i - b_i|^p per row, via (squared distance)^(p/2) with a zero guard."""
    d2 = np.sum((np.asarray(a, float) - np.asarray(b, float)) ** 2, axis=-1)
    if p == 2:
        return d2
    if p == 1:
        return np.sqrt(d2)
    out = np.zeros_like(d2)
    nz = d2 > 0
    out[nz] = np.exp(0.5 * p * np.log(d2[nz]))
    return out


def power_cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    """Full cost matrix |x_i - y_j|^p.

    Squared distances come from coordinate differences (not the Gram
    expansion), so coincident points give exact zeros.
    """
    from scipy.spatial.distance import cdist

    x = np.atleast_2d(np.asarray(x, float))
    y = np.atleast_2d(np.asarray(y, float))
    if p == 1:
        return cdist(x, y, "euclidean")
    d2 = cdist(x, y, "sqeuclidean")
    if p == 2:
        return d2
    out = np.zeros_like(d2)
    nz = d2 > 0
    out[nz] = np.exp(0.5 * p * np.log(d2[nz]))
    return out


@dataclass(frozen=True)
class Solution:
    """Edge list over the two sides, with the incurred cost."""

    edges: tuple[tuple[int, int], ...]
    cost: float

    @property
    def used_x(self) -> frozenset[int]:
        return frozenset(i for i, _ in self.edges)

    @property
    def used_y(self) -> frozenset[int]:
        return frozenset(j for _, j in self.edges)

    def degree_tables(self, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
        dx = np.zeros(n, dtype=int)
        dy = np.zeros(m, dtype=int)
        for i, j in self.edges:
            dx[i] += 1
            dy[j] += 1
        return dx, dy


def cost(instance: BipartiteInstance, solution: Solution | Sequence[tuple[int, int]]) -> float:
    """Sum of |x_i - y_j|^p over the edges (pairwise accumulation)."""
    edges = solution.edges if isinstance(solution, Solution) else tuple(solution)
    if not edges:
        return 0.0
    idx = np.asarray(edges, dtype=int)
    if idx.min() < 0 or idx[:, 0].max() >= instance.n or idx[:, 1].max() >= instance.m:
        raise IndexError("edge index out of range")
    return float(np.sum(pairwise_power_costs(instance.x[idx[:, 0]],
                                             instance.y[idx[:, 1]], instance.p)))


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    violations: tuple[str, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.ok


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.groups = n

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        self.groups -= 1
        return True


def _connected_over_used(edges, used_x, used_y) -> bool:
    index = {("x", i): k for k, i in enumerate(sorted(used_x))}
    index.update({("y", j): len(used_x) + k for k, j in enumerate(sorted(used_y))})
    uf = _UnionFind(len(index))
    for i, j in edges:
        uf.union(index[("x", i)], index[("y", j)])
    return uf.groups == 1


def is_feasible(instance: BipartiteInstance, solution: Solution) -> FeasibilityReport:
    """Check the per-kind feasibility predicate on the used z+z subsets.

    The empty solution is feasible exactly when min(|x|, |y|) is below the
    kind's minimum size.
    """
    kind = instance.kind
    z = instance.z
    violations: list[str] = []
    if not solution.edges:
        if z >= kind.min_size:
            violations.append("empty solution but feasible solutions must span")
        return FeasibilityReport(not violations, tuple(violations))
    if z < kind.min_size:
        return FeasibilityReport(False, ("nonempty solution below the minimum size",))

    edges = solution.edges
    if len(set(edges)) != len(edges):
        violations.append("repeated edge")
    idx = np.asarray(edges, dtype=int)
    if idx.min() < 0 or idx[:, 0].max() >= instance.n or idx[:, 1].max() >= instance.m:
        return FeasibilityReport(False, ("edge index out of range",))
    used_x, used_y = solution.used_x, solution.used_y
    if len(used_x) != z or len(used_y) != z:
        violations.append(f"solution must span {z} vertices per side "
                          f"(has {len(used_x)}+{len(used_y)})")
    dx, dy = solution.degree_tables(instance.n, instance.m)
    degs_x = dx[sorted(used_x)]
    degs_y = dy[sorted(used_y)]
    if dx.max(initial=0) > kind.max_degree or dy.max(initial=0) > kind.max_degree:
        violations.append(f"degree exceeds {kind.max_degree}")

    name = kind.name
    if name == "matching":
        if not (np.all(degs_x == 1) and np.all(degs_y == 1)):
            violations.append("matching degrees must all equal 1")
    elif name in ("tsp", "connected_kfactor", "kfactor"):
        k = kind.kappa
        if not (np.all(degs_x == k) and np.all(degs_y == k)):
            violations.append(f"{k}-factor degrees must all equal {k}")
        if name != "kfactor" and not _connected_over_used(edges, used_x, used_y):
            violations.append("solution is not connected")
    elif name == "kbounded_mst":
        if len(edges) != 2 * z - 1:
            violations.append(f"tree needs {2 * z - 1} edges, has {len(edges)}")
        elif not _connected_over_used(edges, used_x, used_y):
            violations.append("tree is not connected")
        # connected with 2z-1 edges over 2z vertices is automatically acyclic
    return FeasibilityReport(not violations, tuple(violations))


def _neighbors(edges, side: str, vertex: int) -> list[int]:
    if side == "x":
        return sorted(j for i, j in edges if i == vertex)
    return sorted(i for i, j in edges if j == vertex)


def _leaves(edges, used_x, used_y):
    cnt_x: dict[int, int] = {}
    cnt_y: dict[int, int] = {}
    for i, j in edges:
        cnt_x[i] = cnt_x.get(i, 0) + 1
        cnt_y[j] = cnt_y.get(j, 0) + 1
    lx = sorted(i for i in used_x if cnt_x.get(i, 0) == 1)
    ly = sorted(j for j in used_y if cnt_y.get(j, 0) == 1)
    return lx, ly


def _component_labels(edges, n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    uf = _UnionFind(n + m)
    for i, j in edges:
        uf.union(i, n + j)
    roots_x = np.array([uf.find(i) for i in range(n)])
    roots_y = np.array([uf.find(n + j) for j in range(m)])
    return roots_x, roots_y


def glue(inst_a: BipartiteInstance, sol_a: Solution,
         inst_b: BipartiteInstance, sol_b: Solution,
         x1: int, x2: int) -> tuple[BipartiteInstance, Solution]:
    """Merge two feasible solutions of the same kind into one on the
    concatenated instance by an edge swap at side-1 vertices ``x1`` (of the
    first) and ``x2`` (of the second).

    Removes {x1, y} and {x2, y'}, adds {x1, y'} and {x2, y}, choosing the
    neighbor pair (y, y') with the smallest post-swap cost increase. For the
    degree-bounded spanning tree one extra edge is added between a side-1
    and a side-2 leaf of the first solution, taking the lexicographically
    smallest pair whose endpoints the swap left in different components.
    """
    if inst_a.kind != inst_b.kind:
        raise ValueError("cannot glue solutions of different kinds")
    if not sol_a.edges or not sol_b.edges:
        raise ValueError("cannot glue an empty solution")
    kind = inst_a.kind
    p = inst_a.p
    n_a, m_a = inst_a.n, inst_a.m
    merged = BipartiteInstance(
        np.concatenate([inst_a.x, inst_b.x]),
        np.concatenate([inst_a.y, inst_b.y]),
        p, kind,
    )
    nbrs_x1 = _neighbors(sol_a.edges, "x", x1)
    nbrs_x2 = _neighbors(sol_b.edges, "x", x2)
    if not nbrs_x1 or not nbrs_x2:
        raise ValueError("glue vertices must have nonempty neighborhoods")

    def _edge_cost(xi_pt, yj_pt):
        return float(pairwise_power_costs(xi_pt[None, :], yj_pt[None, :], p)[0])

    best = None
    for y in nbrs_x1:
        for yp in nbrs_x2:
            delta = (
                _edge_cost(inst_a.x[x1], inst_b.y[yp])
                + _edge_cost(inst_b.x[x2], inst_a.y[y])
                - _edge_cost(inst_a.x[x1], inst_a.y[y])
                - _edge_cost(inst_b.x[x2], inst_b.y[yp])
            )
            if best is None or delta < best[0]:
                best = (delta, y, yp)
    delta, y, yp = best

    edges = [(i, j) for i, j in sol_a.edges if (i, j) != (x1, y)]
    edges += [(i + n_a, j + m_a) for i, j in sol_b.edges if (i, j) != (x2, yp)]
    edges.append((x1, yp + m_a))
    edges.append((x2 + n_a, y))
    new_cost = sol_a.cost + sol_b.cost + delta

    if kind.name == "kbounded_mst":
        roots_x, roots_y = _component_labels(edges, merged.n, merged.m)
        lx, ly = _leaves(sol_a.edges, sol_a.used_x, sol_a.used_y)
        extra = None
        for i in lx:
            for j in ly:
                if roots_x[i] != roots_y[j]:
                    extra = (i, j)
                    break
            if extra:
                break
        if extra is None:
            raise AssertionError("no reconnecting leaf pair (construction bug)")
        edges.append(extra)
        new_cost += _edge_cost(inst_a.x[extra[0]], inst_a.y[extra[1]])

    return merged, Solution(tuple(edges), new_cost)


def capelli_construct(x: np.ndarray, y: np.ndarray, p: float, kappa: int,
                      mono_tour: Sequence[int], matching: Sequence[int]) -> Solution:
    """Connected kappa-factor built from a tour of x and an x-to-y matching.

    Edge set {(sigma(i), rho(sigma(i + l))) : i in [n], l in 0..kappa-1}
    with indices mod n, where sigma is the tour order and rho the matching
    permutation. For kappa = 2 this is a Hamiltonian cycle.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    if len(y) != n:
        raise ValueError("capelli construction needs equal sides")
    if n < kappa:
        raise ValueError(f"need n >= kappa, got n={n} kappa={kappa}")
    sigma = np.asarray(mono_tour, dtype=int)
    rho = np.asarray(matching, dtype=int)
    if sorted(sigma) != list(range(n)) or sorted(rho) != list(range(n)):
        raise ValueError("tour and matching must be permutations of range(n)")
    edges = []
    for ell in range(kappa):
        shifted = sigma[(np.arange(n) + ell) % n]
        edges.extend(zip(sigma.tolist(), rho[shifted].tolist()))
    edges = tuple(sorted(edges))
    inst = BipartiteInstance(x, y, p, connected_kfactor(kappa) if kappa >= 2
                             else MATCHING)
    return Solution(edges, cost(inst, edges))


def solution_to_csv(path, instance: BipartiteInstance, solution: Solution) -> None:
    """Edge list as ``side1_index,side2_index`` rows under a metadata header."""
    with open(path, "w") as fh:
        fh.write(f"# kind={instance.kind.label()} n={instance.n} m={instance.m} "
                 f"p={instance.p} cost={solution.cost!r}\n")
        fh.write("side1_index,side2_index\n")
        for i, j in solution.edges:
            fh.write(f"{i},{j}\n")


def solution_from_csv(path) -> tuple[dict, Solution]:
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("missing metadata header")
        meta = dict(part.split("=", 1) for part in header[1:].split())
        columns = fh.readline().strip()
        if columns != "side1_index,side2_index":
            raise ValueError("bad column header")
        edges = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j = line.split(",")
            edges.append((int(i), int(j)))
    return meta, Solution(tuple(edges), float(meta["cost"]))
