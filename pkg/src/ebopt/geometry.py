"""Domains, cube grids, and Whitney-type partitions.

Coordinates of domain boxes and partition cells are dyadic rationals kept as
:class:`fractions.Fraction`, so disjointness, coverage, and the Whitney
distance comparisons are decided exactly; floats appear only in the reported
``diameter``/``volume`` fields, rounded once at output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "Box",
    "Cube",
    "Polycube",
    "Cell",
    "Partition",
    "WhitneyConstants",
    "InvalidDomainError",
    "grid_partition",
    "whitney_partition",
    "partition_sum",
    "read_polycube",
    "write_polycube",
]


class InvalidDomainError(ValueError):
    """Domain does not meet an operation's requirements."""


def _as_dyadic(value) -> Fraction:
    f = Fraction(value)
    den = f.denominator
    if den & (den - 1) != 0:
        raise InvalidDomainError(f"coordinate {value!r} is not a dyadic rational")
    return f


@dataclass(frozen=True)
class Box:
    """Axis-aligned box prod_i (lo_i, hi_i) with dyadic rational corners."""

    lo: tuple[Fraction, ...]
    hi: tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise InvalidDomainError("lo/hi dimension mismatch")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise InvalidDomainError("box has empty side")

    @staticmethod
    def make(lo: Sequence, hi: Sequence) -> "Box":
        return Box(tuple(_as_dyadic(v) for v in lo), tuple(_as_dyadic(v) for v in hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def sides(self) -> tuple[Fraction, ...]:
        return tuple(h - l for l, h in zip(self.lo, self.hi))

    def volume_exact(self) -> Fraction:
        v = Fraction(1)
        for s in self.sides:
            v *= s
        return v

    def diameter_sq_exact(self) -> Fraction:
        return sum((s * s for s in self.sides), Fraction(0))

    def diameter(self) -> float:
        return math.sqrt(float(self.diameter_sq_exact()))

    def center(self) -> tuple[Fraction, ...]:
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))

    def is_cube(self) -> bool:
        s = self.sides
        return all(x == s[0] for x in s)

    def contains_box(self, other: "Box") -> bool:
        return all(sl <= ol and oh <= sh
                   for sl, sh, ol, oh in zip(self.lo, self.hi, other.lo, other.hi))

    def intersection_volume(self, other: "Box") -> Fraction:
        v = Fraction(1)
        for l1, h1, l2, h2 in zip(self.lo, self.hi, other.lo, other.hi):
            w = min(h1, h2) - max(l1, l2)
            if w <= 0:
                return Fraction(0)
            v *= w
        return v

    def dist_sq_to_point(self, point: Sequence[Fraction]) -> Fraction:
        total = Fraction(0)
        for l, h, c in zip(self.lo, self.hi, point):
            if c < l:
                gap = l - c
            elif c > h:
                gap = c - h
            else:
                continue
            total += gap * gap
        return total


@dataclass(frozen=True)
class Cube:
    """Cube domain of a given side with an origin corner."""

    side: Fraction
    origin: tuple[Fraction, ...]

    @staticmethod
    def make(side, origin: Sequence = None, dim: int = None) -> "Cube":
        s = _as_dyadic(side)
        if origin is None:
            if dim is None:
                raise InvalidDomainError("need origin or dim")
            origin = (Fraction(0),) * dim
        return Cube(s, tuple(_as_dyadic(v) for v in origin))

    @property
    def dim(self) -> int:
        return len(self.origin)

    def box(self) -> Box:
        return Box(self.origin, tuple(o + self.side for o in self.origin))


@dataclass(frozen=True)
class Polycube:
    """Union of pairwise disjoint axis-aligned dyadic boxes."""

    boxes: tuple[Box, ...]

    def __post_init__(self):
        if not self.boxes:
            raise InvalidDomainError("empty polycube")
        d = self.boxes[0].dim
        if any(b.dim != d for b in self.boxes):
            raise InvalidDomainError("mixed dimensions in polycube")
        for i in range(len(self.boxes)):
            for j in range(i + 1, len(self.boxes)):
                if self.boxes[i].intersection_volume(self.boxes[j]) > 0:
                    raise InvalidDomainError("polycube boxes overlap")

    @staticmethod
    def make(boxes: Iterable[tuple[Sequence, Sequence]]) -> "Polycube":
        return Polycube(tuple(Box.make(lo, hi) for lo, hi in boxes))

    @staticmethod
    def from_cube(cube: Cube) -> "Polycube":
        return Polycube((cube.box(),))

    @property
    def dim(self) -> int:
        return self.boxes[0].dim

    def volume_exact(self) -> Fraction:
        return sum((b.volume_exact() for b in self.boxes), Fraction(0))

    def is_connected(self) -> bool:
        """Connectivity through shared positive-area faces of the boxes."""
        n = len(self.boxes)
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i in range(n):
            for j in range(i + 1, n):
                if _boxes_share_face(self.boxes[i], self.boxes[j]):
                    ri, rj = find(i), find(j)
                    parent[ri] = rj
        return len({find(i) for i in range(n)}) == 1


def _boxes_share_face(a: Box, b: Box) -> bool:
    touching_axis = None
    for ax, (l1, h1, l2, h2) in enumerate(zip(a.lo, a.hi, b.lo, b.hi)):
        lo, hi = max(l1, l2), min(h1, h2)
        if lo > hi:
            return False
        if lo == hi:
            if touching_axis is not None:
                return False  # touch only along an edge or corner
            touching_axis = ax
    return touching_axis is not None


@dataclass(frozen=True)
class Cell:
    box: Box
    diameter: float
    volume: float
    tag: str  # "grid" | "whitney" | "boundary"


@dataclass(frozen=True)
class WhitneyConstants:
    """Measured constants for the partition properties.

    ``dist_over_diam``: (min, max) of dist(Q, complement)/diam(Q) over
    whitney cells; ``boundary_diam_over_delta``: (min, max) of diam/delta
    over boundary cells; ``boundary_dist_sup_over_delta``: max over boundary
    cells of sup_x dist(x, complement)/delta; ``volume_over_diam_d``:
    (min, max) of |cell|/diam^d over all cells.
    """

    dist_over_diam: tuple[float, float]
    boundary_diam_over_delta: tuple[float, float]
    boundary_dist_sup_over_delta: float
    volume_over_diam_d: tuple[float, float]
    boundary_count_coefficient: float  # |R_delta| / delta^(1-d)


@dataclass(frozen=True)
class Partition:
    cells: tuple[Cell, ...]
    domain_volume: float
    whitney_constants: WhitneyConstants | None = field(default=None)

    def __len__(self) -> int:
        return len(self.cells)

    def tags(self) -> list[str]:
        return [c.tag for c in self.cells]

    def coverage_defect(self) -> float:
        total = sum(c.volume for c in self.cells)
        return abs(total - self.domain_volume) / self.domain_volume


def grid_partition(domain: Cube, m: int) -> Partition:
    """Split a cube of side m*L into m^d congruent cubes of side L.

    Cells are ordered lexicographically by integer offset.
    """
    if not isinstance(domain, Cube):
        raise InvalidDomainError("grid_partition requires a cube domain")
    if m < 1 or int(m) != m:
        raise InvalidDomainError(f"m must be a positive integer, got {m}")
    m = int(m)
    d = domain.dim
    sub = domain.side / m
    cells = []
    for flat in range(m ** d):
        idx = []
        rest = flat
        for _ in range(d):
            idx.append(rest % m)
            rest //= m
        idx.reverse()  # lexicographic in (i_1, ..., i_d)
        lo = tuple(o + k * sub for o, k in zip(domain.origin, idx))
        hi = tuple(v + sub for v in lo)
        box = Box(lo, hi)
        cells.append(Cell(box, box.diameter(), float(box.volume_exact()), "grid"))
    return Partition(tuple(cells), float(domain.box().volume_exact()))


def _complement_boxes(domain: Polycube) -> list[Box]:
    """Disjoint boxes covering an inflated bounding region minus the domain.

    The inflation margin exceeds the domain diameter, so distances from any
    interior cube to the true complement are realized inside the region.
    """
    d = domain.dim
    lo = [min(b.lo[i] for b in domain.boxes) for i in range(d)]
    hi = [max(b.hi[i] for b in domain.boxes) for i in range(d)]
    margin = max(h - l for l, h in zip(lo, hi))
    outer = Box(tuple(l - margin for l in lo), tuple(h + margin for h in hi))
    pieces = [outer]
    for hole in domain.boxes:
        nxt: list[Box] = []
        for piece in pieces:
            if piece.intersection_volume(hole) == 0:
                nxt.append(piece)
                continue
            nxt.extend(_subtract_box(piece, hole))
        pieces = nxt
    return pieces


def _subtract_box(piece: Box, hole: Box) -> list[Box]:
    """piece minus hole as disjoint boxes (axis-by-axis slab cutting)."""
    out = []
    cur_lo = list(piece.lo)
    cur_hi = list(piece.hi)
    for ax in range(piece.dim):
        l, h = cur_lo[ax], cur_hi[ax]
        hl, hh = hole.lo[ax], hole.hi[ax]
        if hl > l:
            lo = cur_lo.copy(); hi = cur_hi.copy()
            hi[ax] = hl
            out.append(Box(tuple(lo), tuple(hi)))
            cur_lo[ax] = hl
        if hh < h:
            lo = cur_lo.copy(); hi = cur_hi.copy()
            lo[ax] = hh
            out.append(Box(tuple(lo), tuple(hi)))
            cur_hi[ax] = hh
    return out


def _dist_sq_box_to_boxes(cube_lo, cube_hi, boxes: list[Box]) -> Fraction:
    best = None
    for b in boxes:
        total = Fraction(0)
        for l1, h1, l2, h2 in zip(cube_lo, cube_hi, b.lo, b.hi):
            gap = max(l2 - h1, l1 - h2)
            if gap > 0:
                total += gap * gap
        if best is None or total < best:
            best = total
            if best == 0:
                break
    return best if best is not None else Fraction(0)


def _seed_cubes(domain: Polycube) -> tuple[list[tuple[Fraction, tuple[Fraction, ...]]], Fraction]:
    """Tile the polycube exactly with equal dyadic cubes, then coalesce
    complete sibling groups bottom-up so seeds are maximal."""
    denom = 1
    for b in domain.boxes:
        for v in list(b.lo) + list(b.hi):
            denom = max(denom, v.denominator)
    min_side = min(min(b.sides) for b in domain.boxes)
    s0 = Fraction(1, denom)
    while s0 * 2 <= min_side and all(
        all((v / (s0 * 2)).denominator == 1 for v in list(b.lo) + list(b.hi))
        for b in domain.boxes
    ):
        s0 *= 2
    # exact tiling at side s0
    cubes: set[tuple[Fraction, tuple[Fraction, ...]]] = set()
    for b in domain.boxes:
        counts = [int((h - l) / s0) for l, h in zip(b.lo, b.hi)]
        if any(Fraction(c) * s0 != h - l for c, (l, h) in zip(counts, zip(b.lo, b.hi))):
            raise InvalidDomainError("polycube box not tileable by dyadic cubes")
        idx = [0] * len(counts)
        while True:
            lo = tuple(l + k * s0 for l, k in zip(b.lo, idx))
            cubes.add((s0, lo))
            for ax in range(len(counts) - 1, -1, -1):
                idx[ax] += 1
                if idx[ax] < counts[ax]:
                    break
                idx[ax] = 0
            else:
                break
    # coalesce complete sibling groups into parents
    changed = True
    while changed:
        changed = False
        by_parent: dict[tuple[Fraction, tuple[Fraction, ...]], int] = {}
        d = domain.dim
        for side, lo in cubes:
            pside = side * 2
            plo = tuple((v / pside).__floor__() * pside for v in lo)
            by_parent[(pside, plo)] = by_parent.get((pside, plo), 0) + 1
        for (pside, plo), cnt in by_parent.items():
            if cnt == 2 ** d:
                side = pside / 2
                for offs in range(2 ** d):
                    child = tuple(plo[i] + (side if offs >> i & 1 else 0) for i in range(d))
                    cubes.discard((side, child))
                cubes.add((pside, plo))
                changed = True
    return sorted(cubes), s0


def whitney_partition(domain: Polycube | Cube, delta) -> Partition:
    """Dyadic Whitney decomposition with Theta(delta)-sized boundary cells.

    Interior cubes Q (tag ``whitney``) satisfy diam(Q) <= dist(Q, complement)
    <= 4*diam(Q) exactly; a cube is accepted when its center is at distance
    >= 2*diam from the complement. Refinement stops below diameter 2*delta,
    which merges every sub-delta sibling group back into its parent cube
    (tag ``boundary``, diameter in [delta, 2*delta)).
    """
    if isinstance(domain, Cube):
        domain = Polycube.from_cube(domain)
    if not isinstance(domain, Polycube):
        raise InvalidDomainError("whitney_partition requires a polycube domain")
    if not domain.is_connected():
        raise InvalidDomainError("whitney_partition requires a connected domain")
    delta = Fraction(delta)
    if delta <= 0:
        raise InvalidDomainError("delta must be positive")
    d = domain.dim
    delta_sq = delta * delta
    complement = _complement_boxes(domain)
    seeds, _ = _seed_cubes(domain)
    if min(Fraction(d) * side * side for side, _ in seeds) < delta_sq:
        raise InvalidDomainError("delta exceeds the domain's dyadic inradius scale")

    whitney_cells: list[tuple[Fraction, tuple[Fraction, ...], Fraction]] = []
    boundary_cells: list[tuple[Fraction, tuple[Fraction, ...], Fraction]] = []
    stack = list(seeds)
    while stack:
        side, lo = stack.pop()
        hi = tuple(v + side for v in lo)
        diam_sq = Fraction(d) * side * side
        center = tuple(v + side / 2 for v in lo)
        center_dist_sq = _dist_sq_box_to_boxes(center, center, complement)
        if center_dist_sq >= 4 * diam_sq:
            dist_sq = _dist_sq_box_to_boxes(lo, hi, complement)
            whitney_cells.append((side, lo, dist_sq))
        elif diam_sq < 4 * delta_sq:  # children would fall below delta
            dist_sq = _dist_sq_box_to_boxes(lo, hi, complement)
            boundary_cells.append((side, lo, dist_sq))
        else:
            half = side / 2
            for offs in range(2 ** d):
                child = tuple(lo[i] + (half if offs >> i & 1 else 0) for i in range(d))
                stack.append((half, child))

    cells = []
    ratios = []
    bdiam = []
    bdist = []
    volratio = []
    for group, tag in ((sorted(whitney_cells), "whitney"), (sorted(boundary_cells), "boundary")):
        for side, lo, dist_sq in group:
            box = Box(lo, tuple(v + side for v in lo))
            diam_sq = box.diameter_sq_exact()
            diam = box.diameter()
            vol = float(box.volume_exact())
            cells.append(Cell(box, diam, vol, tag))
            volratio.append(vol / diam ** d)
            if tag == "whitney":
                if not (diam_sq <= dist_sq <= 16 * diam_sq):
                    raise AssertionError("whitney property violated (construction bug)")
                ratios.append(math.sqrt(float(dist_sq)) / diam)
            else:
                bdiam.append(diam / float(delta))
                # sup over x in Q of dist(x, complement) <= dist(Q) + diam
                bdist.append((math.sqrt(float(dist_sq)) + diam) / float(delta))

    n_boundary = len(boundary_cells)
    consts = WhitneyConstants(
        dist_over_diam=(min(ratios), max(ratios)) if ratios else (math.nan, math.nan),
        boundary_diam_over_delta=(min(bdiam), max(bdiam)) if bdiam else (math.nan, math.nan),
        boundary_dist_sup_over_delta=max(bdist) if bdist else math.nan,
        volume_over_diam_d=(min(volratio), max(volratio)),
        boundary_count_coefficient=n_boundary / float(delta) ** (1 - d),
    )
    return Partition(tuple(cells), float(domain.volume_exact()), consts)


def partition_sum(partition: Partition, alpha: float) -> float:
    """Sum of diam(cell)^alpha over the partition."""
    if not partition.cells:
        raise ValueError("empty partition")
    return float(sum(c.diameter ** alpha for c in partition.cells))


def read_polycube(path) -> Polycube:
    """Read a polycube file: one box per line, ``lo_1 .. lo_d hi_1 .. hi_d``
    as decimal dyadics; ``#`` starts a comment."""
    boxes = []
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            vals = line.split()
            if len(vals) % 2 != 0:
                raise InvalidDomainError(f"bad polycube line: {raw!r}")
            d = len(vals) // 2
            lo = [_as_dyadic(v) for v in vals[:d]]
            hi = [_as_dyadic(v) for v in vals[d:]]
            boxes.append(Box(tuple(lo), tuple(hi)))
    return Polycube(tuple(boxes))


def write_polycube(path, domain: Polycube) -> None:
    with open(path, "w") as fh:
        for b in domain.boxes:
            fh.write(" ".join(str(float(v)) for v in b.lo) + " "
                     + " ".join(str(float(v)) for v in b.hi) + "\n")
