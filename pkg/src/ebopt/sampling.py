"""Random point generation: i.i.d. samples, Poisson point processes, thinning.

All randomness flows through :class:`SeededRng`, which derives independent
counter-based (Philox) streams from a master seed and a stream index, so a
trial's points depend only on ``(master_seed, index)`` and never on thread
or process scheduling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .geometry import Box, Cube, InvalidDomainError

__all__ = [
    "SeededRng",
    "UniformDensity",
    "HolderDensity",
    "iid_sample",
    "poisson_process",
    "thin",
    "read_density_grid",
    "write_density_grid",
]


@dataclass(frozen=True)
class SeededRng:
    """Master seed plus a pure stream-derivation rule."""

    master_seed: int

    def stream(self, index: int) -> np.random.Generator:
        """Generator for stream ``index``; a pure function of (seed, index)."""
        seq = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(index,))
        return np.random.Generator(np.random.Philox(seq))


def _domain_box(domain) -> Box:
    if isinstance(domain, Cube):
        return domain.box()
    if isinstance(domain, Box):
        return domain
    raise InvalidDomainError(f"unsupported sampling domain {domain!r}")


@dataclass(frozen=True)
class UniformDensity:
    """Uniform probability density on a cube (or box) domain."""

    domain: Cube

    @property
    def dim(self) -> int:
        return self.domain.dim

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        box = _domain_box(self.domain)
        lo = np.array([float(v) for v in box.lo])
        hi = np.array([float(v) for v in box.hi])
        return lo + (hi - lo) * gen.random((n, box.dim))


class HolderDensity:
    """Probability density given by a value table on a k^d grid over a cube,
    evaluated by multilinear interpolation of the cell-center values.

    ``rho0 <= rho <= 1/rho0`` must hold on the grid and the interpolated
    density must integrate to 1 within 1e-6 (midpoint quadrature at twice
    the table resolution).
    """

    def __init__(self, domain: Cube, table: np.ndarray, rho0: float,
                 holder_alpha: float = 1.0):
        table = np.asarray(table, dtype=float)
        if table.ndim != domain.dim:
            raise ValueError("table rank must equal the domain dimension")
        if not (0 < rho0 <= 1):
            raise ValueError("rho0 must lie in (0, 1]")
        if table.min() < rho0 - 1e-12 or table.max() > 1.0 / rho0 + 1e-12:
            raise ValueError("table violates rho0 <= rho <= 1/rho0")
        self.domain = domain
        self.table = table
        self.rho0 = float(rho0)
        self.holder_alpha = float(holder_alpha)
        err = abs(self.integral() - 1.0)
        if err > 1e-6:
            raise ValueError(f"density integrates to 1 +/- {err:.2e} > 1e-6")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @staticmethod
    def from_callable(domain: Cube, func, k: int, rho0: float,
                      holder_alpha: float = 1.0) -> "HolderDensity":
        """Tabulate ``func`` on cell centers and renormalize to integral 1."""
        d = domain.dim
        side = float(domain.side)
        origin = np.array([float(v) for v in domain.origin])
        centers = (np.arange(k) + 0.5) / k * side
        grids = np.meshgrid(*[centers + origin[i] for i in range(d)], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        vals = np.array([func(p) for p in pts], dtype=float).reshape((k,) * d)
        dens = HolderDensity.__new__(HolderDensity)
        dens.domain = domain
        dens.table = vals
        dens.rho0 = rho0
        dens.holder_alpha = holder_alpha
        scale = dens.integral()
        return HolderDensity(domain, vals / scale, rho0, holder_alpha)

    def _to_unit(self, points: np.ndarray) -> np.ndarray:
        origin = np.array([float(v) for v in self.domain.origin])
        return (points - origin) / float(self.domain.side)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of the table at ``points`` (absolute
        coordinates); the table is clamped at the domain face."""
        u = np.clip(self._to_unit(np.atleast_2d(points)), 0.0, 1.0)
        k = self.table.shape[0]
        g = u * k - 0.5
        i0 = np.clip(np.floor(g).astype(int), 0, k - 1)
        i1 = np.clip(i0 + 1, 0, k - 1)
        w = np.clip(g - i0, 0.0, 1.0)
        d = self.dim
        out = np.zeros(len(u))
        for corner in range(2 ** d):
            idx = []
            weight = np.ones(len(u))
            for ax in range(d):
                if corner >> ax & 1:
                    idx.append(i1[:, ax])
                    weight *= w[:, ax]
                else:
                    idx.append(i0[:, ax])
                    weight *= 1.0 - w[:, ax]
            out += weight * self.table[tuple(idx)]
        return out

    def integral(self, refine: int = 2) -> float:
        k = self.table.shape[0] * refine
        centers = (np.arange(k) + 0.5) / k
        grids = np.meshgrid(*[centers] * self.dim, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        origin = np.array([float(v) for v in self.domain.origin])
        side = float(self.domain.side)
        vol = side ** self.dim
        return float(self.evaluate(origin + side * pts).mean() * vol)

    def sample(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """Rejection sampling against the uniform envelope scaled by the
        table supremum (multilinear interpolation never exceeds it)."""
        box = _domain_box(self.domain)
        lo = np.array([float(v) for v in box.lo])
        hi = np.array([float(v) for v in box.hi])
        envelope = float(self.table.max())
        out = np.empty((n, self.dim))
        filled = 0
        while filled < n:
            want = n - filled
            batch = max(32, int(1.2 * want * envelope * float(box.volume_exact())))
            props = lo + (hi - lo) * gen.random((batch, self.dim))
            accept = gen.random(batch) * envelope <= self.evaluate(props)
            take = props[accept][: n - filled]
            out[filled: filled + len(take)] = take
            filled += len(take)
        return out


def iid_sample(density, n: int, gen: np.random.Generator) -> np.ndarray:
    """n i.i.d. points from the density; shape (n, d)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return np.empty((0, density.dim))
    return density.sample(n, gen)


def poisson_process(density, n: float, gen: np.random.Generator) -> np.ndarray:
    """Poisson point process with intensity n * density: draws N ~ Poisson(n)
    and then N i.i.d. points from the density."""
    if n <= 0:
        raise ValueError("intensity scale must be positive")
    count = int(gen.poisson(n))
    return iid_sample(density, count, gen)


def thin(points: np.ndarray, eta: float,
         gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Independent Bernoulli split: each point goes to ``removed`` with
    probability eta. Both outputs preserve the input's relative order, and
    kept + removed recover the input as a multiset."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    points = np.asarray(points)
    drop = gen.random(len(points)) < eta
    return points[~drop], points[drop]


def write_density_grid(path, density: HolderDensity) -> None:
    """CSV ``i_1,...,i_d,value`` preceded by a header line
    ``grid d k rho0 alpha``."""
    k = density.table.shape[0]
    with open(path, "w", newline="") as fh:
        fh.write(f"grid {density.dim} {k} {density.rho0} {density.holder_alpha}\n")
        writer = csv.writer(fh)
        for idx in np.ndindex(density.table.shape):
            writer.writerow(list(idx) + [repr(float(density.table[idx]))])


def read_density_grid(path, domain: Cube) -> HolderDensity:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5 or header[0] != "grid":
            raise ValueError("bad density grid header")
        d, k = int(header[1]), int(header[2])
        rho0, alpha = float(header[3]), float(header[4])
        if d != domain.dim:
            raise ValueError("grid dimension does not match the domain")
        table = np.zeros((k,) * d)
        for row in csv.reader(fh):
            if not row:
                continue
            idx = tuple(int(v) for v in row[:d])
            table[idx] = float(row[d])
    return HolderDensity(domain, table, rho0, alpha)
