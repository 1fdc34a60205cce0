import math

import numpy as np
import pytest
from scipy.stats import chisquare

from ebopt.geometry import Cube
from ebopt.sampling import (
    HolderDensity,
    SeededRng,
    UniformDensity,
    iid_sample,
    poisson_process,
    read_density_grid,
    thin,
    write_density_grid,
)


@pytest.fixture
def unit_uniform():
    return UniformDensity(Cube.make(1, dim=3))


class TestSeededRng:
    def test_streams_are_pure_functions(self):
        a = SeededRng(123).stream(7).random(5)
        b = SeededRng(123).stream(7).random(5)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = SeededRng(123).stream(0).random(5)
        b = SeededRng(123).stream(1).random(5)
        assert not np.array_equal(a, b)

    def test_bit_identical_sampling(self, unit_uniform):
        x1 = iid_sample(unit_uniform, 100, SeededRng(5).stream(3))
        x2 = iid_sample(unit_uniform, 100, SeededRng(5).stream(3))
        assert x1.tobytes() == x2.tobytes()


class TestIidSample:
    def test_empty(self, unit_uniform):
        pts = iid_sample(unit_uniform, 0, SeededRng(0).stream(0))
        assert pts.shape == (0, 3)

    def test_uniform_mean_within_clt_bound(self, unit_uniform):
        n = 100_000
        pts = iid_sample(unit_uniform, n, SeededRng(42).stream(0))
        sigma = math.sqrt(1.0 / 12.0)
        bound = 3.0 * sigma / math.sqrt(n)
        for axis in range(3):
            assert abs(pts[:, axis].mean() - 0.5) < bound

    def test_holder_cell_frequencies(self):
        # rho(x) = 1 + 0.2 sin(2 pi x_1), normalized; 8-cell split along x_1
        d = 2
        cube = Cube.make(1, dim=d)
        dens = HolderDensity.from_callable(
            cube, lambda q: 1.0 + 0.2 * math.sin(2 * math.pi * q[0]),
            k=64, rho0=0.5)
        n = 60_000
        pts = iid_sample(dens, n, SeededRng(9).stream(0))
        # quadrature of the interpolated density per cell
        edges = np.linspace(0, 1, 9)
        fine = np.linspace(0, 1, 4097)[:-1] + 1.0 / 8192
        for k in range(8):
            sel = (fine >= edges[k]) & (fine < edges[k + 1])
            qpts = np.stack([fine[sel], np.full(sel.sum(), 0.5)], axis=1)
            # average over x_2 as well (density constant in x_2)
            p_cell = float(dens.evaluate(qpts).mean()) * (edges[k + 1] - edges[k])
            freq = float(((pts[:, 0] >= edges[k]) & (pts[:, 0] < edges[k + 1])).mean())
            tol = 4.0 * math.sqrt(p_cell * (1 - p_cell) / n)
            assert abs(freq - p_cell) < tol, (k, freq, p_cell)

    def test_holder_bounds_validated(self):
        cube = Cube.make(1, dim=1)
        with pytest.raises(ValueError):
            HolderDensity(cube, np.array([3.0, 0.1]), rho0=0.5)

    def test_rejection_acceptance_rate(self):
        cube = Cube.make(1, dim=2)
        rho0 = 0.5
        dens = HolderDensity.from_callable(
            cube, lambda q: 1.0 + 0.4 * math.sin(2 * math.pi * q[0]),
            k=32, rho0=rho0)
        gen = SeededRng(3).stream(1)
        proposals = gen.random((10_000, 2))
        acc = dens.evaluate(proposals) / dens.table.max()
        rate = float(acc.mean())
        se = float(acc.std() / math.sqrt(len(acc)))
        assert rate >= rho0 - 3 * se


class TestPoissonProcess:
    def test_mean_count(self, unit_uniform):
        trials = 10_000
        rng = SeededRng(11)
        counts = [len(poisson_process(unit_uniform, 4.0, rng.stream(t)))
                  for t in range(trials)]
        assert abs(np.mean(counts) - 4.0) < 3.0 * math.sqrt(4.0 / trials)

    def test_subcell_count_independence(self):
        # counts in the 2^d dyadic subcells have vanishing covariance
        d = 2
        dens = UniformDensity(Cube.make(1, dim=d))
        trials = 4000
        rng = SeededRng(21)
        counts = np.zeros((trials, 4))
        for t in range(trials):
            pts = poisson_process(dens, 16.0, rng.stream(t))
            qx = (pts[:, 0] >= 0.5).astype(int)
            qy = (pts[:, 1] >= 0.5).astype(int)
            for c in range(4):
                counts[t, c] = np.sum((qx * 2 + qy) == c)
        for a in range(4):
            for b in range(a + 1, 4):
                cov = np.cov(counts[:, a], counts[:, b])[0, 1]
                # SE of the sample covariance of two independent Poisson(4)
                se = math.sqrt(16.0 + 4.0 * 4.0) / math.sqrt(trials)
                assert abs(cov) <= 4.0 * se, (a, b, cov)

    def test_restriction_is_poisson(self):
        # counts in a fixed subcell follow Poisson(n * vol) (chi-square, 1%)
        d = 2
        dens = UniformDensity(Cube.make(1, dim=d))
        lam = 16.0 * 0.25
        trials = 4000
        rng = SeededRng(31)
        counts = []
        for t in range(trials):
            pts = poisson_process(dens, 16.0, rng.stream(t))
            counts.append(int(np.sum((pts[:, 0] < 0.5) & (pts[:, 1] < 0.5))))
        counts = np.array(counts)
        kmax = int(counts.max())
        observed = np.bincount(counts, minlength=kmax + 1).astype(float)
        from scipy.stats import poisson as poisson_dist
        expected = poisson_dist.pmf(np.arange(kmax + 1), lam) * trials
        # merge the tail so expected counts stay above 5
        while expected[-1] < 5 and len(expected) > 2:
            expected[-2] += expected[-1]
            observed[-2] += observed[-1]
            expected = expected[:-1]
            observed = observed[:-1]
        expected *= observed.sum() / expected.sum()
        stat, pvalue = chisquare(observed, expected)
        assert pvalue > 0.01


class TestThin:
    def test_eta_zero_and_one(self, unit_uniform):
        pts = iid_sample(unit_uniform, 50, SeededRng(1).stream(0))
        kept, removed = thin(pts, 0.0, SeededRng(1).stream(1))
        assert len(removed) == 0 and len(kept) == 50
        kept, removed = thin(pts, 1.0, SeededRng(1).stream(2))
        assert len(kept) == 0 and len(removed) == 50

    def test_multiset_conservation_and_order(self, unit_uniform):
        pts = iid_sample(unit_uniform, 200, SeededRng(2).stream(0))
        kept, removed = thin(pts, 0.4, SeededRng(2).stream(1))
        assert len(kept) + len(removed) == len(pts)
        merged = sorted(map(tuple, np.vstack([kept, removed])))
        assert merged == sorted(map(tuple, pts))
        # relative order preserved within each output
        idx_kept = [np.nonzero((pts == k).all(axis=1))[0][0] for k in kept[:10]]
        assert idx_kept == sorted(idx_kept)

    def test_thinning_statistics(self):
        # eta-thinned Poisson processes have independent counts
        dens = UniformDensity(Cube.make(1, dim=2))
        trials = 1000
        rng = SeededRng(7)
        k_counts, r_counts = [], []
        for t in range(trials):
            pts = poisson_process(dens, 1000.0, rng.stream(2 * t))
            kept, removed = thin(pts, 0.3, rng.stream(2 * t + 1))
            k_counts.append(len(kept))
            r_counts.append(len(removed))
        mean_removed = np.mean(r_counts)
        se = math.sqrt(300.0 / trials)  # removed counts are Poisson(300)
        assert abs(mean_removed - 300.0) < 3.0 * se
        corr = np.corrcoef(k_counts, r_counts)[0, 1]
        assert abs(corr) <= 4.0 / math.sqrt(trials)

    def test_eta_validated(self, unit_uniform):
        pts = iid_sample(unit_uniform, 5, SeededRng(0).stream(0))
        with pytest.raises(ValueError):
            thin(pts, 1.5, SeededRng(0).stream(1))


class TestDensityGridIO:
    def test_roundtrip(self, tmp_path):
        cube = Cube.make(1, dim=2)
        dens = HolderDensity.from_callable(
            cube, lambda q: 1.0 + 0.2 * math.sin(2 * math.pi * q[0]),
            k=8, rho0=0.5)
        path = tmp_path / "grid.csv"
        write_density_grid(path, dens)
        back = read_density_grid(path, cube)
        assert np.array_equal(back.table, dens.table)
        assert back.rho0 == dens.rho0
