"""Cross-checks of the compiled sweep against the reference updates and
external distributions."""

import numpy as np
import pytest
from scipy.stats import beta as beta_dist
from scipy.stats import kstest

from genemix import _kernels
from genemix.hypotheses import ClusteringPartition, clustering_distance
from genemix.mixture import BetaHyper, MixtureState, gibbs_cycle


def exact_urn_tau_distribution(M, alpha):
    """P(tau = t) under the urn prior, via unsigned Stirling numbers."""
    from fractions import Fraction

    row = [Fraction(0)] * (M + 1)
    row[0] = Fraction(1)
    for n in range(1, M + 1):
        new = [Fraction(0)] * (M + 1)
        for k in range(1, n + 1):
            new[k] = row[k - 1] + (n - 1) * row[k]
        row = new
    w = np.array([float(row[t]) * alpha ** t for t in range(M + 1)])
    return w / w.sum()


class TestStreamDeterminism:
    def test_same_key_same_stream(self):
        k1 = _kernels.derive_key(5, 2, 100, 0, 1, 3)
        k2 = _kernels.derive_key(5, 2, 100, 0, 1, 3)
        assert int(k1) == int(k2)
        s1, u1 = _kernels._u01(k1)
        s2, u2 = _kernels._u01(k2)
        assert u1 == u2 and int(s1) == int(s2)

    def test_distinct_coordinates_distinct_keys(self):
        keys = set()
        for t in range(50):
            for k in (0, 1):
                for j in range(3):
                    for i in range(10):
                        keys.add(int(_kernels.derive_key(7, 2, t, k, j, i)))
        assert len(keys) == 50 * 2 * 3 * 10

    def test_uniform_moments(self):
        s = _kernels.derive_key(1, 1, 1, 0, 0, 0)
        us = np.empty(100_000)
        for i in range(us.size):
            s, u = _kernels._u01(s)
            us[i] = u
        assert abs(us.mean() - 0.5) < 3 * np.sqrt(1 / 12 / us.size)
        assert kstest(us, "uniform").pvalue > 0.001


class TestBetaDraw:
    @pytest.mark.parametrize("a,b", [(1.0, 1.0), (0.5, 2.0), (10.0, 3.0),
                                     (200.0, 1.0), (0.05, 0.05), (2.0, 7.0)])
    def test_moments_match_theory(self, a, b):
        s = _kernels.derive_key(9, 3, 0, 0, 0, 0)
        n = 100_000
        draws = np.empty(n)
        for i in range(n):
            s, x = _kernels._beta_draw(s, a, b)
            draws[i] = x
        mean_se = np.sqrt(beta_dist.var(a, b) / n)
        assert abs(draws.mean() - a / (a + b)) < 4 * mean_se
        var = draws.var()
        assert abs(var - beta_dist.var(a, b)) < 0.1 * beta_dist.var(a, b) + 1e-6

    def test_kolmogorov_smirnov(self):
        s = _kernels.derive_key(10, 3, 0, 0, 0, 0)
        draws = np.empty(50_000)
        for i in range(draws.size):
            s, x = _kernels._beta_draw(s, 2.5, 4.0)
            draws[i] = x
        assert kstest(draws, lambda q: beta_dist.cdf(q, 2.5, 4.0)).pvalue > 0.001

    def test_extreme_shapes_stay_in_open_interval(self):
        s = _kernels.derive_key(11, 3, 0, 0, 0, 0)
        for a, b in [(1e-10, 1e-10), (1e-8, 5.0), (5.0, 1e-8), (1e13, 1.0)]:
            for _ in range(200):
                s, x = _kernels._beta_draw(s, a, b)
                assert 0.0 < x < 1.0


class TestSweepTriplet:
    def test_stationary_tau_matches_exact_urn_prior(self):
        # With a single record per mixture, the partition posterior equals
        # the urn prior exactly, whatever the data; the chain's tau
        # marginal must reproduce the closed-form distribution.
        M, L, alpha = 5, 3, 1.5
        n1 = np.array([2.0, 0.0, 1.0])
        nu1 = np.full(L, 1.0)
        nu2 = np.full(L, 1.0)
        c = np.zeros(M, dtype=np.int64)
        occ = np.zeros(M, dtype=np.int64)
        occ[0] = M
        pstar = np.full((M, L), 0.5)
        z, tau = 0, 1
        n_iter = 40_000
        taus = np.empty(n_iter, dtype=np.int64)
        for t in range(n_iter):
            key = _kernels.derive_key(21, _kernels.TAG_SWEEP, t, 0, 0, 0)
            z, tau = _kernels.sweep_triplet(n1, nu1, nu2, alpha, z, c, pstar, occ, tau, key)
            taus[t] = tau
        exact = exact_urn_tau_distribution(M, alpha)[1:]
        freq = np.bincount(taus, minlength=M + 1)[1:] / n_iter
        # tau decorrelates within a few sweeps; allow a generous factor
        # on the iid standard error
        for t in range(M):
            se = np.sqrt(exact[t] * (1 - exact[t]) / n_iter)
            assert abs(freq[t] - exact[t]) < 6 * se + 1e-4, (t + 1, freq, exact)

    def test_matches_reference_implementation_distribution(self):
        # same model run through the numpy reference ops: the stationary
        # tau histograms must agree
        M, L, alpha = 4, 2, 2.0
        dosage = np.array([1.0, 2.0])
        hyper = BetaHyper(nu1=np.array([0.8, 1.3]), nu2=np.array([1.1, 0.6]))

        n1 = dosage.copy()
        c = np.zeros(M, dtype=np.int64)
        occ = np.zeros(M, dtype=np.int64)
        occ[0] = M
        pstar = np.full((M, L), 0.5)
        z, tau = 0, 1
        n_iter = 30_000
        tau_kernel = np.empty(n_iter, dtype=np.int64)
        for t in range(n_iter):
            key = _kernels.derive_key(31, _kernels.TAG_SWEEP, t, 0, 0, 0)
            z, tau = _kernels.sweep_triplet(n1, hyper.nu1, hyper.nu2, alpha,
                                            z, c, pstar, occ, tau, key)
            tau_kernel[t] = tau

        rng = np.random.default_rng(17)
        state = MixtureState.from_single_draw((0, 0, 0), M, hyper, rng)
        tau_ref = np.empty(n_iter, dtype=np.int64)
        for t in range(n_iter):
            gibbs_cycle(state, dosage, alpha, hyper, rng)
            tau_ref[t] = state.tau

        fk = np.bincount(tau_kernel, minlength=M + 1)[1:] / n_iter
        fr = np.bincount(tau_ref, minlength=M + 1)[1:] / n_iter
        assert np.abs(fk - fr).max() < 0.015

    def test_state_invariants_hold(self):
        M, L, alpha = 6, 3, 1.0
        n1 = np.array([0.0, 2.0, 1.0])
        nu1 = np.array([0.5, 2.0, 1.0])
        nu2 = np.array([1.5, 0.7, 1.0])
        c = np.zeros(M, dtype=np.int64)
        occ = np.zeros(M, dtype=np.int64)
        occ[0] = M
        pstar = np.full((M, L), 0.5)
        z, tau = 0, 1
        for t in range(2000):
            key = _kernels.derive_key(41, _kernels.TAG_SWEEP, t, 1, 2, 3)
            z, tau = _kernels.sweep_triplet(n1, nu1, nu2, alpha, z, c, pstar, occ, tau, key)
            assert 0 <= z < M
            assert occ[:tau].sum() == M
            assert (occ[tau:] == 0).all()
            assert np.array_equal(np.unique(c), np.arange(tau))
            assert ((pstar[:tau] > 0) & (pstar[:tau] < 1)).all()


class TestRedrawRecord:
    def test_binomial_given_frequency(self):
        M, L = 3, 2
        c = np.array([0, 1, 1], dtype=np.int64)
        pstar = np.array([[0.9, 0.1], [0.5, 0.5], [0.0, 0.0]])
        out = np.empty(L)
        draws = np.empty((20_000, L))
        for t in range(draws.shape[0]):
            key = _kernels.derive_key(51, _kernels.TAG_REDRAW, t, 0, 0, 0)
            _kernels.redraw_record(0, c, pstar, key, out)
            draws[t] = out
        means = draws.mean(axis=0)
        assert abs(means[0] - 2 * 0.9) < 0.02
        assert abs(means[1] - 2 * 0.1) < 0.02
        assert set(np.unique(draws)) <= {0.0, 1.0, 2.0}


class TestClusteringKernels:
    def test_dhat_matches_python_reference(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            M = int(rng.integers(2, 31))
            l1 = rng.integers(0, rng.integers(1, M + 1), size=M)
            l2 = rng.integers(0, rng.integers(1, M + 1), size=M)
            p1 = ClusteringPartition(labels=l1)
            p2 = ClusteringPartition(labels=l2)
            got = _kernels.dhat_labels(p1.labels, p2.labels, p1.n_blocks, p2.n_blocks)
            # independent contingency-based reference
            ct = np.zeros((p1.n_blocks, p2.n_blocks))
            for a, b in zip(p1.labels, p2.labels):
                ct[a, b] += 1
            ref = max(1 - ct.max(axis=1).sum() / M, 1 - ct.max(axis=0).sum() / M)
            assert got == pytest.approx(ref)
            assert got == pytest.approx(clustering_distance(p1, p2))

    def test_central_index_matches_bruteforce(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            n, M = int(rng.integers(1, 9)), int(rng.integers(2, 9))
            parts = [ClusteringPartition(labels=rng.integers(0, M, size=M))
                     for _ in range(n)]
            labels = np.stack([p.labels for p in parts])
            blocks = np.array([p.n_blocks for p in parts], dtype=np.int64)
            dm = np.array([[clustering_distance(a, b) for b in parts] for a in parts])
            for radius in (0.2, 0.5, 0.9):
                got = _kernels.central_index_from_labels(labels, blocks, radius)
                counts = (dm < radius).sum(axis=1)
                assert counts[got] == counts.max()
                assert got == int(np.argmax(counts))
