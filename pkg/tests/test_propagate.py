import logging

import networkx as nx
import numpy as np
import pytest
import scipy.sparse as sp

from gne import estimate as E
from gne import propagate as P
from gne.emphasis import WalkConfig
from gne.graph import LabelSet, PriorSet, from_edges, initial_beliefs, sample_priors, spectral_radius


def random_instance(seed, max_nc=200):
    """Random symmetric weighted matrix, residual priors and a residual compatibility matrix."""
    rng = np.random.default_rng(seed)
    c = int(rng.integers(2, 6))
    n = int(rng.integers(4, max_nc // c + 1))
    dens = rng.uniform(0.1, 0.5)
    a = sp.random(n, n, density=dens, random_state=rng)
    a = sp.triu(a, 1)
    a = (a + a.T).tocsr()
    disp = E._row_normalize(rng.uniform(0, 1, size=(c, c)) ** 3)
    h = E.to_residual(disp)
    e = np.zeros((n, c))
    obs = rng.choice(n, size=max(1, n // 4), replace=False)
    e[obs] = -1.0 / c
    e[obs, rng.integers(0, c, obs.size)] += 1.0
    return a, h, e


def dense_fixed_point(a, h, e, f):
    n, c = e.shape
    lhs = np.eye(n * c) - f * np.kron(h.T, a.toarray())
    vec = np.linalg.solve(lhs, e.reshape(-1, order="F"))
    return vec.reshape(n, c, order="F")


class TestPropagate:
    @pytest.mark.parametrize("seed", range(10))
    def test_dense_oracle(self, seed):
        a, h, e = random_instance(seed)
        cfg = P.PropagationConfig(l1_threshold=1e-12, max_iter=5000)
        res = P.propagate(a, h, e, cfg)
        if res.rho == 0:
            pytest.skip("empty matrix")
        expected = dense_fixed_point(a, h, e, res.f)
        np.testing.assert_allclose(res.beliefs - 1 / e.shape[1], expected, atol=1e-6)

    def test_zero_compatibility(self):
        a, _, e = random_instance(1)
        res = P.propagate(a, np.zeros((e.shape[1],) * 2), e)
        np.testing.assert_allclose(res.beliefs, e + 1 / e.shape[1])
        assert res.iterations >= 1

    def test_edgeless(self):
        e = np.array([[0.5, -0.5], [0.0, 0.0]])
        res = P.propagate(sp.csr_matrix((2, 2)), E.centered_identity(2), e)
        np.testing.assert_allclose(res.beliefs, e + 0.5)
        assert res.rho == 0.0

    def test_isolated_prior_keeps_one_hot(self):
        g = from_edges(np.array([[0, 1], [1, 2], [2, 0]]), n=4)
        lab = LabelSet(labels=np.array([0, 1, 0, 1]), classes=("a", "b"))
        pri = PriorSet(nodes=np.array([0, 3]), fraction=0.5, seed=None)
        e = initial_beliefs(pri, lab)
        res = P.propagate(g.adjacency, E.centered_identity(2), e)
        np.testing.assert_array_equal(res.beliefs[3], [0.0, 1.0])

    def test_at_least_one_iteration(self):
        a, h, e = random_instance(2)
        res = P.propagate(a, h, e, P.PropagationConfig(l1_threshold=1e9))
        assert res.iterations == 1
        assert res.converged

    def test_max_iter_guard(self, caplog):
        a, h, e = random_instance(3)
        with caplog.at_level(logging.WARNING):
            res = P.propagate(a, h, e, P.PropagationConfig(l1_threshold=1e-300, max_iter=3))
        assert res.iterations == 3
        assert not res.converged
        assert "without converging" in caplog.text

    @pytest.mark.parametrize("seed", range(20))
    def test_geometric_decay(self, seed):
        a, h, e = random_instance(100 + seed)
        rho = spectral_radius(a)
        if rho == 0 or not np.any(e):
            pytest.skip("trivial instance")
        h = h * P.unit_radius_scale(h)
        deltas = [d for _, d in P.iterate(a, h, e, 0.9 / rho, 60)]
        tail = np.array(deltas[10:])
        tail = tail[tail > 1e-12]
        if tail.size < 5:
            return
        # deltas may oscillate step to step; the log-linear trend must fall
        slope = np.polyfit(np.arange(tail.size), np.log(tail), 1)[0]
        assert slope < 0
        assert tail[-1] < tail[0]

    def test_divergence_witness(self):
        g = from_edges(np.array(list(nx.random_regular_graph(4, 40, seed=0).edges())))
        a = g.adjacency
        rho = spectral_radius(a)
        h = 0.95 * E.centered_identity(3)  # rho(h) = 0.95, so f * rho(A) * rho(h) = 1.9
        e = np.zeros((40, 3))
        e[:5] = -1 / 3
        e[np.arange(5), np.arange(5) % 3] += 1
        deltas = [d for _, d in P.iterate(a, h, e, 2.0 / rho, 40)]
        assert deltas[-1] > 100 * deltas[0]

    @pytest.mark.slow
    def test_linear_scaling_per_iteration(self):
        import time

        from gne import synth

        h_mix = synth._tup(synth._xophily_h())
        times = []
        for m in (50_000, 100_000, 200_000, 400_000):
            g, lab = synth.generate(synth.GeneratorSpec((1000,) * 6, h_mix, m, 0.1, 0))
            e = initial_beliefs(sample_priors(lab, 0.05, 0), lab)
            h = E.centered_identity(6)
            runs = []
            for _ in range(5):
                t0 = time.perf_counter()
                for _ in P.iterate(g.adjacency, h, e, 0.9 / 50, 20):
                    pass
                runs.append(time.perf_counter() - t0)
            times.append(np.median(runs))
        ratios = np.array(times[1:]) / np.array(times[:-1])
        assert np.all((ratios >= 1.3) & (ratios <= 3.0)), ratios

    def test_invalid_config(self):
        for kwargs in ({"f_safety": 1.0}, {"f_safety": 0.0}, {"l1_threshold": 0}, {"max_iter": 0}):
            with pytest.raises(ValueError):
                P.PropagationConfig(**kwargs)

    def test_predict_ties_low_id(self):
        assert P.predict(np.array([[0.5, 0.5], [0.2, 0.8]])).tolist() == [0, 1]

    def test_unit_radius_scale(self):
        h = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert P.unit_radius_scale(h) == pytest.approx(0.5)
        assert P.unit_radius_scale(np.zeros((2, 2))) == 1.0


def _toy():
    gx = nx.disjoint_union(nx.complete_bipartite_graph(15, 15), nx.complete_bipartite_graph(15, 15))
    g = from_edges(np.array(list(gx.edges())))
    lab = LabelSet(labels=np.array(([0] * 15 + [1] * 15) * 2), classes=("x", "y"))
    return g, lab


class TestClassify:
    def test_heterophilous_toy(self):
        g, lab = _toy()
        pri = sample_priors(lab, 0.2, 0, stratified=True)
        res = P.classify(g, lab, pri, walk_config=WalkConfig(rank=16))
        held = np.setdiff1d(lab.labeled, pri.nodes)
        assert np.mean(res.predictions[held] == lab.labels[held]) == 1.0
        assert set(res.report["timings"]) == {"emphasis", "estimate", "spectral_radius", "propagate"}

    def test_hom_mode_fails_on_heterophily(self):
        g, lab = _toy()
        pri = sample_priors(lab, 0.2, 0, stratified=True)
        res = P.classify(g, lab, pri, walk_config=WalkConfig(rank=16), mode="neteffect_hom")
        held = np.setdiff1d(lab.labeled, pri.nodes)
        assert np.mean(res.predictions[held] == lab.labels[held]) < 0.5
        np.testing.assert_allclose(res.hstar, E.centered_identity(2))

    def test_no_emphasis_equals_adjacency_mode(self):
        g, lab = _toy()
        pri = sample_priors(lab, 0.2, 1)
        a = P.classify(g, lab, pri, mode="neteffect", use_emphasis=False)
        b = P.classify(g, lab, pri, mode="neteffect_a", use_emphasis=False)
        np.testing.assert_array_equal(a.beliefs, b.beliefs)

    def test_propagated_matrix_unit_radius(self):
        g, lab = _toy()
        pri = sample_priors(lab, 0.3, 0)
        for mode in P.MODES:
            res = P.classify(g, lab, pri, walk_config=WalkConfig(rank=16), mode=mode)
            assert np.max(np.abs(np.linalg.eigvals(res.hstar))) == pytest.approx(1.0)

    def test_unknown_mode(self):
        g, lab = _toy()
        with pytest.raises(ValueError):
            P.classify(g, lab, sample_priors(lab, 0.2, 0), mode="other")

    def test_estimation_priors_override(self):
        g, lab = _toy()
        pri = sample_priors(lab, 0.1, 0)
        wide = sample_priors(lab, 0.5, 0)
        a = P.classify(g, lab, pri, use_emphasis=False, mode="neteffect_ec")
        b = P.classify(g, lab, pri, use_emphasis=False, mode="neteffect_ec", estimation_priors=wide)
        assert a.report["mode"] == b.report["mode"] == "neteffect_ec"
        np.testing.assert_allclose(b.hstar, np.array([[-0.5, 0.5], [0.5, -0.5]]))
