import itertools
import math
from dataclasses import replace

import numpy as np
import pytest

from rdpcr.dist import (
    CapacityError,
    Channel,
    DimensionError,
    Distribution,
    TripleJoint,
    expected_distortion,
    mutual_information,
    product_extension,
    tv_distance,
)
from rdpcr.synthesis import (
    Codebook,
    SimConfig,
    _encoder_tables,
    codebook_size,
    decode,
    exact_output_law,
    exact_scheme_distortion,
    likelihood_encoder,
    run,
    sample_codebook,
    stream,
    sweep,
)


def bsc_triple(a=0.05, c=0.02, p=0.5):
    return TripleJoint(Distribution([1 - p, p]), Channel.bsc(a), Channel.bsc(c))


def high_cfg(n, **kw):
    t = bsc_triple()
    ixu, iyu = mutual_information(t.marginal("xu")), mutual_information(t.marginal("uy"))
    return SimConfig(n=n, rate=ixu + 0.5, common_rate=iyu - ixu, slack=0.05, triple=t, **kw)


def all_sequences(k, n):
    return np.array(list(itertools.product(range(k), repeat=n)))


class TestConfig:
    def test_sizes_floor(self):
        assert codebook_size(1, 0.0, 0.5) == 1
        assert codebook_size(2, 1.0, 0.5) == 8
        assert codebook_size(3, 1.0, 1 / 3) == 16  # 2^4 must not drop to 15
        cfg = SimConfig(n=2, rate=1.0, common_rate=0.0, slack=0.5, triple=bsc_triple())
        assert cfg.sizes == (8, 2)

    def test_validation(self):
        t = bsc_triple()
        with pytest.raises(ValueError):
            SimConfig(n=0, rate=1, common_rate=0, slack=0.1, triple=t)
        with pytest.raises(ValueError):
            SimConfig(n=2, rate=1, common_rate=0, slack=0.0, triple=t)
        with pytest.raises(CapacityError):
            SimConfig(n=20, rate=1, common_rate=0, slack=0.5, triple=t)
        bad = TripleJoint(Distribution([0.5, 0.5]), Channel.identity(2), Channel([[1, 0, 0], [0, 1, 0]]))
        with pytest.raises(DimensionError):
            SimConfig(n=2, rate=1, common_rate=0, slack=0.1, triple=bad)

    def test_json_roundtrip(self):
        cfg = high_cfg(3, seed=11, mc_samples=50)
        assert SimConfig.from_json(cfg.to_json()) == cfg


class TestCodebook:
    def test_single_symbol(self):
        cfg = SimConfig(n=1, rate=0.0, common_rate=0.0, slack=0.5, triple=bsc_triple())
        cb = sample_codebook(cfg)
        assert cb.entries.shape == (1, 1, 1)

    def test_point_mass_pu(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel([[1, 0], [1, 0]]), Channel([[0.5, 0.5], [0.5, 0.5]]))
        cb = sample_codebook(SimConfig(n=4, rate=1.0, common_rate=0.5, slack=0.1, triple=t))
        assert np.all(cb.entries == 0)

    def test_deterministic(self):
        cfg = high_cfg(5, seed=7)
        assert np.array_equal(sample_codebook(cfg).entries, sample_codebook(cfg).entries)
        assert not np.array_equal(sample_codebook(cfg).entries, sample_codebook(replace(cfg, seed=8)).entries)
        assert not np.array_equal(sample_codebook(cfg, 0).entries, sample_codebook(cfg, 1).entries)

    def test_symbol_range(self):
        with pytest.raises(ValueError):
            Codebook(np.full((1, 1, 2), 2), bsc_triple())

    def test_streams_independent_of_order(self):
        a = stream(1, "source", 3, 0).random(4)
        stream(1, "decoder", 3, 0).random(100)
        assert np.array_equal(a, stream(1, "source", 3, 0).random(4))


class TestEncoder:
    def test_single_message(self):
        cb = Codebook(np.array([[[0, 1, 1]]]), bsc_triple())
        assert likelihood_encoder(cb, [1, 1, 0], 0).tolist() == [1.0]

    def test_identical_codewords(self):
        cb = Codebook(np.array([[[0, 1]], [[0, 1]]]), bsc_triple())
        assert np.allclose(likelihood_encoder(cb, [1, 1], 0), [0.5, 0.5])

    def test_bayes_two_words(self):
        # uniform source through BSC(0.1): P(x|u) is BSC(0.1) as well
        t = bsc_triple(a=0.1)
        cb = Codebook(np.array([[[0, 0]], [[0, 1]]]), t)
        l0 = 0.9 * 0.1  # x = (0, 1) against u = (0, 0)
        l1 = 0.9 * 0.9  # against u = (0, 1)
        assert np.allclose(likelihood_encoder(cb, [0, 1], 0), [l0 / (l0 + l1), l1 / (l0 + l1)], atol=1e-14)

    def test_uniform_fallback(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel.identity(2), Channel.identity(2))
        cb = Codebook(np.array([[[0, 0]], [[0, 0]], [[0, 0]]]), t)
        assert np.allclose(likelihood_encoder(cb, [1, 1], 0), [1 / 3] * 3)

    def test_underflow_guard(self):
        t = bsc_triple(a=1e-200)
        cb = Codebook(np.zeros((2, 1, 8), dtype=int), t)
        post = likelihood_encoder(cb, np.ones(8, dtype=int), 0)
        assert np.all(np.isfinite(post)) and abs(post.sum() - 1) < 1e-15

    def test_errors(self):
        cb = Codebook(np.zeros((2, 1, 2), dtype=int), bsc_triple())
        with pytest.raises(IndexError):
            likelihood_encoder(cb, [0, 1], 1)
        with pytest.raises(DimensionError):
            likelihood_encoder(cb, [0, 1, 1], 0)
        with pytest.raises(IndexError):
            likelihood_encoder(cb, [0, 2], 0)

    def test_tables_match_bayes_on_mixture_joint(self):
        # idealized encoder: Q(i | x, j) proportional to prod_t P(x_t | u_t(i, j))
        t = bsc_triple(a=0.2, p=0.3)
        cfg = SimConfig(n=3, rate=0.6, common_rate=0.2, slack=0.05, triple=t, seed=5)
        cb = sample_codebook(cfg)
        rev = t.forward.reverse(t.source).rows
        xs = all_sequences(2, 3)
        for j, table in enumerate(_encoder_tables(cb)):
            for xi, x in enumerate(xs):
                lik = np.array([np.prod(rev[cb.entries[i, j], x]) for i in range(cb.shape[0])])
                post = lik / lik.sum()
                by_seq = np.zeros(8)
                for i in range(cb.shape[0]):
                    by_seq[int("".join(map(str, cb.entries[i, j])), 2)] += post[i]
                assert np.abs(table[xi] - by_seq).max() < 1e-12
                enc = likelihood_encoder(cb, x, j)
                assert np.abs(enc - post).max() < 1e-12

    def test_induced_source_marginal(self):
        # source ~ P^n, J uniform, I from the idealized encoder: X^n keeps law P^n
        for n in (1, 2, 3, 4):
            t = bsc_triple(a=0.15, p=0.35)
            cfg = SimConfig(n=n, rate=0.5, common_rate=0.3, slack=0.1, triple=t, seed=n)
            cb = sample_codebook(cfg)
            px = product_extension(t.source, n).mass
            m_j = cb.shape[1]
            marg = sum((px[:, None] * table / m_j).sum(axis=1) for table in _encoder_tables(cb))
            assert np.abs(marg - px).max() < 1e-12


class TestDecode:
    def test_identity(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel.bsc(0.1), Channel.identity(2))
        cb = Codebook(np.array([[[0, 1, 1, 0]]]), t)
        assert decode(cb, 0, 0, np.random.default_rng(0)).tolist() == [0, 1, 1, 0]

    def test_constant(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel.bsc(0.1), Channel([[0, 1], [0, 1]]))
        cb = Codebook(np.array([[[0, 1, 1, 0]]]), t)
        assert decode(cb, 0, 0, np.random.default_rng(0)).tolist() == [1, 1, 1, 1]

    def test_reproducible(self):
        cb = sample_codebook(high_cfg(6))
        a = decode(cb, 3, 1, stream(0, "decoder", 6, 0))
        b = decode(cb, 3, 1, stream(0, "decoder", 6, 0))
        assert np.array_equal(a, b)

    def test_range(self):
        cb = Codebook(np.zeros((2, 1, 2), dtype=int), bsc_triple())
        with pytest.raises(IndexError):
            decode(cb, 2, 0, np.random.default_rng(0))


class TestOutputLaw:
    def test_point_mass(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel.bsc(0.1), Channel.identity(2))
        cb = Codebook(np.tile(np.array([1, 0, 1]), (3, 2, 1)), t)
        law = exact_output_law(cb).mass
        assert law[0b101] == 1.0 and law.sum() == 1.0

    def test_two_words_n1(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel.bsc(0.1), Channel([[0.8, 0.2], [0.3, 0.7]]))
        cb = Codebook(np.array([[[0]], [[1]]]), t)
        assert np.allclose(exact_output_law(cb).mass, [0.55, 0.45])

    def test_matches_loops(self):
        t = bsc_triple(a=0.1, c=0.2)
        cb = sample_codebook(SimConfig(n=3, rate=0.4, common_rate=0.2, slack=0.1, triple=t, seed=9))
        w = t.synthesis.rows
        words = cb.entries.reshape(-1, 3)
        expect = [np.mean([np.prod(w[u, y]) for u in words]) for y in all_sequences(2, 3)]
        assert np.abs(exact_output_law(cb).mass - expect).max() < 1e-14

    def test_sums_to_one(self):
        for seed in range(20):
            cb = sample_codebook(high_cfg(6, seed=seed))
            assert abs(exact_output_law(cb).mass.sum() - 1.0) < 1e-10

    def test_monte_carlo_histogram(self):
        cb = sample_codebook(high_cfg(3, seed=2))
        law = exact_output_law(cb).mass
        m = 20000
        rng = np.random.default_rng(123)
        m_i, m_j = cb.shape
        ii, jj = rng.integers(0, m_i, m), rng.integers(0, m_j, m)
        ys = np.array([decode(cb, i, j, rng) for i, j in zip(ii, jj)])
        hist = np.bincount(ys @ [4, 2, 1], minlength=8) / m
        assert tv_distance(hist, law) < 3 * math.sqrt(8 / m)

    def test_cap(self):
        cb = sample_codebook(high_cfg(6))
        with pytest.raises(CapacityError):
            exact_output_law(cb, cap=32)


class TestSchemeDistortion:
    def test_complete_codebook_is_exact(self):
        # every u-sequence once is P_U^n exactly for a uniform U, so the
        # encoder samples the true posterior and E[D] is hit on the nose
        t = bsc_triple()
        ed = expected_distortion(t.marginal("xy"), np.array([[0, 1], [1, 0]]))
        for n in (1, 2, 4, 6):
            cb = Codebook(all_sequences(2, n)[:, None, :], t)
            cfg = SimConfig(n=n, rate=1.0, common_rate=0.0, slack=0.01, triple=t)
            assert exact_scheme_distortion(cfg, cb) == pytest.approx(ed, abs=1e-12)

    def test_monte_carlo_matches_enumeration(self):
        cfg = high_cfg(6, mc_samples=40000, seed=4)
        rep = run(cfg)
        exact = exact_scheme_distortion(cfg, sample_codebook(cfg))
        assert abs(rep.distortion - exact) <= 3 * rep.distortion_se

    def test_chunked_path_agrees(self):
        # force the per-sample likelihood path and compare with enumeration
        cfg = high_cfg(5, mc_samples=40000, seed=6)
        exact = exact_scheme_distortion(cfg, sample_codebook(cfg))
        import rdpcr.synthesis as syn

        old = syn.WORK_CAP
        try:
            syn.WORK_CAP = 64
            rep = run(cfg)
        finally:
            syn.WORK_CAP = old
        assert abs(rep.distortion - exact) <= 3 * rep.distortion_se

    def test_bias_shrinks_with_n(self):
        t = bsc_triple()
        ed = expected_distortion(t.marginal("xy"), np.array([[0, 1], [1, 0]]))
        gaps = []
        for n in (2, 4, 6, 8):
            cfg = high_cfg(n)
            gaps.append(np.median([exact_scheme_distortion(cfg, sample_codebook(cfg, r)) - ed for r in range(5)]))
        assert all(g > 0 for g in gaps)
        assert all(a > b for a, b in zip(gaps, gaps[1:]))


class TestRun:
    def test_deterministic(self):
        cfg = high_cfg(4, mc_samples=500, seed=3)
        assert run(cfg) == run(cfg)

    def test_identity_high_rate_covers(self):
        t = TripleJoint(Distribution([0.5, 0.5]), Channel.identity(2), Channel.identity(2))
        cfg = SimConfig(n=8, rate=2.0, common_rate=0.0, slack=0.05, triple=t, mc_samples=0)
        rep = run(cfg)
        assert rep.tv_mode == "exact"
        assert rep.tv_gap < 0.05
        assert math.isnan(rep.distortion)

    def test_zero_rate_stays_away(self):
        t = bsc_triple(a=0.1, c=0.1)
        for n in (2, 6, 10):
            cfg = SimConfig(n=n, rate=0.0, common_rate=0.0, slack=0.01, triple=t, mc_samples=0)
            assert run(cfg).tv_gap > 0.5

    def test_distortion_close_at_high_rate(self):
        t = bsc_triple()
        ed = expected_distortion(t.marginal("xy"), np.array([[0, 1], [1, 0]]))
        rep = run(high_cfg(10, mc_samples=20000))
        assert abs(rep.distortion - ed) < 0.01

    def test_monte_carlo_tv(self):
        cfg = high_cfg(8, seed=1, mc_samples=0, tv_samples=40000)
        exact = run(cfg)
        mc = run(replace(cfg, enum_cap=64))
        assert mc.tv_mode == "monte_carlo"
        assert mc.tv_ci > 0
        assert abs(mc.tv_gap - exact.tv_gap) <= 2 * mc.tv_ci + 0.01

    def test_report_json(self):
        obj = run(high_cfg(3, mc_samples=10)).to_json()
        assert set(obj) >= {"n", "tv_gap", "tv_ci", "distortion", "codebook_shape", "seed"}
        assert 0 <= obj["tv_gap"] <= 1 and obj["distortion"] >= 0


class TestSweep:
    def test_single_point(self):
        cfg = high_cfg(5, mc_samples=200)
        (p,) = sweep(cfg, [1])
        r = run(replace(cfg, n=1))
        assert (p.n, p.tv_gap, p.tv_ci, p.distortion) == (1, r.tv_gap, r.tv_ci, r.distortion)

    def test_median_over_codebooks(self):
        cfg = high_cfg(4, mc_samples=0)
        (p,) = sweep(cfg, [4], n_codebooks=5)
        assert len(p.tv_values) == 5
        assert p.tv_gap == pytest.approx(np.median(p.tv_values))
        assert p.tv_values == tuple(run(cfg, r).tv_gap for r in range(5))
