import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdpcr.dist import Channel, DimensionError, Distribution, DistortionMeasure, tv_distance
from rdpcr.upgrade import (
    UpgradeInput,
    UpgradeOutput,
    coupling_certificate,
    distortion_delta_bound,
    induced_marginal,
    measured_distortion_change,
    upgrade,
)


def random_instance(rng, k_max=8, pairs_max=16):
    k = int(rng.integers(1, k_max + 1))
    m = int(rng.integers(1, pairs_max + 1))
    # sparse entries now and then so ties and zeros get exercised
    target = rng.dirichlet(np.full(k, 0.5))
    rows = rng.dirichlet(np.full(k, 0.5), size=m)
    weights = rng.dirichlet(np.ones(m))
    if k > 1 and rng.random() < 0.2:
        target[np.argmin(target)] = 0.0
        target /= target.sum()
    return UpgradeInput(Distribution(target), Channel(rows), Distribution(weights))


def example():
    return UpgradeInput(Distribution([0.5, 0.5]), Channel([[0.7, 0.3]]), Distribution([1.0]))


class TestInducedMarginal:
    def test_single_row(self):
        assert np.allclose(induced_marginal(example()).mass, [0.7, 0.3])

    def test_matching_rows(self):
        t = Distribution([0.2, 0.3, 0.5])
        inp = UpgradeInput(t, Channel([t.mass, t.mass]), Distribution([0.4, 0.6]))
        assert np.allclose(induced_marginal(inp).mass, t.mass)

    def test_symmetric(self):
        inp = UpgradeInput(Distribution([0.5, 0.5]), Channel([[1, 0], [0, 1]]), Distribution([0.5, 0.5]))
        assert np.allclose(induced_marginal(inp).mass, [0.5, 0.5])

    def test_shapes(self):
        with pytest.raises(DimensionError):
            UpgradeInput(Distribution([0.5, 0.5]), Channel([[1, 0, 0]]), Distribution([1.0]))
        with pytest.raises(DimensionError):
            UpgradeInput(Distribution([0.5, 0.5]), Channel([[1, 0]]), Distribution([0.5, 0.5]))


class TestUpgrade:
    def test_hand_example(self):
        out = upgrade(example())
        assert out.plus_set.tolist() == [0]
        assert out.theta[0] == pytest.approx(5 / 7, abs=1e-15)
        assert np.allclose(out.residual.mass, [0, 1])
        assert out.phi[0] == pytest.approx(0.2, abs=1e-15)
        assert np.allclose(out.upgraded.rows, [[0.5, 0.5]], atol=1e-15)
        assert out.tv_before == pytest.approx(0.2)

    def test_already_matching(self):
        t = Distribution([0.2, 0.3, 0.5])
        inp = UpgradeInput(t, Channel([[0.2, 0.3, 0.5]]), Distribution([1.0]))
        out = upgrade(inp)
        assert out.upgraded is inp.decoder
        assert out.plus_set.size == 0
        assert np.all(out.phi == 0)
        assert out.residual is None

    def test_point_target(self):
        inp = UpgradeInput(Distribution([1, 0]), Channel([[1.0, 0.0], [0.8, 0.2]]), Distribution([0.5, 0.5]))
        out = upgrade(inp)
        assert out.plus_set.tolist() == [1]
        assert np.allclose(out.residual.mass, [1, 0])
        assert np.allclose(out.upgraded.rows, [[1, 0], [1, 0]])
        assert np.allclose(inp.weights.mass @ out.upgraded.rows, [1, 0], atol=1e-15)

    def test_ties_untouched(self):
        # symbol 1 already matches and must stay outside the plus set
        inp = UpgradeInput(Distribution([0.3, 0.4, 0.3]), Channel([[0.5, 0.4, 0.1]]), Distribution([1.0]))
        out = upgrade(inp)
        assert out.plus_set.tolist() == [0]
        assert out.upgraded.rows[0, 1] == pytest.approx(0.4, abs=1e-15)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            inp = random_instance(rng)
            once = upgrade(inp)
            again = upgrade(UpgradeInput(inp.target, once.upgraded, inp.weights))
            assert np.abs(again.upgraded.rows - once.upgraded.rows).max() <= 1e-12
            assert again.plus_set.size == 0 or again.tv_before <= 1e-12

    def test_random_instances(self):
        rng = np.random.default_rng(20240601)
        for _ in range(1000):
            inp = random_instance(rng)
            out = upgrade(inp)
            w = out.upgraded.rows
            assert np.abs(inp.weights.mass @ w - inp.target.mass).max() <= 1e-12
            assert np.abs(w.sum(axis=1) - 1).max() <= 1e-12
            assert np.all(out.phi >= -1e-15) and np.all(out.phi <= 1 + 1e-15)
            assert all(0 <= t < 1 for t in out.theta.values())
            for k in range(inp.decoder.input_size):
                assert tv_distance(inp.decoder.rows[k], w[k]) <= out.phi[k] + 1e-12
            cert = coupling_certificate(inp, out)
            assert abs(cert.mismatch_prob - cert.tv_before) <= 1e-12


class TestCertificate:
    def test_matching_zero(self):
        t = Distribution([0.5, 0.5])
        inp = UpgradeInput(t, Channel([[0.5, 0.5]]), Distribution([1.0]))
        assert coupling_certificate(inp, upgrade(inp)).mismatch_prob == 0.0

    def test_example(self):
        inp = example()
        cert = coupling_certificate(inp, upgrade(inp))
        assert cert.mismatch_prob == pytest.approx(0.2, abs=1e-15)
        assert cert.tv_before == pytest.approx(0.2, abs=1e-15)

    def test_detects_bad_output(self):
        inp = UpgradeInput(Distribution([0.5, 0.5]), Channel([[0.7, 0.3], [0.7, 0.3]]), Distribution([0.5, 0.5]))
        out = upgrade(inp)
        fake = UpgradeOutput(Channel([[1, 0], [0, 1]]), out.plus_set, out.theta, out.phi, out.residual, out.tv_before)
        with pytest.raises(AssertionError):
            coupling_certificate(inp, fake)

    def test_shape_mismatch(self):
        out = upgrade(example())
        two = UpgradeInput(Distribution([0.5, 0.5]), Channel([[1, 0], [0, 1]]), Distribution([0.5, 0.5]))
        with pytest.raises(DimensionError):
            coupling_certificate(two, out)


class TestDistortionBound:
    def test_zero(self):
        t = Distribution([0.5, 0.5])
        inp = UpgradeInput(t, Channel([[0.5, 0.5]]), Distribution([1.0]))
        assert distortion_delta_bound(inp, upgrade(inp), DistortionMeasure.hamming(2)) == 0.0

    def test_example(self):
        inp = example()
        out = upgrade(inp)
        d = DistortionMeasure.hamming(2)
        bound = distortion_delta_bound(inp, out, d)
        assert bound == pytest.approx(0.2)
        # X = 0 with certainty given the single pair: distortion goes 0.3 -> 0.5
        change = measured_distortion_change(inp, out, d, Channel([[1.0, 0.0]]))
        assert change == pytest.approx(0.2)
        assert change <= bound + 1e-15

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_bound_holds(self, seed):
        rng = np.random.default_rng(seed)
        inp = random_instance(rng)
        out = upgrade(inp)
        k = inp.target.alphabet_size
        d = DistortionMeasure(rng.uniform(0, 3, size=(k, k)))
        src = Channel(rng.dirichlet(np.ones(k), size=inp.decoder.input_size))
        assert measured_distortion_change(inp, out, d, src) <= distortion_delta_bound(inp, out, d) + 1e-12
