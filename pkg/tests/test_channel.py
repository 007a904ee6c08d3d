import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsma_urllc.channel import (
    ChannelRealization,
    correlation,
    path_loss_linear,
    sample_channels,
    sample_positions,
)
from rsma_urllc.scenario import ScenarioConfig, derive_rng_stream


def make_config(**kw):
    base = dict(num_users=8, num_antennas=8, num_subcarriers=1, master_seed=3)
    base.update(kw)
    return ScenarioConfig.defaults(**base)


class TestPositions:
    def test_degenerate_interval(self):
        cfg = make_config(distance_range_m=(10.0, 10.0 + 1e-9))
        d = sample_positions(cfg, derive_rng_stream(cfg, 0))
        assert np.allclose(d, 10.0, atol=1e-6)

    def test_uniform_mean(self):
        cfg = make_config(num_users=100000)
        d = sample_positions(cfg, derive_rng_stream(cfg, 0))
        assert abs(d.mean() - 155.0) < 2.0
        assert d.min() > 10.0 and d.max() < 300.0

    def test_reproducible(self):
        cfg = make_config()
        a = sample_positions(cfg, derive_rng_stream(cfg, 5))
        b = sample_positions(cfg, derive_rng_stream(cfg, 5))
        assert np.array_equal(a, b)


class TestPathLoss:
    def test_reference_distances(self):
        assert path_loss_linear(100.0) == pytest.approx(10 ** -11.05, rel=1e-12)
        assert path_loss_linear(10.0) == pytest.approx(10 ** -7.29, rel=1e-12)
        loss_300_db = -10 * np.log10(path_loss_linear(300.0))
        assert loss_300_db == pytest.approx(128.44, abs=5e-3)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            path_loss_linear(0.0)
        with pytest.raises(ValueError):
            path_loss_linear(-5.0)


class TestSampleChannels:
    def test_perfect_csi_limit(self):
        cfg = make_config(estimation_error_var=0.0)
        real = sample_channels(cfg, np.full(8, 50.0), derive_rng_stream(cfg, 0))
        assert np.all(real.err_small_scale == 0)
        assert np.array_equal(real.true_small_scale, real.est_small_scale)

    def test_no_csi_limit(self):
        cfg = make_config(estimation_error_var=1.0)
        real = sample_channels(cfg, np.full(8, 50.0), derive_rng_stream(cfg, 0))
        assert np.all(real.est_small_scale == 0)

    def test_error_variance_monte_carlo(self):
        cfg = make_config(num_users=8, num_antennas=32, estimation_error_var=0.05)
        rng = derive_rng_stream(cfg, 0)
        draws = []
        for _ in range(40):
            real = sample_channels(cfg, np.full(8, 50.0), rng)
            draws.append(np.abs(real.err_small_scale.ravel()) ** 2)
        var = np.concatenate(draws).mean()
        assert abs(var - 0.05) < 0.005

    def test_estimate_variance_complement(self):
        cfg = make_config(num_users=8, num_antennas=32, estimation_error_var=0.2)
        rng = derive_rng_stream(cfg, 0)
        draws = []
        for _ in range(40):
            real = sample_channels(cfg, np.full(8, 50.0), rng)
            draws.append(np.abs(real.est_small_scale.ravel()) ** 2)
        assert abs(np.concatenate(draws).mean() - 0.8) < 0.01

    def test_decomposition_identity_exact(self):
        cfg = make_config(estimation_error_var=0.3)
        real = sample_channels(cfg, np.full(8, 50.0), derive_rng_stream(cfg, 0))
        assert np.array_equal(
            real.true_small_scale, real.est_small_scale + real.err_small_scale
        )

    def test_large_scale_from_distance(self):
        cfg = make_config(num_users=2)
        real = sample_channels(cfg, [10.0, 300.0], derive_rng_stream(cfg, 0))
        assert real.large_scale[0] == pytest.approx(path_loss_linear(10.0))
        assert real.large_scale[1] == pytest.approx(path_loss_linear(300.0))


class TestCorrelation:
    def test_identical_vectors(self):
        v = np.array([1 + 2j, -0.5j, 3.0])
        assert correlation(v, v) == pytest.approx(1.0, abs=1e-14)

    def test_orthogonal(self):
        a = np.array([1.0 + 0j, 0.0])
        b = np.array([0.0, 1.0 + 0j])
        assert correlation(a, b) == pytest.approx(0.0, abs=1e-15)

    def test_scale_phase_invariance(self):
        rng = np.random.default_rng(0)
        v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        w = 5.0 * np.exp(1j * 0.7) * v
        assert correlation(v, w) == pytest.approx(1.0, abs=1e-12)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            correlation(np.zeros(4, dtype=complex), np.ones(4, dtype=complex))

    @given(st.integers(min_value=0, max_value=10 ** 6))
    @settings(max_examples=40, deadline=None)
    def test_symmetry_and_cauchy_schwarz(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        b = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert correlation(a, b) == pytest.approx(correlation(b, a), abs=1e-13)
        assert correlation(a, b) <= 1.0 + 1e-12


class TestJsonDump:
    def test_round_trip(self, tmp_path):
        cfg = make_config(num_users=3, num_antennas=4)
        real = sample_channels(cfg, [20.0, 50.0, 100.0], derive_rng_stream(cfg, 0))
        path = tmp_path / "real.json"
        real.to_json(path)
        back = ChannelRealization.from_json(path)
        assert np.array_equal(back.true_small_scale, real.true_small_scale)
        assert np.array_equal(back.est_small_scale, real.est_small_scale)
        assert np.array_equal(back.err_small_scale, real.err_small_scale)
        assert np.array_equal(back.distances_m, real.distances_m)
        assert np.array_equal(back.large_scale, real.large_scale)
