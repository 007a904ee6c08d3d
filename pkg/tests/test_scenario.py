import json
import math

import numpy as np
import pytest
from scipy import integrate

from rsma_urllc.scenario import (
    RzfRegularization,
    ScenarioConfig,
    dbm_to_watt,
    derive_rng_stream,
    derive_theta,
    watt_to_dbm,
)


def q_oracle(x: float) -> float:
    """Upper tail of the standard normal by numerical integration."""
    val, _ = integrate.quad(
        lambda t: math.exp(-t * t / 2.0) / math.sqrt(2.0 * math.pi), x, np.inf
    )
    return val


def q_inverse_oracle(p: float) -> float:
    lo, hi = 0.0, 40.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q_oracle(mid) > p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_config(**kw):
    return ScenarioConfig.defaults(**kw)


class TestValidation:
    def test_defaults_round_numbers(self):
        cfg = make_config()
        assert cfg.num_antennas == 32
        assert cfg.num_users == 8
        assert cfg.num_subcarriers == 3
        assert cfg.max_total_power_w == pytest.approx(1.0)
        assert cfg.noise_power_w == pytest.approx(10 ** (-14.3))

    def test_dbm_watt_round_trip(self):
        assert dbm_to_watt(30.0) == pytest.approx(1.0)
        assert watt_to_dbm(dbm_to_watt(-113.0)) == pytest.approx(-113.0)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("num_antennas", 0),
            ("num_users", 0),
            ("num_subcarriers", 0),
            ("bandwidth_hz", -1.0),
            ("total_blocklength", 0),
            ("error_threshold", 0.0),
            ("error_threshold", 0.5),
            ("estimation_error_var", 1.5),
            ("min_rate_bps_hz", -0.1),
            ("distance_range_m", (300.0, 10.0)),
        ],
    )
    def test_rejects_bad_values(self, field, value):
        with pytest.raises(ValueError):
            make_config(**{field: value})

    def test_blocklength_floor_warns(self):
        with pytest.warns(UserWarning, match="flooring"):
            cfg = make_config(total_blocklength=1000, num_subcarriers=3)
        assert cfg.blocklength_per_subcarrier == 333

    def test_derived_quantities(self):
        cfg = make_config(num_subcarriers=2)
        assert cfg.blocklength_per_subcarrier == 500
        assert cfg.bandwidth_per_subcarrier_hz == pytest.approx(5e5)
        assert cfg.symbol_duration_s == pytest.approx(1e-6)
        assert cfg.latency_threshold_s == pytest.approx(1e-3)


class TestTheta:
    def test_theta_near_half_threshold_vanishes(self):
        # Q^{-1}(0.5) = 0, so theta approaches 0 as the threshold nears 0.5
        cfg = make_config(error_threshold=0.4999999, num_subcarriers=1,
                          total_blocklength=100)
        assert derive_theta(cfg) == pytest.approx(0.0, abs=1e-6)

    def test_theta_against_integration_oracle(self):
        qinv = q_inverse_oracle(1e-5)
        with pytest.warns(UserWarning):
            cfg = make_config(num_subcarriers=3, total_blocklength=1000)
        expected = qinv / (math.sqrt(333) * math.log(2.0))
        assert derive_theta(cfg) == pytest.approx(expected, rel=1e-6)
        assert derive_theta(cfg) == pytest.approx(0.337, abs=1e-3)

    def test_theta_full_blocklength(self):
        cfg = make_config(num_subcarriers=1, total_blocklength=1000)
        assert derive_theta(cfg) == pytest.approx(0.1946, abs=1e-4)

    def test_theta_positive_and_decreasing_in_blocklength(self):
        thetas = []
        for n in (100, 200, 400, 1000, 5000):
            cfg = make_config(num_subcarriers=1, total_blocklength=n)
            thetas.append(derive_theta(cfg))
        assert all(t > 0 for t in thetas)
        assert all(a > b for a, b in zip(thetas, thetas[1:]))


class TestRngStreams:
    def test_identical_pairs_identical_draws(self):
        cfg = make_config(master_seed=7)
        a = derive_rng_stream(cfg, 0).standard_normal(100)
        b = derive_rng_stream(cfg, 0).standard_normal(100)
        assert np.array_equal(a, b)

    def test_trials_disjoint(self):
        cfg = make_config(master_seed=7)
        a = derive_rng_stream(cfg, 0).standard_normal(100)
        b = derive_rng_stream(cfg, 1).standard_normal(100)
        assert not np.array_equal(a, b)

    def test_seed_sensitivity(self):
        a = derive_rng_stream(make_config(master_seed=7), 0).standard_normal(100)
        b = derive_rng_stream(make_config(master_seed=8), 0).standard_normal(100)
        assert not np.array_equal(a, b)

    def test_negative_trial_rejected(self):
        with pytest.raises(ValueError):
            derive_rng_stream(make_config(), -1)


class TestJsonRoundTrip:
    def test_round_trip_lossless(self, tmp_path):
        cfg = make_config(
            master_seed=123456789,
            rzf_regularization_mode=RzfRegularization("fixed", 2.5e-3),
            distance_range_m=(15.0, 250.0),
            resample_positions_each_trial=False,
        )
        path = tmp_path / "cfg.json"
        cfg.to_json(path)
        assert ScenarioConfig.from_json(path) == cfg

    def test_unknown_key_rejected(self):
        data = make_config().to_json_dict()
        data["max_powr_dbm"] = 3.0
        with pytest.raises(ValueError, match="unknown"):
            ScenarioConfig.from_json_dict(data)

    def test_missing_key_rejected(self):
        data = make_config().to_json_dict()
        del data["noise_power_dbm"]
        with pytest.raises(ValueError, match="missing"):
            ScenarioConfig.from_json_dict(data)

    def test_regularization_forms(self):
        assert RzfRegularization.from_json("per_group_noise_scaled").mode == \
            "per_group_noise_scaled"
        fixed = RzfRegularization.from_json({"fixed": 0.25})
        assert fixed.kappa(4, 1e-14) == 0.25
        scaled = RzfRegularization.from_json("per_group_noise_scaled")
        assert scaled.kappa(4, 1e-14) == pytest.approx(4e-14)
        with pytest.raises(ValueError):
            RzfRegularization.from_json({"nope": 1})
