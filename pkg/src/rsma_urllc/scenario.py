"""Experiment configuration: validated parameters, derived per-subcarrier
quantities, unit conversions, and deterministic per-trial RNG streams.

All powers are stored in dBm as configured and converted to linear watts
once, at load time, through the ``*_w`` accessors; every other module works
in linear units only.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Tuple, Union

import numpy as np

from .fbl import q_inverse

__all__ = [
    "ScenarioConfig",
    "RzfRegularization",
    "derive_theta",
    "derive_rng_stream",
    "dbm_to_watt",
    "watt_to_dbm",
]


def dbm_to_watt(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def watt_to_dbm(p_w: float) -> float:
    if p_w <= 0:
        raise ValueError("power must be positive to convert to dBm")
    return 10.0 * math.log10(p_w) + 30.0


@dataclass(frozen=True)
class RzfRegularization:
    """Regularization rule for the R-ZF precoder.

    ``per_group_noise_scaled`` uses kappa = I_j * sigma^2 (noise power in
    watts), recomputed per group; ``fixed`` uses the given value verbatim.
    """

    mode: str = "per_group_noise_scaled"
    value: float = 0.0

    def __post_init__(self):
        if self.mode not in ("per_group_noise_scaled", "fixed"):
            raise ValueError(f"unknown rzf regularization mode {self.mode!r}")
        if self.mode == "fixed" and (not math.isfinite(self.value) or self.value < 0):
            raise ValueError("fixed regularization value must be finite and >= 0")

    def kappa(self, group_size: int, noise_w: float) -> float:
        if self.mode == "fixed":
            return self.value
        return group_size * noise_w

    def to_json(self) -> Union[str, dict]:
        if self.mode == "per_group_noise_scaled":
            return "per_group_noise_scaled"
        return {"fixed": self.value}

    @staticmethod
    def from_json(obj) -> "RzfRegularization":
        if obj == "per_group_noise_scaled":
            return RzfRegularization("per_group_noise_scaled")
        if isinstance(obj, dict) and set(obj) == {"fixed"}:
            return RzfRegularization("fixed", float(obj["fixed"]))
        raise ValueError(
            "rzf_regularization_mode must be 'per_group_noise_scaled' or {'fixed': value}"
        )


_REQUIRED_FIELDS = {
    "num_antennas",
    "num_users",
    "num_subcarriers",
    "bandwidth_hz",
    "total_blocklength",
    "error_threshold",
    "max_total_power_dbm",
    "noise_power_dbm",
    "estimation_error_var",
    "min_rate_bps_hz",
    "rzf_regularization_mode",
    "distance_range_m",
    "master_seed",
}

# Optional behaviour switches documented in the module open questions; every
# other unknown key is rejected so config typos fail loudly.
_OPTIONAL_FIELDS = {
    "resample_positions_each_trial",
    "rho_uses_error_vector",
    "literal_balance_rule",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Immutable experiment configuration (safe to share across trials)."""

    num_antennas: int
    num_users: int
    num_subcarriers: int
    bandwidth_hz: float
    total_blocklength: int
    error_threshold: float
    max_total_power_dbm: float
    noise_power_dbm: float
    estimation_error_var: float
    min_rate_bps_hz: float
    rzf_regularization_mode: RzfRegularization = field(
        default_factory=RzfRegularization
    )
    distance_range_m: Tuple[float, float] = (10.0, 300.0)
    master_seed: int = 0
    resample_positions_each_trial: bool = True
    rho_uses_error_vector: bool = False
    literal_balance_rule: bool = False

    def __post_init__(self):
        if self.num_antennas < 1:
            raise ValueError("num_antennas must be >= 1")
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.num_subcarriers < 1:
            raise ValueError("num_subcarriers must be >= 1")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth_hz must be positive")
        if self.total_blocklength < 1:
            raise ValueError("total_blocklength must be a positive integer")
        if not (0.0 < self.error_threshold < 0.5):
            raise ValueError("error_threshold must lie in (0, 0.5)")
        if not (0.0 <= self.estimation_error_var <= 1.0):
            raise ValueError("estimation_error_var must lie in [0, 1]")
        if self.min_rate_bps_hz < 0:
            raise ValueError("min_rate_bps_hz must be >= 0")
        d_min, d_max = self.distance_range_m
        if not (0 < d_min < d_max):
            raise ValueError("distance_range_m must satisfy 0 < d_min < d_max")
        for p in (self.max_total_power_dbm, self.noise_power_dbm):
            if not math.isfinite(dbm_to_watt(p)):
                raise ValueError("power in dBm does not convert to finite watts")
        if not (-(2 ** 63) <= int(self.master_seed) < 2 ** 64):
            raise ValueError("master_seed must fit in 64 bits")
        if self.total_blocklength % self.num_subcarriers != 0:
            warnings.warn(
                "total_blocklength is not divisible by num_subcarriers; "
                "flooring the per-subcarrier blocklength and discarding the "
                f"remaining {self.total_blocklength % self.num_subcarriers} "
                "channel uses",
                stacklevel=2,
            )

    # -- derived quantities -------------------------------------------------

    @property
    def blocklength_per_subcarrier(self) -> int:
        """N_j: floor of the total blocklength split across subcarriers."""
        return self.total_blocklength // self.num_subcarriers

    @property
    def bandwidth_per_subcarrier_hz(self) -> float:
        return self.bandwidth_hz / self.num_subcarriers

    @property
    def symbol_duration_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def latency_threshold_s(self) -> float:
        return self.total_blocklength * self.symbol_duration_s

    @property
    def max_total_power_w(self) -> float:
        return dbm_to_watt(self.max_total_power_dbm)

    @property
    def noise_power_w(self) -> float:
        return dbm_to_watt(self.noise_power_dbm)

    # -- defaults matching the standard simulation setup --------------------

    @staticmethod
    def defaults(**overrides) -> "ScenarioConfig":
        """The standard multi-carrier setup (32 antennas, 8 users, 3
        subcarriers, 1 MHz, 1000 channel uses, eps 1e-5, 30 dBm)."""
        base = dict(
            num_antennas=32,
            num_users=8,
            num_subcarriers=3,
            bandwidth_hz=1e6,
            total_blocklength=1000,
            error_threshold=1e-5,
            max_total_power_dbm=30.0,
            noise_power_dbm=-113.0,
            estimation_error_var=0.05,
            min_rate_bps_hz=1.0,
            master_seed=0,
        )
        base.update(overrides)
        return ScenarioConfig(**base)

    # -- JSON round trip -----------------------------------------------------

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["rzf_regularization_mode"] = self.rzf_regularization_mode.to_json()
        d["distance_range_m"] = list(self.distance_range_m)
        return d

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_json_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @staticmethod
    def from_json_dict(data: dict) -> "ScenarioConfig":
        unknown = set(data) - _REQUIRED_FIELDS - _OPTIONAL_FIELDS
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        missing = _REQUIRED_FIELDS - set(data)
        if missing:
            raise ValueError(f"missing configuration keys: {sorted(missing)}")
        kwargs = dict(data)
        kwargs["rzf_regularization_mode"] = RzfRegularization.from_json(
            data["rzf_regularization_mode"]
        )
        kwargs["distance_range_m"] = tuple(data["distance_range_m"])
        kwargs["num_antennas"] = int(data["num_antennas"])
        kwargs["num_users"] = int(data["num_users"])
        kwargs["num_subcarriers"] = int(data["num_subcarriers"])
        kwargs["total_blocklength"] = int(data["total_blocklength"])
        kwargs["master_seed"] = int(data["master_seed"])
        return ScenarioConfig(**kwargs)

    @staticmethod
    def from_json(path) -> "ScenarioConfig":
        with open(path) as fh:
            return ScenarioConfig.from_json_dict(json.load(fh))


def derive_theta(config: ScenarioConfig) -> float:
    """Blocklength penalty coefficient Q^{-1}(eps) / (sqrt(N_j) * ln 2)."""
    n_j = config.blocklength_per_subcarrier
    if n_j < 1:
        raise ValueError("per-subcarrier blocklength underflows to zero")
    return q_inverse(config.error_threshold) / (math.sqrt(n_j) * math.log(2.0))


def derive_rng_stream(config: ScenarioConfig, trial_index: int) -> np.random.Generator:
    """Deterministic, trial-disjoint random stream.

    Identical ``(master_seed, trial_index)`` pairs yield identical streams;
    distinct pairs yield statistically independent streams.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be >= 0")
    seq = np.random.SeedSequence(
        entropy=int(config.master_seed) & (2 ** 64 - 1),
        spawn_key=(int(trial_index),),
    )
    return np.random.default_rng(seq)
