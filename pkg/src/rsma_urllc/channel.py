"""User placement, path loss, Rayleigh fading with MMSE-style estimation
error, and channel correlation coefficients.

Small-scale vectors are drawn as circularly symmetric complex Gaussians with
independent real/imaginary parts of variance var/2 each, so the estimated and
error components carry variances (1 - sigma_e^2) and sigma_e^2 per element
and the decomposition ``true = est + err`` holds exactly by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .scenario import ScenarioConfig

__all__ = [
    "ChannelRealization",
    "sample_positions",
    "path_loss_linear",
    "sample_channels",
    "correlation",
]


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of positions, large-scale gains and fading for all users."""

    distances_m: np.ndarray        # (K,)
    large_scale: np.ndarray        # (K,) linear gains alpha_k
    true_small_scale: np.ndarray   # (K, M_t) complex
    est_small_scale: np.ndarray    # (K, M_t) complex
    err_small_scale: np.ndarray    # (K, M_t) complex

    @property
    def num_users(self) -> int:
        return self.true_small_scale.shape[0]

    @property
    def num_antennas(self) -> int:
        return self.true_small_scale.shape[1]

    def to_json(self, path=None) -> str:
        def cplx(m):
            return np.stack([m.real, m.imag], axis=-1).tolist()

        data = {
            "distances_m": self.distances_m.tolist(),
            "large_scale": self.large_scale.tolist(),
            "true_small_scale": cplx(self.true_small_scale),
            "est_small_scale": cplx(self.est_small_scale),
            "err_small_scale": cplx(self.err_small_scale),
        }
        text = json.dumps(data)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    @staticmethod
    def from_json(text_or_path) -> "ChannelRealization":
        if isinstance(text_or_path, str) and text_or_path.lstrip().startswith("{"):
            data = json.loads(text_or_path)
        else:
            with open(text_or_path) as fh:
                data = json.load(fh)

        def uncplx(m):
            arr = np.asarray(m, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        return ChannelRealization(
            distances_m=np.asarray(data["distances_m"], dtype=float),
            large_scale=np.asarray(data["large_scale"], dtype=float),
            true_small_scale=uncplx(data["true_small_scale"]),
            est_small_scale=uncplx(data["est_small_scale"]),
            err_small_scale=uncplx(data["err_small_scale"]),
        )


def sample_positions(config: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform user distances on (d_min, d_max), in meters."""
    d_min, d_max = config.distance_range_m
    if not d_min < d_max:
        raise ValueError("invalid distance range")
    return rng.uniform(d_min, d_max, size=config.num_users)


def path_loss_linear(d):
    """Linear large-scale gain from the 35.3 + 37.6 log10(d) dB loss model."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    loss_db = 35.3 + 37.6 * np.log10(d)
    alpha = 10.0 ** (-loss_db / 10.0)
    return float(alpha) if alpha.ndim == 0 else alpha


def _cn_matrix(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    if variance == 0.0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(
    config: ScenarioConfig,
    distances: Sequence[float],
    rng: np.random.Generator,
) -> ChannelRealization:
    """Draw estimated and error fading components and large-scale gains.

    The estimated part has per-element variance 1 - sigma_e^2 and the error
    part sigma_e^2; both are drawn even when a variance is zero so that the
    rng call sequence (and hence pairing across sigma_e^2 sweeps) is stable.
    """
    var_e = config.estimation_error_var
    if not (0.0 <= var_e <= 1.0):
        raise ValueError("estimation_error_var must lie in [0, 1]")
    distances = np.asarray(distances, dtype=float)
    shape = (config.num_users, config.num_antennas)
    # draw unit-variance components first so a sigma_e^2 sweep at a fixed
    # seed reuses the same underlying normals
    g_est_unit = _cn_matrix(rng, shape, 1.0)
    g_err_unit = _cn_matrix(rng, shape, 1.0)
    est = np.sqrt(1.0 - var_e) * g_est_unit
    err = np.sqrt(var_e) * g_err_unit
    return ChannelRealization(
        distances_m=distances,
        large_scale=path_loss_linear(distances),
        true_small_scale=est + err,
        est_small_scale=est,
        err_small_scale=err,
    )


def correlation(vec_a: np.ndarray, vec_b: np.ndarray) -> float:
    """Normalized channel correlation |a^H b| / (||a|| ||b||), in [0, 1]."""
    na = np.linalg.norm(vec_a)
    nb = np.linalg.norm(vec_b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("correlation undefined for a zero vector")
    return float(np.abs(np.vdot(vec_a, vec_b)) / (na * nb))
