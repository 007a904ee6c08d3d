"""Regularized zero-forcing precoders, the common-stream precoder, and the
scalar link coefficients feeding every SINR expression.

All precoding vectors are normalized to unit norm, so the power variables of
the allocation problem are exactly the per-stream transmit powers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import ChannelRealization
from .scenario import ScenarioConfig

__all__ = [
    "PrecodingError",
    "PrecoderSet",
    "LinkCoefficients",
    "rzf_precoders",
    "common_precoder",
    "build_precoders",
    "link_coefficients",
]


class PrecodingError(ValueError):
    """Raised when a precoder cannot be constructed (singular system)."""


@dataclass(frozen=True)
class PrecoderSet:
    """Unit-norm private columns plus the combined common vector."""

    private_vectors: np.ndarray  # (M_t, I_j) complex, unit columns
    common_vector: np.ndarray    # (M_t,) complex, unit norm
    combining_weight: float      # 1 / sqrt(M_t I_j)
    regularization: float

    @property
    def group_size(self) -> int:
        return self.private_vectors.shape[1]


@dataclass(frozen=True)
class LinkCoefficients:
    """Per-group scalar gains entering the SINR formulas.

    ``a[k, k'] = rho_private[k, k'] + sigma_e^2 alpha_k`` collects the
    cross-stream gain plus the estimation-error floor; ``b[k]`` is the
    error floor alone and ``c`` the noise power in watts.
    """

    rho_common: np.ndarray   # (I,)
    rho_private: np.ndarray  # (I, I); [k, k'] = gain of stream k' at user k
    a: np.ndarray            # (I, I)
    b: np.ndarray            # (I,)
    c: float

    @property
    def group_size(self) -> int:
        return self.rho_common.shape[0]


def rzf_precoders(est_group_channels: np.ndarray, kappa: float) -> np.ndarray:
    """Unit-norm R-ZF private precoders for one group.

    ``est_group_channels`` holds the estimated channels as columns
    (M_t x I_j).  Computed through the push-through identity
    ``(G G^H + kI)^{-1} G = G (G^H G + kI)^{-1}``, which stays well defined
    at kappa = 0 whenever the columns are linearly independent.
    """
    g = np.asarray(est_group_channels)
    if g.ndim != 2 or g.shape[1] < 1:
        raise ValueError("need an M_t x I_j channel matrix with I_j >= 1")
    if not (np.all(np.isfinite(g.real)) and np.all(np.isfinite(g.imag))):
        raise ValueError("channel matrix must be finite")
    gram = g.conj().T @ g + kappa * np.eye(g.shape[1])
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError as exc:
        raise PrecodingError(
            f"R-ZF system singular at kappa={kappa}: group of {g.shape[1]} "
            f"users on {g.shape[0]} antennas has rank-deficient estimated "
            "channels; use kappa > 0"
        ) from exc
    diag = np.abs(np.diag(chol))
    if diag.min() <= 1e-10 * max(diag.max(), 1e-300):
        raise PrecodingError(
            f"R-ZF system numerically singular at kappa={kappa} "
            "(rank-deficient estimated channels); use kappa > 0"
        )
    w = g @ np.linalg.inv(gram)
    norms = np.linalg.norm(w, axis=0)
    if np.any(norms == 0.0) or not np.all(np.isfinite(norms)):
        raise PrecodingError(
            f"R-ZF produced a degenerate column at kappa={kappa} "
            "(rank-deficient estimated channels)"
        )
    return w / norms


def common_precoder(private_vectors: np.ndarray, num_antennas: int) -> np.ndarray:
    """Equal-weight combination of the private precoders, re-normalized."""
    group_size = private_vectors.shape[1]
    weight = 1.0 / np.sqrt(num_antennas * group_size)
    combined = weight * private_vectors.sum(axis=1)
    norm = np.linalg.norm(combined)
    if norm < 1e-14:
        raise PrecodingError("common precoder numerically zero (antipodal columns)")
    return combined / norm


def build_precoders(
    realization: ChannelRealization,
    group: Sequence[int],
    config: ScenarioConfig,
) -> PrecoderSet:
    """R-ZF private precoders plus the common precoder for one user group."""
    group = list(group)
    if not group:
        raise ValueError("group must be nonempty")
    g_est = realization.est_small_scale[group].T  # (M_t, I_j)
    kappa = config.rzf_regularization_mode.kappa(len(group), config.noise_power_w)
    private = rzf_precoders(g_est, kappa)
    common = common_precoder(private, config.num_antennas)
    return PrecoderSet(
        private_vectors=private,
        common_vector=common,
        combining_weight=1.0 / np.sqrt(config.num_antennas * len(group)),
        regularization=kappa,
    )


def link_coefficients(
    realization: ChannelRealization,
    group: Sequence[int],
    precoders: PrecoderSet,
    config: ScenarioConfig,
) -> LinkCoefficients:
    """Scalar gains rho, a, b, c for one group.

    rho is computed from the estimated channel by default; the
    ``rho_uses_error_vector`` config flag switches to the error vector for
    comparison against the literal formula.
    """
    group = list(group)
    if not group:
        raise ValueError("group must be nonempty")
    if precoders.group_size != len(group):
        raise ValueError("precoder set does not match group size")
    base = (
        realization.err_small_scale
        if config.rho_uses_error_vector
        else realization.est_small_scale
    )
    g = base[group]                       # (I, M_t)
    alpha = realization.large_scale[group]
    cross = g.conj() @ precoders.private_vectors      # (I, I): [k, k'] = g_k^H w_k'
    rho_private = alpha[:, None] * np.abs(cross) ** 2
    proj_c = g.conj() @ precoders.common_vector
    rho_common = alpha * np.abs(proj_c) ** 2
    b = config.estimation_error_var * alpha
    a = rho_private + b[:, None]
    return LinkCoefficients(
        rho_common=rho_common,
        rho_private=rho_private,
        a=a,
        b=b,
        c=config.noise_power_w,
    )
