"""Approximation and security levels, and the linear MMSE receivers.

Both receivers see ``c s`` plus noise. At the legitimate receiver the noise is
just ``n_y``; at the eavesdropper it also carries the channel mismatch (which
is correlated with ``s``) and the artificial noise ``V A g``. All inputs are
jointly Gaussian, so the linear MMSE estimator is the optimal estimator and
its error trace gives the levels in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import transmit
from .errors import DegenerateDesignError, InfeasibleDesignError
from .model import ChannelRealization, InputBatch, SystemConfig
from .precoding import Precoder, realized_noise_power_at_eve, sample_artificial_noise

SINGULAR_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class SchemeDesign:
    config: SystemConfig
    c_sq: float
    precoder: Precoder
    channel: ChannelRealization

    def __post_init__(self):
        if self.c_sq < 0:
            raise ValueError("c_sq must be nonnegative")
        cfg, h = self.config, self.channel.h
        limit = h**2 * (cfg.power_limit - self.precoder.column_norms_sq)
        user = int(np.argmin(limit))
        if self.c_sq > limit[user] + 1e-9:
            raise InfeasibleDesignError(
                f"c^2={self.c_sq:.6g} exceeds h_m^2 (P - ||a_m||^2) = {limit[user]:.6g} at user {user + 1}",
                user=user,
            )

    @property
    def c(self) -> float:
        return float(np.sqrt(self.c_sq))

    @property
    def noise_power_at_eve(self) -> float:
        return realized_noise_power_at_eve(self.precoder.A, self.channel.g)

    @property
    def artificial_noise_variance(self) -> float:
        """Per-coordinate variance of ``V A g`` at the eavesdropper.

        ``V`` has entry variance ``1/n`` so that per-user noise power is
        ``||a_m||^2``; each receive coordinate therefore sees ``||A g||^2 / n``.
        """
        return self.noise_power_at_eve / self.config.dimension

    @property
    def mismatch_sum(self) -> float:
        """``sum_m g_m / h_m``: the eavesdropper's effective gain on ``s``."""
        return float(np.sum(self.channel.g / self.channel.h))

    @property
    def mismatch_energy(self) -> float:
        return float(np.sum((self.channel.g / self.channel.h) ** 2))


@dataclass(frozen=True)
class SecurityReport:
    D_closed: float
    S_closed: float
    snr: float
    empirical_D: Optional[float] = None
    empirical_S: Optional[float] = None


def _spd_solve(R: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``R X = B`` for symmetric positive definite ``R`` via its eigendecomposition."""
    vals, vecs = np.linalg.eigh(R)
    if vals[-1] <= 0 or vals[0] <= SINGULAR_RTOL * vals[-1]:
        raise DegenerateDesignError("receive covariance is singular")
    return vecs @ ((vecs.T @ B) / vals[:, None])


def mse_legit(cfg: SystemConfig, c_sq: float) -> float:
    """MMSE of ``s`` from ``y = c s + n_y``, for a given ``c^2``."""
    M, k = cfg.num_users, cfg.dimension
    Sigma = cfg.input_covariance
    if c_sq == 0:
        return float(M)
    R = c_sq * M * Sigma + cfg.sigma_y_sq * np.eye(k)
    return float(M - c_sq * M**2 * np.trace(Sigma @ _spd_solve(R, Sigma)))


def approximation_level(design: SchemeDesign) -> float:
    return mse_legit(design.config, design.c_sq)


def security_level(design: SchemeDesign) -> float:
    cfg = design.config
    M, k = cfg.num_users, cfg.dimension
    Sigma = cfg.input_covariance
    # with no signal the eavesdropper can do no better than the prior mean,
    # even when R is singular
    if design.c_sq == 0:
        return float(M)
    extra = design.artificial_noise_variance + cfg.sigma_z_sq
    R = design.c_sq * design.mismatch_energy * Sigma + extra * np.eye(k)
    return float(M - design.c_sq * design.mismatch_sum**2 * np.trace(Sigma @ _spd_solve(R, Sigma)))


def isotropic_levels(design: SchemeDesign) -> tuple[float, float]:
    """Scalar-form levels, valid only for i.i.d. input coordinates."""
    cfg = design.config
    if not cfg.is_isotropic:
        raise ValueError("isotropic levels require input covariance I / k")
    M, k, c_sq = cfg.num_users, cfg.dimension, design.c_sq
    if c_sq == 0:
        return float(M), float(M)
    D = M - c_sq * M**2 / (c_sq * M + k * cfg.sigma_y_sq)
    S = M - c_sq * design.mismatch_sum**2 / (
        c_sq * design.mismatch_energy + k * design.artificial_noise_variance + k * cfg.sigma_z_sq
    )
    return float(D), float(S)


def effective_noise_covariance(design: SchemeDesign) -> np.ndarray:
    """Covariance of the eavesdropper's effective noise ``z - c s``."""
    cfg = design.config
    ch = design.channel
    mismatch = float(np.sum((ch.g / ch.h - 1.0) ** 2))
    extra = design.artificial_noise_variance + cfg.sigma_z_sq
    return design.c_sq * mismatch * cfg.input_covariance + extra * np.eye(cfg.dimension)


def joint_covariances(design: SchemeDesign, receiver: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(Cov[s], Cov[s, r], Cov[r])`` for ``receiver`` in ``{"legit", "eve"}``."""
    cfg = design.config
    M, k = cfg.num_users, cfg.dimension
    Sigma = cfg.input_covariance
    c = design.c
    cov_s = M * Sigma
    if receiver == "legit":
        cov_sr = c * M * Sigma
        cov_r = design.c_sq * M * Sigma + cfg.sigma_y_sq * np.eye(k)
    elif receiver == "eve":
        cov_sr = c * design.mismatch_sum * Sigma
        cov_r = design.c_sq * design.mismatch_energy * Sigma + (
            design.artificial_noise_variance + cfg.sigma_z_sq
        ) * np.eye(k)
    else:
        raise ValueError(f"receiver must be 'legit' or 'eve', got {receiver!r}")
    return cov_s, cov_sr, cov_r


def estimator_matrix(design: SchemeDesign, receiver: str) -> np.ndarray:
    """Gain ``K`` of the linear MMSE estimator ``s_hat = K r``."""
    _, cov_sr, cov_r = joint_covariances(design, receiver)
    if design.c_sq == 0:
        return np.zeros_like(cov_r)
    # K = Cov[s,r] Cov[r]^-1, both symmetric here
    return _spd_solve(cov_r, cov_sr.T).T


def mmse_estimate_legit(y, design: SchemeDesign) -> np.ndarray:
    return np.asarray(y, dtype=float) @ estimator_matrix(design, "legit").T


def mmse_estimate_eve(z, design: SchemeDesign) -> np.ndarray:
    return np.asarray(z, dtype=float) @ estimator_matrix(design, "eve").T


def build_transmit_matrix(batch: InputBatch, design: SchemeDesign, rng: np.random.Generator) -> np.ndarray:
    """Transmit matrix ``X`` with column ``m`` equal to ``c gamma_m / h_m + w_m``.

    Works on a single round (``gammas`` of shape ``(M, k)``) or a batch.
    """
    h = design.channel.h
    gammas = np.asarray(batch.gammas, dtype=float)
    size = None if gammas.ndim == 2 else gammas.shape[0]
    signal = design.c * np.swapaxes(gammas, -1, -2) / h
    W = sample_artificial_noise(design.precoder.A, design.config.dimension, rng, size=size)
    return signal + W


def empirical_mse(design: SchemeDesign, batch: InputBatch, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-round squared errors of both MMSE receivers over a batch of inputs."""
    X = build_transmit_matrix(batch, design, rng)
    out = transmit(X, design.channel, design.config, rng)
    err_y = mmse_estimate_legit(out.y, design) - batch.s
    err_z = mmse_estimate_eve(out.z, design) - batch.s
    return np.sum(err_y**2, axis=-1), np.sum(err_z**2, axis=-1)
