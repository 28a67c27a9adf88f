"""Rayleigh block-fading channel sampling and the multiple-access wiretap channel."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import ChannelRealization, SystemConfig

# Mean minus standard deviation of a unit-scale Rayleigh variable.
H1_ONE_SIGMA_BELOW_MEAN = (math.sqrt(math.pi) - math.sqrt(4.0 - math.pi)) / math.sqrt(2.0)
# Alternative weakest-user coefficient, a quarter of the above.
H1_QUARTER = H1_ONE_SIGMA_BELOW_MEAN / 4.0

ChannelMode = Literal["free_rayleigh", "fixed_weakest"]


@dataclass(frozen=True)
class ChannelProtocol:
    mode: ChannelMode = "fixed_weakest"
    h1_fixed: float = H1_ONE_SIGMA_BELOW_MEAN

    def __post_init__(self):
        if self.mode not in ("free_rayleigh", "fixed_weakest"):
            raise ValueError(f"unknown channel mode {self.mode!r}")
        if self.mode == "fixed_weakest" and not self.h1_fixed > 0:
            raise ValueError("h1_fixed must be positive")


@dataclass(frozen=True, eq=False)
class ChannelOutputs:
    y: np.ndarray
    z: np.ndarray


def rayleigh_cdf(x, scale: float = 1.0):
    x = np.asarray(x, dtype=float)
    return -np.expm1(-0.5 * (np.clip(x, 0.0, None) / scale) ** 2)


def rayleigh_inverse_cdf(u, scale: float = 1.0):
    """Quantile function of the Rayleigh distribution, ``scale * sqrt(-2 ln(1-u))``."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(u_arr < 0) or np.any(u_arr >= 1) or np.any(np.isnan(u_arr)):
        raise ValueError("Rayleigh quantile requires 0 <= u < 1")
    out = scale * np.sqrt(-2.0 * np.log1p(-u_arr))
    return float(out) if np.ndim(u) == 0 else out


def truncated_rayleigh(rng: np.random.Generator, lower: float, scale: float, size) -> np.ndarray:
    """Rayleigh draws conditioned on ``>= lower``, by inverse CDF on ``[F(lower), 1)``."""
    f_lo = float(rayleigh_cdf(lower, scale))
    u = f_lo + rng.random(size) * (1.0 - f_lo)
    # the affine map can round up to 1.0 when F(lower) is close to 1
    u = np.minimum(u, np.nextafter(1.0, 0.0))
    return np.maximum(rayleigh_inverse_cdf(u, scale), lower)


def sample_channel(cfg: SystemConfig, proto: ChannelProtocol, rng: np.random.Generator) -> ChannelRealization:
    M = cfg.num_users
    if proto.mode == "free_rayleigh":
        h = rayleigh_inverse_cdf(rng.random(M), cfg.sigma_h)
    else:
        rest = truncated_rayleigh(rng, proto.h1_fixed, cfg.sigma_h, M - 1)
        h = np.concatenate([[proto.h1_fixed], rest])
    g = rayleigh_inverse_cdf(rng.random(M), cfg.sigma_g)
    return ChannelRealization.sorted(h, g)


def transmit(X, ch: ChannelRealization, cfg: SystemConfig, rng: np.random.Generator) -> ChannelOutputs:
    """Pass transmit matrices through both channels.

    ``X`` is ``(n, M)`` or a batch ``(N, n, M)``; outputs have the matching
    leading shape with the user axis contracted.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim < 2 or X.shape[-1] != ch.num_users:
        raise ValueError(f"transmit matrix must have {ch.num_users} columns, got shape {X.shape}")
    if X.shape[-2] != cfg.dimension:
        raise ValueError(f"transmit matrix must have {cfg.dimension} rows, got shape {X.shape}")
    y = X @ ch.h
    z = X @ ch.g
    n_y = rng.standard_normal(y.shape)
    n_z = rng.standard_normal(z.shape)
    return ChannelOutputs(
        y=y + math.sqrt(cfg.sigma_y_sq) * n_y,
        z=z + math.sqrt(cfg.sigma_z_sq) * n_z,
    )
