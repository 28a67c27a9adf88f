"""Shared domain types and the Gaussian input model.

The signal dimension ``k`` doubles as the number of channel uses ``n``:
transmission is uncoded, so the two are always equal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError

TRACE_TOL = 1e-9
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SystemConfig:
    """Static problem parameters.

    ``input_covariance`` is stored together with its eigenvalues, sorted
    descending, so the scaling design never has to decompose it again.
    """

    num_users: int
    dimension: int
    power_limit: float
    input_covariance: np.ndarray
    sigma_y_sq: float
    sigma_z_sq: float = 0.0
    sigma_h: float = 1.0
    sigma_g: float = 1.0
    eigenvalues: np.ndarray = field(init=False, repr=False)
    eigenvectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cov = np.array(self.input_covariance, dtype=float, ndmin=2)
        cov.setflags(write=False)
        object.__setattr__(self, "input_covariance", cov)
        if cov.shape[0] == cov.shape[1]:
            vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
            order = np.argsort(vals)[::-1]
            vals, vecs = vals[order], vecs[:, order]
        else:
            vals, vecs = np.full(0, np.nan), np.zeros((0, 0))
        vals.setflags(write=False)
        vecs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)

    @classmethod
    def isotropic(cls, num_users: int, dimension: int, **kwargs) -> "SystemConfig":
        """Config with i.i.d. input coordinates, covariance ``I / k``."""
        cov = np.eye(dimension) / dimension
        return cls(num_users=num_users, dimension=dimension, input_covariance=cov, **kwargs)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def is_isotropic(self) -> bool:
        k = self.dimension
        return bool(np.allclose(self.input_covariance, np.eye(k) / k, rtol=0, atol=1e-12))

    def sqrt_covariance(self) -> np.ndarray:
        """Symmetric square root of the input covariance."""
        vals = np.clip(self.eigenvalues, 0.0, None)
        return (self.eigenvectors * np.sqrt(vals)) @ self.eigenvectors.T


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One block-fading draw, users ordered so that ``h`` is ascending."""

    h: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if h.ndim != 1 or g.shape != h.shape:
            raise ValueError(f"h and g must be vectors of equal length, got {h.shape} and {g.shape}")
        if np.any(h <= 0):
            raise ValueError("legitimate channel coefficients must be strictly positive")
        if np.any(np.diff(h) < 0):
            raise ValueError("h must be sorted ascending; use ChannelRealization.sorted")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @classmethod
    def sorted(cls, h, g) -> "ChannelRealization":
        """Sort users by ``h`` and carry ``g`` along with the same permutation."""
        h = np.asarray(h, dtype=float)
        g = np.asarray(g, dtype=float)
        order = np.argsort(h, kind="stable")
        return cls(h=h[order], g=g[order])

    @property
    def num_users(self) -> int:
        return self.h.shape[0]


@dataclass(frozen=True, eq=False)
class InputBatch:
    """Pre-processed user inputs and their sum.

    ``gammas`` has shape ``(M, k)``, or ``(N, M, k)`` for a batch of ``N``
    independent rounds; ``s`` sums over the user axis.
    """

    gammas: np.ndarray
    s: np.ndarray

    @classmethod
    def from_gammas(cls, gammas) -> "InputBatch":
        gammas = np.asarray(gammas, dtype=float)
        return cls(gammas=gammas, s=gammas.sum(axis=-2))


def validate_config(cfg: SystemConfig) -> list[str]:
    """Return the violated config invariants; an empty list means valid."""
    problems = []
    if cfg.num_users < 2:
        problems.append(f"num_users={cfg.num_users}: need at least 2 users for a nonempty null space")
    if cfg.dimension < 1:
        problems.append(f"dimension={cfg.dimension}: must be positive")
    if not cfg.power_limit > 0:
        problems.append(f"power_limit={cfg.power_limit}: must be positive")
    if cfg.sigma_y_sq < 0 or cfg.sigma_z_sq < 0:
        problems.append("noise variances must be nonnegative")
    if not (cfg.sigma_h > 0 and cfg.sigma_g > 0):
        problems.append("Rayleigh scales must be positive")

    cov = cfg.input_covariance
    if cov.shape != (cfg.dimension, cfg.dimension):
        problems.append(f"input_covariance shape {cov.shape} does not match dimension {cfg.dimension}")
        return problems
    if np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL:
        problems.append("input_covariance is not symmetric")
    if not np.all(cfg.eigenvalues > 0):
        problems.append("input_covariance is not positive definite")
    tr = float(np.trace(cov))
    if abs(tr - 1.0) > TRACE_TOL:
        problems.append(f"trace(input_covariance)={tr:.12g}, expected unit power 1")
    return problems


def require_valid(cfg: SystemConfig) -> SystemConfig:
    problems = validate_config(cfg)
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def sample_inputs(cfg: SystemConfig, rng: np.random.Generator, size: Optional[int] = None) -> InputBatch:
    """Draw i.i.d. zero-mean Gaussian inputs with covariance Sigma for every user."""
    shape = (cfg.num_users, cfg.dimension) if size is None else (size, cfg.num_users, cfg.dimension)
    white = rng.standard_normal(shape)
    # rows are samples, so multiply by the (symmetric) root on the right
    return InputBatch.from_gammas(white @ cfg.sqrt_covariance())
