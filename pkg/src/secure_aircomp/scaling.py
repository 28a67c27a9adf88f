"""Signal scaling design from an MSE requirement at the legitimate receiver.

Two rules are offered. The closed form bounds every eigenvalue of Sigma by the
largest one; it is exact for ``Sigma = I / k``. The monotone rule inverts a
strictly increasing surrogate of the legitimate MSE numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy import optimize

from .errors import InfeasibleDesignError
from .model import SystemConfig
from .security import mse_legit

BoundKind = Literal["thm2_closed_form", "improved_monotone"]


@dataclass(frozen=True)
class ScalingDesign:
    c_sq: float
    mu: float
    bound_kind: str
    degenerate: bool = False


def feasible_mu_min(cfg: SystemConfig, h) -> float:
    """Smallest MSE requirement reachable with ``c^2 = h_1^2 P``."""
    c_sq_max = float(np.min(h)) ** 2 * cfg.power_limit
    return mse_legit(cfg, c_sq_max)


def _check_mu(cfg: SystemConfig, h, mu: float) -> float:
    M = cfg.num_users
    floor = feasible_mu_min(cfg, h)
    if mu > M:
        raise InfeasibleDesignError(f"MSE requirement mu={mu:g} exceeds the prior variance M={M}", floor=floor)
    if mu < floor - 1e-12:
        raise InfeasibleDesignError(
            f"MSE requirement mu={mu:g} is below the feasible floor {floor:.6g}", floor=floor
        )
    return floor


def closed_form_c_sq(cfg: SystemConfig, mu: float) -> float:
    M, k, lam = cfg.num_users, cfg.dimension, cfg.lambda_max
    gap = M - mu
    if gap == 0:
        return 0.0
    return cfg.sigma_y_sq * gap / (M**2 * k * lam**2 - M * gap * lam)


def monotone_surrogate(cfg: SystemConfig, x):
    """Strictly increasing map ``x -> g(x)`` whose inverse gives the improved bound."""
    M = cfg.num_users
    lam = cfg.eigenvalues
    offset = cfg.sigma_y_sq / cfg.lambda_min**2
    x = np.asarray(x, dtype=float)
    return np.sum(M * x[..., None] / ((M / lam) * x[..., None] + offset), axis=-1)


def scaling_from_mse(cfg: SystemConfig, h, mu: float, bound_kind: BoundKind = "thm2_closed_form") -> ScalingDesign:
    if bound_kind == "improved_monotone":
        return scaling_improved_bound(cfg, h, mu)
    if bound_kind != "thm2_closed_form":
        raise ValueError(f"unknown bound kind {bound_kind!r}")
    floor = _check_mu(cfg, h, mu)
    c_sq = closed_form_c_sq(cfg, mu)
    c_sq_max = float(np.min(h)) ** 2 * cfg.power_limit
    if c_sq > c_sq_max * (1 + 1e-12):
        raise InfeasibleDesignError(
            f"required c^2={c_sq:.6g} exceeds h_1^2 P = {c_sq_max:.6g}", floor=floor
        )
    return ScalingDesign(c_sq=c_sq, mu=mu, bound_kind=bound_kind, degenerate=c_sq == 0)


def scaling_improved_bound(cfg: SystemConfig, h, mu: float) -> ScalingDesign:
    floor = _check_mu(cfg, h, mu)
    M = cfg.num_users
    target = 1.0 - mu / M
    if target == 0:
        return ScalingDesign(c_sq=0.0, mu=mu, bound_kind="improved_monotone", degenerate=True)
    hi = float(np.min(h)) ** 2 * cfg.power_limit
    if float(monotone_surrogate(cfg, hi)) < target:
        raise InfeasibleDesignError(
            f"monotone bound for mu={mu:g} needs c^2 beyond h_1^2 P = {hi:.6g}", floor=floor
        )
    c_sq = optimize.bisect(lambda x: float(monotone_surrogate(cfg, x)) - target, 0.0, hi, xtol=1e-12)
    return ScalingDesign(c_sq=float(c_sq), mu=mu, bound_kind="improved_monotone")


def snr_of(cfg: SystemConfig, c_sq: float) -> float:
    if c_sq < 0:
        raise ValueError("c_sq must be nonnegative")
    return c_sq * cfg.num_users / cfg.sigma_y_sq


def c_sq_of_snr(cfg: SystemConfig, snr: float, h: Optional[np.ndarray] = None) -> float:
    if snr < 0:
        raise ValueError("snr must be nonnegative")
    c_sq = snr * cfg.sigma_y_sq / cfg.num_users
    if h is not None:
        c_sq_max = float(np.min(h)) ** 2 * cfg.power_limit
        if c_sq > c_sq_max * (1 + 1e-12):
            raise InfeasibleDesignError(
                f"SNR {snr:.6g} needs c^2={c_sq:.6g} > h_1^2 P = {c_sq_max:.6g}"
            )
    return c_sq


def max_snr(cfg: SystemConfig, h1: float) -> float:
    return h1**2 * cfg.power_limit * cfg.num_users / cfg.sigma_y_sq


def db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


def from_db(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)
