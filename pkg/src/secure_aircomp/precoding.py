"""Zero-forced artificial-noise precoders.

The noise transmitted by all users is ``W = V A`` where the rows of ``A`` span
the null space of the legitimate channel ``h``, so ``W h = 0`` and only the
eavesdropper is hit. The row-echelon designs pick per-row power ``d_m^2`` by
a linear program whose only coupling row is the last user's budget; that is a
continuous knapsack and is solved exactly by ratio-greedy filling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import InfeasibleDesignError, ZeroForcingError
from .model import SystemConfig

Method = Literal["rre_unknown_csi", "rre_known_csi", "naive_svd", "no_noise"]
METHODS: tuple[str, ...] = ("rre_unknown_csi", "rre_known_csi", "naive_svd", "no_noise")

ZF_TOL = 1e-9
BUDGET_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Precoder:
    A: np.ndarray
    d_sq: np.ndarray
    method: str

    @property
    def column_norms_sq(self) -> np.ndarray:
        return np.sum(self.A**2, axis=0)


@dataclass(frozen=True, eq=False)
class NoiseBudget:
    """Artificial-noise power left to each user after the information signal."""

    per_user_budget: np.ndarray

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.per_user_budget >= 0))


def zero_forcing_residual(A, h) -> float:
    A = np.asarray(A, dtype=float)
    h = np.asarray(h, dtype=float)
    return float(np.linalg.norm(A @ h) / (1.0 + np.linalg.norm(A) * np.linalg.norm(h)))


def check_zero_forcing(A, h, tol: float = ZF_TOL) -> None:
    res = zero_forcing_residual(A, h)
    if not res <= tol:
        raise ZeroForcingError(f"relative zero-forcing residual {res:.3e} exceeds {tol:g}")


def check_budget(A, budget: NoiseBudget, tol: float = BUDGET_TOL) -> None:
    excess = np.sum(np.asarray(A) ** 2, axis=0) - budget.per_user_budget
    worst = int(np.argmax(excess))
    if excess[worst] > tol:
        raise InfeasibleDesignError(
            f"artificial noise at user {worst + 1} exceeds its budget by {excess[worst]:.3e}", user=worst
        )


def build_rre_basis(h) -> np.ndarray:
    """Null-space basis of ``h`` in reduced row echelon form, shape ``(M-1, M)``."""
    h = np.asarray(h, dtype=float)
    M = h.shape[0]
    if M < 2:
        raise ValueError("need at least two users to build a null-space basis")
    A = np.zeros((M - 1, M))
    A[:, : M - 1] = np.eye(M - 1)
    A[:, M - 1] = -h[: M - 1] / h[M - 1]
    return A


def noise_budget(cfg: SystemConfig, h, c_sq: float) -> NoiseBudget:
    h = np.asarray(h, dtype=float)
    budget = cfg.power_limit - c_sq / h**2
    # c^2 = h_1^2 P lands on zero only up to rounding
    budget[np.abs(budget) <= 1e-12 * max(cfg.power_limit, 1.0)] = 0.0
    if np.any(budget < 0):
        user = int(np.argmin(budget))
        raise InfeasibleDesignError(
            f"signal scaling c^2={c_sq:.6g} exceeds the power limit of user {user + 1} "
            f"(needs c^2 <= h_m^2 P = {h[user] ** 2 * cfg.power_limit:.6g})",
            user=user,
        )
    return NoiseBudget(per_user_budget=budget)


def solve_continuous_knapsack(values, weights, upper, capacity) -> np.ndarray:
    """Maximize ``values @ x`` s.t. ``0 <= x <= upper`` and ``weights @ x <= capacity``.

    Variables with nonpositive value or empty box stay at zero. The rest are
    filled in descending value/weight order, lower index first on ties.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x = np.zeros_like(values)
    remaining = float(capacity)
    candidates = [i for i in range(values.size) if values[i] > 0 and upper[i] > 0]
    ratio = {i: (values[i] / weights[i] if weights[i] > 0 else math.inf) for i in candidates}
    for i in sorted(candidates, key=lambda i: (-ratio[i], i)):
        if weights[i] <= 0:
            x[i] = upper[i]
            continue
        if remaining <= 0:
            break
        x[i] = min(upper[i], remaining / weights[i])
        remaining -= x[i] * weights[i]
    return x


def unknown_csi_coefficients(h) -> np.ndarray:
    """Per-row objective ``r^2 - (pi/2) r + 1`` with ``r = h_m / h_M``."""
    h = np.asarray(h, dtype=float)
    r = h[:-1] / h[-1]
    return r**2 - 0.5 * math.pi * r + 1.0


def known_csi_coefficients(h, g) -> np.ndarray:
    """Per-row contribution ``(r g_M - g_m)^2`` to ``||A g||^2``."""
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    r = h[:-1] / h[-1]
    coef = (r * g[-1] - g[:-1]) ** 2
    # aligned rows cancel only up to rounding; treat them as exactly zero
    scale = (r * g[-1]) ** 2 + g[:-1] ** 2
    coef[coef <= 1e-24 * scale] = 0.0
    return coef


def _rre_precoder(h, budget: NoiseBudget, coefficients, method: str) -> Precoder:
    h = np.asarray(h, dtype=float)
    if not budget.feasible:
        raise InfeasibleDesignError("noise budget has negative entries")
    r = h[:-1] / h[-1]
    b = budget.per_user_budget
    d_sq = solve_continuous_knapsack(coefficients, r**2, b[:-1], b[-1])
    A = np.sqrt(d_sq)[:, None] * build_rre_basis(h)
    check_zero_forcing(A, h)
    check_budget(A, budget)
    return Precoder(A=A, d_sq=d_sq, method=method)


def optimize_unknown_csi(h, budget: NoiseBudget) -> Precoder:
    """Maximize the expected eavesdropper noise power over Rayleigh ``g``."""
    return _rre_precoder(h, budget, unknown_csi_coefficients(h), "rre_unknown_csi")


def optimize_known_csi(h, g, budget: NoiseBudget) -> Precoder:
    """Maximize the realized eavesdropper noise power ``||A g||^2``."""
    return _rre_precoder(h, budget, known_csi_coefficients(h, g), "rre_known_csi")


def lp_objective(coefficients, d_sq) -> float:
    return float(np.dot(coefficients, d_sq))


def expected_noise_power_at_eve(h, d_sq, sigma_g: float) -> float:
    h = np.asarray(h, dtype=float)
    r = h[:-1] / h[-1]
    return float(sigma_g**2 * np.dot(d_sq, 2.0 * r**2 - math.pi * r + 2.0))


def realized_noise_power_at_eve(A, g) -> float:
    A = np.asarray(A, dtype=float)
    g = np.asarray(g, dtype=float)
    if A.shape[-1] != g.shape[0]:
        raise ValueError(f"A has {A.shape[-1]} columns but g has length {g.shape[0]}")
    v = A @ g
    return float(v @ v)


def rre_noise_power_at_eve(h, d_sq, g) -> float:
    """``||A g||^2`` for a row-echelon precoder, without forming ``A``."""
    return lp_objective(known_csi_coefficients(h, g), d_sq)


def naive_svd_precoder(h, budget: NoiseBudget) -> Precoder:
    """Orthonormal null-space basis from the SVD of ``h``, one common power scale."""
    h = np.asarray(h, dtype=float)
    M = h.shape[0]
    if M < 2:
        raise ValueError("need at least two users to build a null-space basis")
    _, _, vt = np.linalg.svd(h[None, :])
    basis = vt[1:].copy()
    for row in basis:
        nz = np.flatnonzero(np.abs(row) > 1e-15)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    norms = np.sum(basis**2, axis=0)
    beta_sq = float(np.min(budget.per_user_budget / norms))
    A = math.sqrt(max(beta_sq, 0.0)) * basis
    check_zero_forcing(A, h)
    check_budget(A, budget)
    return Precoder(A=A, d_sq=np.zeros(M - 1), method="naive_svd")


def no_noise_precoder(M: int) -> Precoder:
    if M < 2:
        raise ValueError("need at least two users")
    return Precoder(A=np.zeros((M - 1, M)), d_sq=np.zeros(M - 1), method="no_noise")


def build_precoder(method: str, h, budget: NoiseBudget, g: Optional[np.ndarray] = None) -> Precoder:
    if method == "rre_unknown_csi":
        return optimize_unknown_csi(h, budget)
    if method == "rre_known_csi":
        if g is None:
            raise ValueError("rre_known_csi needs the eavesdropper channel g")
        return optimize_known_csi(h, g, budget)
    if method == "naive_svd":
        return naive_svd_precoder(h, budget)
    if method == "no_noise":
        return no_noise_precoder(len(h))
    raise ValueError(f"unknown precoder method {method!r}; choose from {', '.join(METHODS)}")


def sample_artificial_noise(A, n: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw ``W = V A``.

    ``V`` has i.i.d. ``N(0, 1/n)`` entries so that ``E||w_m||^2 = ||a_m||^2``
    for every block length ``n``.
    """
    A = np.asarray(A, dtype=float)
    shape = (n, A.shape[0]) if size is None else (size, n, A.shape[0])
    V = rng.standard_normal(shape) / math.sqrt(n)
    return V @ A


def format_matrix(A) -> str:
    """Row-major dump, one row per line, round-trippable decimal."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in A)


def parse_matrix(text: str) -> np.ndarray:
    rows = [line.split() for line in text.strip().splitlines() if line.strip()]
    return np.array([[float(v) for v in row] for row in rows], dtype=float)


def expected_noise_power_general(A, sigma_g: float) -> float:
    """``E||A g||^2`` for any ``A`` under i.i.d. Rayleigh ``g``.

    Uses ``E[g g^T] = sigma_g^2 (2 I + (pi/2)(1 1^T - I))``.
    """
    A = np.asarray(A, dtype=float)
    M = A.shape[1]
    second_moment = sigma_g**2 * (2.0 * np.eye(M) + 0.5 * math.pi * (np.ones((M, M)) - np.eye(M)))
    return float(np.trace(A @ second_moment @ A.T))


def dump_precoder(precoder: Precoder, h, c_sq: Optional[float] = None) -> str:
    """Plain-text precoder file: ``#`` metadata lines, then the matrix ``A``."""
    lines = [f"# method: {precoder.method}"]
    if c_sq is not None:
        lines.append(f"# c_sq: {float(c_sq)!r}")
    lines.append("# h: " + " ".join(repr(float(v)) for v in np.asarray(h, dtype=float)))
    lines.append("# d_sq: " + " ".join(repr(float(v)) for v in precoder.d_sq))
    lines.append(format_matrix(precoder.A))
    return "\n".join(lines) + "\n"


def load_precoder(text: str) -> tuple[Precoder, np.ndarray, Optional[float]]:
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    if "h" not in meta or not body:
        raise ValueError("precoder file needs a '# h:' line and matrix rows")
    h = np.array([float(v) for v in meta["h"].split()])
    A = parse_matrix("\n".join(body))
    d_sq = np.array([float(v) for v in meta.get("d_sq", "").split()]) if meta.get("d_sq") else np.zeros(A.shape[0])
    c_sq = float(meta["c_sq"]) if "c_sq" in meta else None
    return Precoder(A=A, d_sq=d_sq, method=meta.get("method", "unknown")), h, c_sq
