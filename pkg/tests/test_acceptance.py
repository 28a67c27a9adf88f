"""Acceptance gate. Each test prints one PASS/FAIL line, collected again in the terminal summary."""

import math

import numpy as np
import pytest
from scipy.optimize import linprog

from secure_aircomp import precoding as pc
from secure_aircomp.channel import H1_ONE_SIGMA_BELOW_MEAN, ChannelProtocol, rayleigh_inverse_cdf
from secure_aircomp.model import ChannelRealization, SystemConfig, sample_inputs
from secure_aircomp.rng import stream
from secure_aircomp.scaling import feasible_mu_min, scaling_from_mse
from secure_aircomp.security import (
    SchemeDesign,
    approximation_level,
    build_transmit_matrix,
    empirical_mse,
    mse_legit,
    security_level,
)
from secure_aircomp.sim import reference_sweep_spec, run_sweep, to_csv, SweepSpec

from conftest import random_design, random_spd_unit_trace, report_criterion

SEED = 0


def sorted_rayleigh(rng, M):
    return np.sort(rayleigh_inverse_cdf(rng.uniform(0.02, 1.0, M)))


def test_criterion_1_mmse_levels_match_simulation():
    rng = stream(SEED, "acceptance", 1)
    draws = 100_000
    worst, misses = 0.0, []
    for i in range(200):
        des = random_design(rng)
        err_y, err_z = empirical_mse(des, sample_inputs(des.config, rng, size=draws), rng)
        for name, err, closed in (("D", err_y, approximation_level(des)), ("S", err_z, security_level(des))):
            se = err.std(ddof=1) / math.sqrt(draws)
            z = abs(err.mean() - closed) / se
            worst = max(worst, z)
            if z > 3.0:
                misses.append(f"design {i} {name}: z={z:.2f}")
    passed = not misses
    detail = f"400 comparisons, worst |emp-closed| = {worst:.2f} SE; outside 3 SE: {misses or 'none'}"
    report_criterion(1, "MMSE levels vs simulation", passed, detail)
    assert passed, detail


def test_criterion_2_scaling_meets_requirement():
    rng = stream(SEED, "acceptance", 2)
    iso_worst = 0.0
    for _ in range(100):
        M, k = int(rng.integers(2, 11)), int(rng.integers(1, 5))
        cfg = SystemConfig.isotropic(M, k, power_limit=float(rng.uniform(0.5, 2.0)), sigma_y_sq=float(rng.uniform(0.05, 0.5)))
        h = sorted_rayleigh(rng, M)
        floor = feasible_mu_min(cfg, h)
        mu = float(floor + rng.uniform() * (M - floor))
        c_sq = scaling_from_mse(cfg, h, mu).c_sq
        iso_worst = max(iso_worst, abs(mse_legit(cfg, c_sq) - mu))

    aniso_excess, violations = 0.0, 0
    for _ in range(100):
        M, k = int(rng.integers(2, 11)), int(rng.integers(2, 5))
        cfg = SystemConfig(M, k, 1.0, random_spd_unit_trace(rng, k), float(rng.uniform(0.05, 0.5)))
        h = sorted_rayleigh(rng, M) + 1.0
        floor = feasible_mu_min(cfg, h)
        mu = float(floor + rng.uniform() * (M - floor))
        try:
            c_sq = scaling_from_mse(cfg, h, mu).c_sq
        except Exception:
            continue
        excess = mse_legit(cfg, c_sq) - mu
        aniso_excess = max(aniso_excess, excess)
        violations += excess > 1e-9

    iso_ok = iso_worst <= 1e-9
    passed = iso_ok and violations == 0
    detail = (f"isotropic worst |D-mu| = {iso_worst:.2e} ({'ok' if iso_ok else 'too large'}); "
              f"anisotropic D > mu on {violations}/100 designs, worst excess {aniso_excess:.3g}")
    report_criterion(2, "scaling from an MSE requirement", passed, detail)
    assert passed, detail


def _linprog_value(coef, h, budget):
    r = h[:-1] / h[-1]
    b = budget.per_user_budget
    res = linprog(-coef, A_ub=[r**2], b_ub=[b[-1]], bounds=list(zip(np.zeros(len(r)), b[:-1])), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    assert res.status == 0
    return -res.fun


def _random_feasible_points(rng, h, budget, count):
    r2 = (h[:-1] / h[-1]) ** 2
    b = budget.per_user_budget
    d = rng.random((count, len(r2))) * b[:-1]
    load = d @ r2
    scale = np.where(load > b[-1], b[-1] / np.where(load > 0, load, 1.0), 1.0)
    return d * scale[:, None]


def test_criterion_3_lp_solutions_are_optimal():
    rng = stream(SEED, "acceptance", 3)
    worst_gap, beaten, dominance_fail = 0.0, 0, 0
    for _ in range(500):
        M = int(rng.integers(2, 11))
        cfg = SystemConfig.isotropic(M, 1, power_limit=1.0, sigma_y_sq=0.1)
        h = sorted_rayleigh(rng, M)
        g = rayleigh_inverse_cdf(rng.random(M))
        budget = pc.noise_budget(cfg, h, float(rng.uniform()) * h[0] ** 2)
        points = _random_feasible_points(rng, h, budget, 1000)
        for coef, pre in (
            (pc.unknown_csi_coefficients(h), pc.optimize_unknown_csi(h, budget)),
            (pc.known_csi_coefficients(h, g), pc.optimize_known_csi(h, g, budget)),
        ):
            value = pc.lp_objective(coef, pre.d_sq)
            ref = _linprog_value(coef, h, budget)
            worst_gap = max(worst_gap, abs(value - ref) / max(abs(ref), 1e-300) if ref else abs(value))
            beaten += int(np.sum(points @ coef > value * (1 + 1e-12) + 1e-15))
        known = pc.realized_noise_power_at_eve(pc.optimize_known_csi(h, g, budget).A, g)
        unknown = pc.realized_noise_power_at_eve(pc.optimize_unknown_csi(h, budget).A, g)
        dominance_fail += known < unknown - 1e-12 * max(1.0, unknown)
    passed = worst_gap <= 1e-9 and beaten == 0 and dominance_fail == 0
    detail = (f"worst relative gap to LP oracle {worst_gap:.2e}; random points beating greedy {beaten}; "
              f"known < unknown on {dominance_fail}/500")
    report_criterion(3, "LP exactness", passed, detail)
    assert passed, detail


@pytest.fixture(scope="module")
def reference_sweep():
    cfg = SystemConfig.isotropic(10, 1, power_limit=1.0, sigma_y_sq=0.1, sigma_z_sq=0.0)
    proto = ChannelProtocol(mode="fixed_weakest", h1_fixed=H1_ONE_SIGMA_BELOW_MEAN)
    return run_sweep(cfg, proto, reference_sweep_spec(trials=10_000, master_seed=SEED))


def test_criterion_4_reference_sweep_shape(reference_sweep):
    res = reference_sweep
    order = ("no_noise", "naive_svd", "rre_unknown_csi", "rre_known_csi")
    problems = []
    for snr_db in res.spec.snr_grid_db:
        for lo, hi in zip(order, order[1:]):
            a, b = res.row(snr_db, lo), res.row(snr_db, hi)
            tol = 2 * math.hypot(a.s_closed_se, b.s_closed_se)
            if a.s_closed_mean > b.s_closed_mean + tol:
                problems.append(f"{lo} > {hi} at {snr_db:g} dB ({a.s_closed_mean:.4f} vs {b.s_closed_mean:.4f}, 2SE {tol:.4f})")
    flat = res.series("no_noise", "s_closed_mean")
    flat_se = res.series("no_noise", "s_closed_se")
    if np.any(np.abs(flat - flat[0]) > 2 * np.hypot(flat_se, flat_se[0])):
        problems.append(f"no_noise S varies across SNR: {flat.min():.4f}..{flat.max():.4f}")
    d = res.series("rre_unknown_csi", "d_closed_mean")
    if not np.all(np.diff(d) < 0):
        problems.append("legitimate MSE not strictly decreasing")
    passed = not problems
    detail = "ordering, constancy and monotonicity hold" if passed else "; ".join(problems)
    report_criterion(4, "reference sweep ordering", passed, detail)
    assert passed, detail


def test_criterion_5_structural_invariants():
    rng = stream(SEED, "acceptance", 5)
    zf_worst, budget_worst, scaling_worst = 0.0, -math.inf, -math.inf
    count = 0
    for _ in range(300):
        des = random_design(rng)
        cfg, ch = des.config, des.channel
        budget = pc.noise_budget(cfg, ch.h, des.c_sq)
        for method in pc.METHODS:
            pre = pc.build_precoder(method, ch.h, budget, g=ch.g)
            count += 1
            zf_worst = max(zf_worst, float(np.linalg.norm(pre.A @ ch.h)))
            budget_worst = max(budget_worst, float(np.max(pre.column_norms_sq - (cfg.power_limit - des.c_sq / ch.h**2))))
            limit = float(np.min(ch.h**2 * (cfg.power_limit - pre.column_norms_sq)))
            scaling_worst = max(scaling_worst, des.c_sq - limit)

    power_worst = 0.0
    for _ in range(30):
        des = random_design(rng)
        X = build_transmit_matrix(sample_inputs(des.config, rng, size=100_000), des, rng)
        emp = np.mean(np.sum(X**2, axis=1), axis=0)
        ref = des.c_sq / des.channel.h**2 + des.precoder.column_norms_sq
        power_worst = max(power_worst, float(np.max(np.abs(emp - ref) / ref)))

    passed = zf_worst <= 1e-9 and budget_worst <= 1e-9 and scaling_worst <= 1e-9 and power_worst <= 0.02
    detail = (f"{count} precoders: max ||Ah|| {zf_worst:.1e}, max budget excess {budget_worst:.1e}, "
              f"max scaling excess {scaling_worst:.1e}; per-user power worst relative error {power_worst:.2%}")
    report_criterion(5, "structural invariants", passed, detail)
    assert passed, detail


def test_criterion_6_worker_count_does_not_change_output():
    cfg = SystemConfig.isotropic(10, 1, power_limit=1.0, sigma_y_sq=0.1)
    proto = ChannelProtocol(mode="fixed_weakest", h1_fixed=H1_ONE_SIGMA_BELOW_MEAN)
    spec = SweepSpec(trials=1000, master_seed=SEED, chunk_size=250)
    one = to_csv(run_sweep(cfg, proto, spec, workers=1))
    two = to_csv(run_sweep(cfg, proto, spec, workers=3))
    passed = one.encode() == two.encode()
    report_criterion(6, "determinism", passed, f"1 vs 3 workers, {len(one)} bytes, identical={passed}")
    assert passed


def test_criterion_7_expected_noise_power():
    rng = stream(SEED, "acceptance", 7)
    worst = 0.0
    for _ in range(20):
        M = int(rng.integers(2, 11))
        sigma_g = float(rng.uniform(0.5, 2.0))
        h = sorted_rayleigh(rng, M)
        d_sq = rng.uniform(0.0, 1.0, M - 1)
        A = np.sqrt(d_sq)[:, None] * pc.build_rre_basis(h)
        total = 0.0
        for _ in range(10):
            g = rayleigh_inverse_cdf(rng.random((100_000, M)), sigma_g)
            total += float(np.sum((g @ A.T) ** 2))
        mc = total / 1_000_000
        closed = pc.expected_noise_power_at_eve(h, d_sq, sigma_g)
        worst = max(worst, abs(mc - closed) / closed)
    passed = worst <= 0.005
    report_criterion(7, "expected eavesdropper noise power", passed, f"20 instances, worst relative error {worst:.3%}")
    assert passed
