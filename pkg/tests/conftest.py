import numpy as np
import pytest

from secure_aircomp.channel import H1_ONE_SIGMA_BELOW_MEAN, ChannelProtocol
from secure_aircomp.model import SystemConfig


def random_spd_unit_trace(rng, k):
    """Random SPD matrix with unit trace and well-separated eigenvalues."""
    q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    vals = rng.uniform(0.1, 1.0, size=k)
    vals /= vals.sum()
    cov = (q * vals) @ q.T
    return 0.5 * (cov + cov.T)


def reference_config(**kwargs):
    params = dict(power_limit=1.0, sigma_y_sq=0.1, sigma_z_sq=0.0)
    params.update(kwargs)
    return SystemConfig.isotropic(10, 1, **params)


@pytest.fixture
def ref_cfg():
    return reference_config()


@pytest.fixture
def ref_proto():
    return ChannelProtocol(mode="fixed_weakest", h1_fixed=H1_ONE_SIGMA_BELOW_MEAN)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def rel_close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)




def random_design(rng, M=None, k=None, method=None, sigma_z_sq=None):
    """Feasible random design: SPD unit-trace inputs, random c, a row-echelon precoder."""
    from secure_aircomp.channel import rayleigh_inverse_cdf
    from secure_aircomp.model import ChannelRealization
    from secure_aircomp.precoding import build_precoder, noise_budget
    from secure_aircomp.security import SchemeDesign

    M = int(rng.integers(2, 11)) if M is None else M
    k = int(rng.integers(1, 5)) if k is None else k
    cfg = SystemConfig(
        num_users=M,
        dimension=k,
        power_limit=float(rng.uniform(0.5, 2.0)),
        input_covariance=random_spd_unit_trace(rng, k),
        sigma_y_sq=float(rng.uniform(0.05, 0.5)),
        sigma_z_sq=float(rng.uniform(0.0, 0.3)) if sigma_z_sq is None else sigma_z_sq,
    )
    ch = ChannelRealization.sorted(
        rayleigh_inverse_cdf(rng.uniform(0.05, 1.0, M)), rayleigh_inverse_cdf(rng.random(M))
    )
    c_sq = float(rng.uniform(0.05, 1.0)) * ch.h[0] ** 2 * cfg.power_limit
    method = method or ("rre_unknown_csi", "rre_known_csi")[int(rng.integers(2))]
    pre = build_precoder(method, ch.h, noise_budget(cfg, ch.h, c_sq), g=ch.g)
    return SchemeDesign(config=cfg, c_sq=c_sq, precoder=pre, channel=ch)


ACCEPTANCE_LINES = []


def report_criterion(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number} ({title}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split()[0])):
            terminalreporter.write_line(line)
