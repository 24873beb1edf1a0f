import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kvwave import InitialData, Interval, build_domain, project_initial_data

settings.register_profile(
    "kvwave", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("kvwave")


@pytest.fixture
def unit8():
    return build_domain(Interval(1.0), 8)


@pytest.fixture
def pi1():
    return build_domain(Interval(math.pi), 1)


ACCEPTANCE_LINES: list[str] = []


def record(number: int, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


SIGNS = (1, -1, 1, 1, -1, 1, -1, 1)


def smooth_state(domain, scale=1.0):
    """Mixed smooth data: a_k = +-1/k^4, b_k = -+0.3/k^4 (E_w(0) ~ 5 on (0, 1))."""
    u0 = InitialData.mode_sum([(k, scale * SIGNS[k - 1] / k**4) for k in range(1, 9)])
    u1 = InitialData.mode_sum([(k, -scale * SIGNS[k - 1] * 0.3 / k**4) for k in range(1, 9)])
    return project_initial_data(domain, u0, u1)


def random_state(domain, rng, h_scale=1.0):
    a = rng.standard_normal(domain.size) / np.sqrt(domain.eigenvalues)
    b = rng.standard_normal(domain.size)
    from kvwave import ModalState, h_norm

    s = ModalState(a, b, domain)
    return s * (h_scale / h_norm(s))
