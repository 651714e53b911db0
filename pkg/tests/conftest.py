import math

import numpy as np
import pytest

from rtnqubit.propagator import PiecewiseDrive, evolve_disentangled, evolve_exact

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels():
    # trigger JIT compilation (or cache load) once, outside any timed region
    drive = PiecewiseDrive(np.array([0.0, 0.5, 1.0]), np.array([[1.0, 0.2, 0.1], [0.0, 0.0, -1.0]]))
    evolve_exact(drive, [0.0, 1.0])
    evolve_disentangled(drive, [0.0, 1.0])


@pytest.fixture
def acceptance_report():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def sign_changes(f, t_end, n=200_001):
    """Brute-force zero crossings of ``f`` on (0, t_end): dense scan + bisection."""
    t = np.linspace(0.0, t_end, n)
    v = np.sign(f(t))
    v[v == 0] = 1
    roots = []
    for i in np.nonzero(v[1:] != v[:-1])[0]:
        lo, hi = t[i], t[i + 1]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if np.sign(f(mid)) == v[i] or f(mid) == 0 and v[i] > 0:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return np.array(roots)


def area_oracle(carrier, t):
    """Integral of sign(carrier) over [0, t] from brute-force crossings."""
    if t <= 0:
        return 0.0
    cuts = np.concatenate(([0.0], sign_changes(carrier, t, n=max(2001, int(t * 2000))), [t]))
    mids = 0.5 * (cuts[1:] + cuts[:-1])
    return float(np.sum(np.where(carrier(mids) >= 0, 1.0, -1.0) * np.diff(cuts)))


CARRIERS = {
    "C": lambda t: np.cos(np.asarray(t) / 8.0),
    "BP": lambda t: np.sin(np.asarray(t) / 1.8 - 0.6),
    "QW": lambda t: np.sin(np.asarray(t) / 2.0 + 2.56),
}
