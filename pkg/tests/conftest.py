import numpy as np
import pytest

from excitonslab import SlabParams, find_modes

# reference point used throughout: deep in the perturbative regime
G_REF = 1e-4
D_REF = 1e-2


@pytest.fixture(scope="session")
def modes_cache():
    cache = {}

    def get(n, delta0=D_REF, g=G_REF):
        key = (n, delta0, g)
        if key not in cache:
            cache[key] = find_modes(SlabParams(n, delta0, g))
        return cache[key]

    return get


def random_gaussian_moments(rng, n, scale=0.5):
    """Physical (mu, n, m) of a random Gaussian state: coherent displacement
    on top of a thermal-squeezed vacuum built from a random Bogoliubov map."""
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    occ = np.abs(rng.normal(size=n)) * scale
    q, _ = np.linalg.qr(x)
    nm = q.conj() @ np.diag(occ) @ q.T
    mu = scale * (rng.normal(size=n) + 1j * rng.normal(size=n))
    return mu, nm + np.outer(mu.conj(), mu), np.outer(mu, mu)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
