import numpy as np
import pytest

from supercg.operators import LinearMap
from supercg.projector import Projector, make_geometry

_OUTCOMES: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _OUTCOMES.setdefault(mark.args[0], []).append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        results = _OUTCOMES[n]
        ok = all(o == "passed" for _, o in results)
        names = ", ".join(f"{name}={o}" for name, o in results)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({names})")


def conditioned_matrix(m: int, n: int, cond: float, seed: int) -> np.ndarray:
    """Random m x n matrix with singular values spread evenly over [1, cond]."""
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((m, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return U @ np.diag(np.linspace(cond, 1.0, n)) @ V.T


@pytest.fixture
def dense_map():
    M = conditioned_matrix(60, 36, 10.0, seed=3)
    return LinearMap.from_matrix(M, domain_shape=(6, 6)), M


@pytest.fixture(scope="session")
def proj8():
    return Projector(make_geometry(10, 13, 8, 8))
