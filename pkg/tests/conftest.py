import numpy as np
import pytest


def random_antisymmetric(rng, n, scale=1.0):
    a = rng.normal(size=(n, n))
    return scale * (a - a.T) / 2


def random_density(rng, d, rank=None):
    """Random complex density matrix of dimension ``d``."""
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def random_commuting_real(rng, d):
    """Real ``2d x 2d`` matrix commuting with ``J (x) I``."""
    a, b = rng.normal(size=(d, d)), rng.normal(size=(d, d))
    return np.block([[a, -b], [b, a]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report ----------------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    detail = dict(report.user_properties).get("detail", "")
    if report.when == "call" or report.failed:
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        if name not in _ACCEPTANCE or status == "FAIL":
            _ACCEPTANCE[name] = (status, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n.split("_")[2])):
        status, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}")
