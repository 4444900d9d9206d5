import numpy as np
import pytest

from rcotto.model import ReservoirSpec, TlsParams
from rcotto.otto import CouplingModel, CycleConfig, DecouplingMode, StrokeMode


def make_config(eps_h=2.0, eps_c=1.0, delta_h=1.0, delta_c=1.0, beta_h=1.0, beta_c=2.5,
                alpha=0.005, omega_c=2.0, n=30, model="rc-strong", stroke="adiabatic",
                decoupling="instantaneous"):
    """Cycle with the default parameters, in units of the cold bias."""
    return CycleConfig(
        hot=ReservoirSpec(beta_h, alpha, omega_c),
        cold=ReservoirSpec(beta_c, alpha, omega_c),
        tls_hot=TlsParams(eps_h, delta_h),
        tls_cold=TlsParams(eps_c, delta_c),
        n=n,
        coupling_model=CouplingModel(model),
        stroke_mode=StrokeMode(stroke),
        decoupling_mode=DecouplingMode(decoupling),
    )


def random_hermitian(rng, dim, norm=None):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    h = 0.5 * (a + a.conj().T)
    if norm is not None:
        h *= norm / np.linalg.norm(h, 2)
    return h


def random_density_matrix(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng():
    return np.random.default_rng(20161018)


# -- acceptance report ------------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker
    _CRITERIA[number] = (title, "PASS" if report.passed else "FAIL")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, verdict = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {title}")
