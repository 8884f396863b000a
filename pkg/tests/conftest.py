import pytest

from hardsde.growth import GrowthAdmissibility, ZetaU, build_v_n, exp_cubed
from hardsde.smoothfn import RhoTriple

# lines appended by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def rho():
    return RhoTriple.build()


@pytest.fixture(scope="session")
def u_exp3():
    return exp_cubed()


@pytest.fixture(scope="session")
def zeta_exp3(u_exp3):
    return ZetaU(u_exp3)


@pytest.fixture(scope="session")
def adm_exp3(u_exp3):
    return GrowthAdmissibility.check(u_exp3, 1.0, 1.0)


@pytest.fixture(scope="session")
def v_specs(u_exp3, zeta_exp3, adm_exp3):
    return {n: build_v_n(adm_exp3, u_exp3, n, zeta_exp3) for n in (1, 2)}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
