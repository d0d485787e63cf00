import pytest

from renormlab.maps import make_map
from renormlab.markov import build_partition
from renormlab.scaffold import build_scaffold, feigenbaum_parameter

# accumulation parameters resolved once per session; the cascade is cheap
CASCADE_DEPTH = 12


@pytest.fixture(scope="session")
def lam_affine():
    return feigenbaum_parameter("affine", 2.0, 0.0, CASCADE_DEPTH).lambda_inf


@pytest.fixture(scope="session")
def lam_moebius():
    return feigenbaum_parameter("moebius", 2.0, 1.0, CASCADE_DEPTH).lambda_inf


@pytest.fixture(scope="session")
def affine_inf(lam_affine):
    return make_map("affine", 2.0, lam_affine)


@pytest.fixture(scope="session")
def moebius_inf(lam_moebius):
    return make_map("moebius", 2.0, lam_moebius, 1.0)


@pytest.fixture(scope="session")
def affine_scaffold(affine_inf):
    return build_scaffold(affine_inf, 10)


@pytest.fixture(scope="session")
def moebius_scaffold(moebius_inf):
    return build_scaffold(moebius_inf, 10)


@pytest.fixture(scope="session")
def affine_partition(affine_scaffold):
    return build_partition(affine_scaffold, 6)


@pytest.fixture(scope="session")
def moebius_partition(moebius_scaffold):
    return build_partition(moebius_scaffold, 6)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
