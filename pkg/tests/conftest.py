import numpy as np
import pytest

from sbshmm.bases import Basis
from sbshmm.params import HmmParams
from sbshmm.simulation import stationary_distribution


def random_hmm(rng, K, M=8, basis_kind="trig", min_sv=0.2, diag=0.5):
    """Random identifiable HMM whose emissions are low-order trig polynomials."""
    basis = Basis(basis_kind, M)
    while True:
        Q = rng.dirichlet(np.ones(K), size=K)
        Q = diag * np.eye(K) + (1 - diag) * Q
        O = np.zeros((M, K))
        O[0] = 1.0
        O[1:] = rng.uniform(-0.5, 0.5, size=(M - 1, K))
        if basis_kind == "dirac_trig":
            O[0] = rng.uniform(0.0, 0.5, size=K)
        s_O = np.linalg.svd(O, compute_uv=False)
        s_Q = np.linalg.svd(Q, compute_uv=False)
        if s_O[-1] > min_sv and s_Q[-1] > min_sv:
            return HmmParams(stationary_distribution(Q), Q, O, basis)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def toy2():
    Q = np.array([[0.8, 0.2], [0.3, 0.7]])
    O = np.array([[1.0, 1.0], [0.5, -0.4], [0.0, 0.3]])
    return HmmParams(stationary_distribution(Q), Q, O, Basis("trig", 3))


# acceptance criteria register their verdicts here; printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
