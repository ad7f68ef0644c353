import warnings

import numpy as np
import pytest

from nwave_weyl.inverse_solver import inversion_pipeline
from nwave_weyl.spectral_core import DiagonalSpectrum, SpectralLine, weyl_constant


@pytest.fixture(scope="session")
def D2():
    return DiagonalSpectrum([2.0, 1.0])


@pytest.fixture(scope="session")
def D3():
    return DiagonalSpectrum([3.0, 2.0, 1.0])


@pytest.fixture(scope="session")
def e1_line():
    return SpectralLine.uniform(5.0, 200.0, 0.05, M_bound=2.0)


@pytest.fixture(scope="session")
def e1_table(D2, e1_line):
    return weyl_constant(D2, 1.0, e1_line)


@pytest.fixture(scope="session")
def e1_truth():
    return np.array([[0, -1], [1, 0]], dtype=complex)


@pytest.fixture(scope="session")
def e1_result(D2, e1_table):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        return inversion_pipeline(e1_table, D2, 1.0, 200)


@pytest.fixture(scope="session")
def e1_result_coarse(D2, e1_table):
    return inversion_pipeline(e1_table, D2, 1.0, 100)


def rel_sup(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
