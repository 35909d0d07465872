import numpy as np
import pytest

from svamerican import SolveConfig, build_grid, heston_model, psor_solve, solve

REF = dict(kappa=2.0, m=0.04, xi=0.5, rho=-0.7, r=0.05, K=1.0, T=0.5)

_ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> None:
    line = f"criterion {number} ({name}): {'PASS' if passed else 'FAIL'}  {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.fixture(scope="session")
def record():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_model():
    return heston_model(**REF)


@pytest.fixture(scope="session")
def small_grid(ref_model):
    return build_grid(ref_model, 4.0, 1.0, 41, 21, 20)


@pytest.fixture(scope="session")
def small_penalty(ref_model, small_grid):
    return solve(ref_model, small_grid, SolveConfig(epsilon=1e-3))


@pytest.fixture(scope="session")
def small_psor(ref_model, small_grid):
    return psor_solve(ref_model, small_grid, SolveConfig())


@pytest.fixture(scope="session")
def ref_grid(ref_model):
    return build_grid(ref_model, 4.0, 1.0, 101, 51, 100)


@pytest.fixture(scope="session")
def ref_penalty(ref_model, ref_grid):
    return solve(ref_model, ref_grid, SolveConfig(epsilon=1e-3))


@pytest.fixture(scope="session")
def ref_psor(ref_model, ref_grid):
    return psor_solve(ref_model, ref_grid, SolveConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
