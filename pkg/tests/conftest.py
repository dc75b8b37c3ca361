import numpy as np
import pytest

from ordclass.datasets import GALAXY, SMALL10
from ordclass.model import Hyperparams, prepare_dataset

# published reference values: n = 10 toy data, theta = a = b = 1, c = 0.1
REF_EXACT = (0.04535, 0.88622, 0.06597, 0.00240, 0.00006, 1.00e-6, 1.31e-8, 1.22e-10, 7.44e-13, 2.26e-14)
REF_MDP = (0.00619, 0.37634, 0.39729, 0.17298, 0.04088, 0.00578, 0.00051, 0.00003, 8.38e-7, 1.12e-8)


@pytest.fixture(scope="session")
def hyper():
    return Hyperparams()


@pytest.fixture(scope="session")
def small10():
    return prepare_dataset(SMALL10)


@pytest.fixture(scope="session")
def galaxy():
    return prepare_dataset(GALAXY)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# -- acceptance reporting ------------------------------------------------------
#
# Acceptance tests record sub-results here; the terminal summary folds them
# into one PASS/FAIL line per criterion.

_ACCEPTANCE: dict[str, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def record():
    def _record(criterion: str, label: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
        print(f"criterion {criterion} [{label}]: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE, key=int):
        parts = _ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        failed = [f"{label}: {detail}" for label, good, detail in parts if not good]
        tail = "; ".join(failed) if failed else f"{len(parts)}/{len(parts)} checks passed"
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  ({tail})")
