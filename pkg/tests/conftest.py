import re

import numpy as np
import pytest
from hypothesis import settings

from adiabatic_error import random_system, reference_system

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# criterion id -> one-line verdict, filled by tests/test_acceptance.py
ACCEPTANCE: dict[str, str] = {}


def _criterion_key(cid: str):
    lead = re.match(r"\d+", cid).group()
    return int(lead), cid


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(ACCEPTANCE, key=_criterion_key):
            terminalreporter.write_line(ACCEPTANCE[cid])


@pytest.fixture
def ref_system():
    return reference_system()


@pytest.fixture(scope="session")
def random6():
    return random_system(6, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian(rng, n, scale=1.0):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (a + a.conj().T)
