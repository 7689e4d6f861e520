import math

import pytest
from hypothesis import HealthCheck, settings

from wpress.io import bundled_names, load_measure, load_potential, load_system
from wpress.symbolic import Alphabet, BlockCode, ChainSystem, Potential, Subshift

settings.register_profile("default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SYSTEM_NAMES = bundled_names("system")


def bundled(name):
    system = load_system(f"bundled:{name}")
    try:
        pot = load_potential(f"bundled:{name}", system)
    except ValueError:
        pot = Potential.zero()
    return system, pot


@pytest.fixture(scope="session")
def fs42():
    return load_system("bundled:fs42")


@pytest.fixture(scope="session")
def f1(fs42):
    return load_potential("bundled:fs42", fs42)


@pytest.fixture(scope="session")
def fs42_measure(fs42):
    return load_measure("bundled:fs42", fs42)


@pytest.fixture(scope="session")
def golden_chain():
    return bundled("golden_chain")


@pytest.fixture(scope="session")
def golden():
    return bundled("golden")


@pytest.fixture(scope="session")
def gm_to_fs():
    return load_system("bundled:gm_to_fs")


@pytest.fixture(scope="session")
def fs632():
    return bundled("fs632")


@pytest.fixture(scope="session")
def all_systems():
    return {name: bundled(name) for name in SYSTEM_NAMES}


def full_chain(sizes, maps, weights):
    """Full-shift chain from alphabet sizes and symbol maps given as index lists."""
    alphas = [Alphabet(tuple(f"s{i}_{j}" for j in range(n))) for i, n in enumerate(sizes)]
    levels = tuple(Subshift.full(a) for a in alphas)
    codes = tuple(
        BlockCode(alphas[i], alphas[i + 1], tuple(mp)) for i, mp in enumerate(maps)
    )
    return ChainSystem(levels, codes, tuple(weights))


LOG2 = math.log(2)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
