import math

import pytest

from escape_lab.warp import (
    ManifoldSpec,
    constant,
    linear_cone,
    log_decay,
    make_positive_limit,
    poly_decay,
    sphere_bell,
    sqrt_log_f,
)


def flat(c: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec(3, linear_cone(), constant(c))


def poly(alpha: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec(3, linear_cone(), poly_decay(alpha))


def logd(alpha: float = 1.0, p: int = 3) -> ManifoldSpec:
    return ManifoldSpec(p, sqrt_log_f(), log_decay(alpha))


def positive_limit(c: float = 1.0) -> ManifoldSpec:
    return ManifoldSpec(3, linear_cone(), make_positive_limit(c, poly_decay(1.0)))


def sphere() -> ManifoldSpec:
    return ManifoldSpec(3, linear_cone(), sphere_bell(), period=2 * math.pi)


@pytest.fixture
def flat_spec():
    return flat()


@pytest.fixture
def poly_spec():
    return poly()


@pytest.fixture
def log_spec():
    return logd()


@pytest.fixture
def pl_spec():
    return positive_limit()


@pytest.fixture
def sphere_spec():
    return sphere()


# -- acceptance reporting ---------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
