from fractions import Fraction

import pytest

from coordmech.instance import Instance
from coordmech.mechanism import CoefficientFunction, canonical, partitions

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class ZeroSensitiveGamma(CoefficientFunction):
    """Deliberately broken table: gamma changes when the multiset carries zeros.

    Built as a custom table holding the dcoord values, so evaluation goes
    through the composition sum and actually consults this gamma.
    """

    def gamma(self, parts):
        base = super().gamma(parts)
        zeros = sum(1 for t in parts if t == 0)
        return base + zeros


@pytest.fixture
def corrupted():
    d = 2
    dc = CoefficientFunction.dcoord(d)
    table = tuple((p, dc.gamma(p)) for p in partitions(d + 1))
    return ZeroSensitiveGamma("custom", d, table)


@pytest.fixture
def dcoord2():
    return CoefficientFunction.dcoord(2)


@pytest.fixture
def ccoord2():
    return CoefficientFunction.ccoord(2)


@pytest.fixture
def cross():
    """Two jobs, two machines, each job fast (1) on its own machine and slow (4) on the other."""
    return Instance.from_rows([[1, 4], [4, 1]])


@pytest.fixture
def pair():
    """One machine with jobs of weight 1 and 2."""
    return Instance.from_rows([[1], [2]])


def gamma_is_canonical(cf, parts) -> bool:
    return cf.gamma(parts) == cf.gamma(canonical(parts))


F = Fraction
