import math

import pytest

from cheesetower.geometry import CheeseSpec, Disc, generate_cheese
from cheesetower.quadrature import exp_model
from cheesetower.surface.construct import build_exp_tower, build_sqrt_tower
from cheesetower.surface.rational import RationalFunction
from cheesetower.surface.schedule import schedule
from cheesetower.surface.tower import ExpStage, TowerSpec

KS = [5, 10, 20]


@pytest.fixture(scope="session")
def spec42():
    return generate_cheese(42, 0.5, 20, 0.01)


@pytest.fixture(scope="session")
def tower42(spec42):
    tower = build_exp_tower(spec42, 3, 4, 42, KS)
    exp_model(tower)
    return tower


@pytest.fixture(scope="session")
def sqrt_tower():
    return build_sqrt_tower(8, 4, 42)


@pytest.fixture(scope="session")
def three_hole():
    return generate_cheese(7, 0.5, 3, 0.01)


def disc_spec(*holes, budget=0.5):
    return CheeseSpec(tuple(Disc(complex(c), r) for c, r in holes), budget, 0, 0.01)


def hand_tower(spec, f: RationalFunction, c: float, m: int = 1) -> TowerSpec:
    """One-stage exponential tower with a prescribed function and window."""
    stage = ExpStage(1, f, c, m, schedule(1), (0, 1), {})
    return TowerSpec("exponential", spec, [stage], {0: [f]}, {}, {})


def linear(a: complex, b: complex) -> RationalFunction:
    """a*z + b as a function of z1."""
    return RationalFunction.polynomial([((1,), complex(a)), ((0,), complex(b))], 1)


TWO_PI = 2 * math.pi


def pytest_terminal_summary(terminalreporter):
    results = getattr(__import__("sys").modules.get("test_acceptance"), "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
