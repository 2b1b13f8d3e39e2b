import numpy as np
import pytest

from fockbench import MeasureSpec, Weight, build_model

ACCEPTANCE_LINES: dict[int, str] = {}


def corpus(include_two: bool = True):
    """The standard measure corpus used by the harness tests."""
    out = [
        MeasureSpec.atomic([(0, 1.0)], label="atom0"),
        MeasureSpec.atomic([(2 + 1j, 1.0)], label="atom2i"),
        MeasureSpec.from_density("exp(-r^2)/pi", label="gauss"),
        MeasureSpec.weight_measure(label="wdA"),
        MeasureSpec.from_volterra([0, 1], label="volterra"),
        MeasureSpec.from_pullback(0.5, label="pb_half"),
    ]
    if include_two:
        out.append(MeasureSpec.from_pullback(2.0, label="pb_two"))
    return tuple(out)


@pytest.fixture(scope="session")
def standard():
    return Weight.standard(1.0)


@pytest.fixture(scope="session")
def model80(standard):
    return build_model(standard, 1.0, 80)


@pytest.fixture(scope="session")
def model_g2():
    return build_model(Weight.power(2.0), 1.0, 80)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
