import itertools
import os

import pytest

from mppcausal.oracle import DiscreteScenario, DiscreteVariable

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def config_path(name: str) -> str:
    return os.path.join(CONFIG_DIR, name)


def one_period_scenario() -> DiscreteScenario:
    """Single L, A, Y with a hand-checkable interventional mean of 0.65."""
    y_table = {(0, 0): 0.2, (0, 1): 0.5, (1, 0): 0.4, (1, 1): 0.8}
    return DiscreteScenario(
        (
            DiscreteVariable("L", 1.0, "l", {(): 0.5}),
            DiscreteVariable(
                "A", 2.0, "a", {(0,): 0.3, (1,): 0.7}, is_treatment=True, regime_value=1
            ),
            DiscreteVariable("Y", 3.0, "y", y_table),
        ),
        4.0,
        "Y",
    )


def two_period_scenario() -> DiscreteScenario:
    """The shipped two-decision demo: L1, A1, L2, A2, Y, regime always-treat."""

    def table(fn, n):
        return {p: fn(p) for p in itertools.product((0, 1), repeat=n)}

    return DiscreteScenario(
        (
            DiscreteVariable("L1", 1.0, "l", {(): 0.5}),
            DiscreteVariable(
                "A1", 2.0, "a", table(lambda p: 0.3 + 0.4 * p[0], 1),
                is_treatment=True, regime_value=1,
            ),
            DiscreteVariable(
                "L2", 3.0, "l", table(lambda p: 0.2 + 0.15 * p[0] + 0.25 * p[1], 2)
            ),
            DiscreteVariable(
                "A2", 4.0, "a", table(lambda p: 0.3 + 0.3 * p[1] + 0.2 * p[2], 3),
                is_treatment=True, regime_value=1,
            ),
            DiscreteVariable(
                "Y", 5.0, "y",
                table(
                    lambda p: 0.15 + 0.1 * p[0] + 0.2 * p[1] + 0.15 * p[2] + 0.25 * p[3],
                    4,
                ),
            ),
        ),
        6.0,
        "Y",
    )


def shared_atom_scenario() -> DiscreteScenario:
    """Two components carrying mass at the same time t=1.

    Chained tables reproduce the joint P(1,0)=0.3, P(0,1)=0.4, P(0,0)=0.3.
    """
    return DiscreteScenario(
        (
            DiscreteVariable("A", 1.0, "a", {(): 0.3}),
            DiscreteVariable("Y", 1.0, "y", {(0,): 4.0 / 7.0, (1,): 0.0}),
        ),
        2.0,
        "Y",
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion at the end."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                lines.append((nodeid.split("::")[-1], outcome.upper()))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, outcome in sorted(set(lines)):
            terminalreporter.write_line(f"{name}: {outcome}")


@pytest.fixture
def one_period():
    return one_period_scenario()


@pytest.fixture
def two_period():
    return two_period_scenario()


@pytest.fixture
def shared_atom():
    return shared_atom_scenario()
