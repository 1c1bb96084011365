"""Point estimators for interventional means, with Monte Carlo errors.

Implements the inverse-probability-weighted estimator on an observed-arm
sample (true weights or weights estimated from discrete atom frequencies),
the g-formula Monte Carlo estimator, the joint-potential mean, and
martingale residual diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compensator import CompensatorModel
from .intervention import deviation_time
from .simulate import RandomizerStream, simulate_interventional, simulate_joint
from .trajectory import Baseline, Trajectory, count, restrict
from .weights import PositivityError, deviation_compensator, weight_path_product


@dataclass(frozen=True)
class OutcomeFunctional:
    """Scalar functional of the trajectory at an evaluation time.

    kinds: "survival" (indicator of no component event by t), "count"
    (component event count, optionally capped), "first-event-before"
    (indicator that the component fired by the threshold time).
    """

    kind: str
    component: int
    t: float
    cap: int | None = None
    threshold: float | None = None

    def __call__(self, traj: Trajectory) -> float:
        if self.kind == "survival":
            return 1.0 if count(traj, self.component, self.t) == 0 else 0.0
        if self.kind == "count":
            n = count(traj, self.component, self.t)
            return float(n if self.cap is None else min(n, self.cap))
        if self.kind == "first-event-before":
            return 1.0 if count(traj, self.component, min(self.threshold, self.t)) > 0 else 0.0
        raise ValueError(f"unknown outcome kind {self.kind!r}")


@dataclass(frozen=True)
class EstimateReport:
    method: str
    value: float
    se: float
    n: int


def _report(method: str, contributions: np.ndarray) -> EstimateReport:
    n = len(contributions)
    value = float(np.mean(contributions))
    se = float(np.std(contributions, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateReport(method, value, se, n)


def ipw_estimate(
    scenario,
    sample,
    outcome: OutcomeFunctional,
    t: float,
    weights: str = "true",
    fitted_tables=None,
) -> EstimateReport:
    """Weighted observed-arm mean (1/n) sum W_t Y_t.

    weights="true" uses the scenario's own deviation compensator;
    weights="estimated-discrete" uses conditional frequencies fitted by
    ``fit_discrete_atoms`` (pass the result as fitted_tables).
    """
    contributions = np.empty(len(sample))
    for i, (baseline, traj) in enumerate(sample):
        if weights == "true":
            wpath = weight_path_product(scenario, baseline, traj)
            w = wpath.at(t)
        elif weights == "estimated-discrete":
            if fitted_tables is None:
                raise ValueError("estimated-discrete weights need fitted_tables")
            w = _estimated_discrete_weight(fitted_tables, baseline, traj, t, scenario)
        else:
            raise ValueError(f"unknown weights mode {weights!r}")
        y = outcome(restrict(traj, min(t, traj.horizon), "at"))
        contributions[i] = w * y
    return _report("ipw", contributions)


def gformula_mc(scenario, n: int, outcome: OutcomeFunctional, t: float, seed: int) -> EstimateReport:
    """Mean outcome over n draws from the interventional law."""
    contributions = np.empty(n)
    for i in range(n):
        _, traj = simulate_interventional(scenario, RandomizerStream(seed, i))
        contributions[i] = outcome(restrict(traj, min(t, traj.horizon), "at"))
    return _report("gformula", contributions)


def joint_potential_mean(
    scenario, n: int, outcome: OutcomeFunctional, t: float, seed: int
) -> EstimateReport:
    """Mean outcome of the potential arm of the joint construction."""
    contributions = np.empty(n)
    for i in range(n):
        real = simulate_joint(scenario, RandomizerStream(seed, i))
        contributions[i] = outcome(restrict(real.potential, min(t, real.potential.horizon), "at"))
    return _report("joint", contributions)


# -- estimated discrete weights ---------------------------------------------


class EstimatedPositivityError(RuntimeError):
    pass


@dataclass(frozen=True)
class FittedAtoms:
    """Empirical conditional treatment frequencies at the decision atoms.

    Keyed by (decision time, past bit pattern); values are estimated
    probabilities that the treatment component fires at that time.
    """

    decision_times: tuple[float, ...]
    variable_times: tuple[float, ...]
    probs: dict[tuple[float, tuple[int, ...]], float]


def fit_discrete_atoms(sample, discrete) -> FittedAtoms:
    """Estimate P(treatment fires at each decision time | full past cell).

    ``discrete`` is a DiscreteScenario skeleton giving variable times,
    components, and regime. A follower-reachable cell with no sampled
    occupants is an estimated-positivity failure.
    """
    from .oracle import follower_reachable_cells  # local import, no cycle at runtime

    var_times = tuple(v.time for v in discrete.variables)
    var_comps_named = tuple(v.component for v in discrete.variables)
    probs: dict[tuple[float, tuple[int, ...]], float] = {}
    counts: dict[tuple[float, tuple[int, ...]], list[int]] = {}
    decision_times = tuple(
        v.time for v in discrete.variables if v.is_treatment
    )
    for baseline, traj in sample:
        space = traj.space
        var_comps = tuple(space.component_index(c) for c in var_comps_named)
        comp_times = {(u, space.mark_component[m]) for u, m in traj.events}
        bits = tuple(
            1 if (v.time, ci) in comp_times else 0
            for v, ci in zip(discrete.variables, var_comps)
        )
        for k, v in enumerate(discrete.variables):
            if not v.is_treatment:
                continue
            cell = (v.time, bits[:k])
            tally = counts.setdefault(cell, [0, 0])
            tally[1] += 1
            if bits[k] == 1:
                tally[0] += 1
    for cell, (num, den) in counts.items():
        probs[cell] = num / den
    for k, past in follower_reachable_cells(discrete):
        v = discrete.variables[k]
        cell = (v.time, past)
        if cell not in probs:
            raise EstimatedPositivityError(
                f"conditioning cell never reached in the sample: decision at "
                f"t={v.time} with past bits {past}"
            )
    return FittedAtoms(decision_times, var_times, probs)


def _estimated_discrete_weight(
    fitted: FittedAtoms, baseline: Baseline, traj: Trajectory, t: float, scenario
) -> float:
    """Product of 1/P-hat over decision atoms up to t; zero for deviators."""
    dev = deviation_time(scenario.interventions, baseline, traj)
    if dev.tau_J <= t:
        return 0.0
    space = traj.space
    comp_times = {(u, space.mark_component[m]) for u, m in traj.events}
    w = 1.0
    discrete = scenario.discrete
    var_comps = tuple(space.component_index(v.component) for v in discrete.variables)
    bits = tuple(
        1 if (v.time, ci) in comp_times else 0
        for v, ci in zip(discrete.variables, var_comps)
    )
    for k, v in enumerate(discrete.variables):
        if not v.is_treatment or v.time > t:
            continue
        cell = (v.time, bits[:k])
        p_hat = fitted.probs.get(cell)
        if p_hat is None:
            raise EstimatedPositivityError(
                f"no fitted probability for cell at t={v.time}, past {bits[:k]}"
            )
        p_follow = p_hat if bits[k] == 1 else 1.0 - p_hat
        if p_follow <= 0.0:
            raise EstimatedPositivityError(
                f"estimated probability of following is zero at t={v.time}, "
                f"past {bits[:k]}"
            )
        w /= p_follow
    return w


# -- diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    grid: tuple[float, ...]
    means: tuple[float, ...]
    ses: tuple[float, ...]

    def z_scores(self) -> tuple[float, ...]:
        return tuple(
            m / se if se > 0 else 0.0 for m, se in zip(self.means, self.ses)
        )


def martingale_residuals(scenario, sample, which, grid) -> ResidualReport:
    """Mean of counting-minus-compensator along each subject's own history.

    which is either a component index (component residuals N - Lambda) or
    the string "deviation" (deviation-indicator residuals).
    """
    model: CompensatorModel = scenario.model
    grid = tuple(grid)
    residuals = np.empty((len(sample), len(grid)))
    for i, (baseline, traj) in enumerate(sample):
        if which == "deviation":
            lam = deviation_compensator(scenario, baseline, traj)
            tau = lam.tau_J
            for g, t in enumerate(grid):
                indicator = 1.0 if tau <= t else 0.0
                value = lam.continuous_at(t) + sum(
                    p for u, p in lam.atoms_through(t)
                )
                residuals[i, g] = indicator - value
        else:
            from .weights import _component_segments_and_atoms

            segments, atoms = _component_segments_and_atoms(
                model, baseline, traj, which
            )
            for g, t in enumerate(grid):
                cont = sum(
                    rate * (min(b, t) - a) for a, b, rate in segments if a < t
                )
                atom_mass = sum(p for u, p in atoms if u <= t)
                residuals[i, g] = count(traj, which, t) - cont - atom_mass
    means = residuals.mean(axis=0)
    ses = residuals.std(axis=0, ddof=1) / math.sqrt(len(sample))
    return ResidualReport(grid, tuple(means), tuple(ses))
