"""Scenario container and JSON config parsing.

A scenario bundles the mark space, the compensator model, the intervention
set, the baseline law, the outcome functional, and (for discrete configs)
the exact enumeration skeleton. Configs are JSON; parsing normalizes the
document so that re-serialization is stable and hashable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from .compensator import (
    AtomSpec,
    CompensatorModel,
    DslRule,
    MarkTable,
    Predicate,
    ProbTable,
    RateFactor,
    RateRule,
)
from .estimate import OutcomeFunctional
from .intervention import DelayedCopy, InterventionSpec, Prevent, Static, TriggeredAllocation
from .trajectory import Baseline, MarkSpace


class ConfigError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    space: MarkSpace
    model: CompensatorModel
    interventions: tuple[InterventionSpec, ...]
    baseline_law: tuple[tuple[Baseline, float], ...]
    outcome: OutcomeFunctional
    horizon: float
    discrete: Any = None  # DiscreteScenario for embedded discrete configs
    run: dict = field(default_factory=dict)
    raw: dict | None = None  # normalized config document, when parsed from one


def scenario_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _parse_predicate(d: dict, space: MarkSpace) -> Predicate:
    kind = d["kind"]
    if kind == "baseline":
        return Predicate(kind="baseline", op="eq", covariate=d["covariate"], value=d["value"])
    return Predicate(
        kind=kind,
        op=d.get("op", "ge"),
        component=space.component_index(d["component"]),
        window=d.get("window"),
        value=d["value"],
    )


def _parse_preds(items, space) -> tuple[Predicate, ...]:
    return tuple(_parse_predicate(p, space) for p in items)


def _parse_component_rule(d: dict, space: MarkSpace) -> DslRule:
    rate = None
    if "rate" in d:
        r = d["rate"]
        rate = RateRule(
            base=float(r["base"]),
            factors=tuple(
                RateFactor(_parse_preds(f.get("when", []), space), float(f["multiplier"]))
                for f in r.get("factors", [])
            ),
        )
    atoms = []
    for a in d.get("atoms", []):
        if "prob" in a:
            prob: float | ProbTable = float(a["prob"])
        else:
            t = a["table"]
            prob = ProbTable(
                tuple(
                    (_parse_preds(e.get("when", []), space), float(e["prob"]))
                    for e in t.get("entries", [])
                ),
                default=None if t.get("default") is None else float(t["default"]),
            )
        atoms.append(AtomSpec(float(a["time"]), prob))
    marks = None
    if "marks_table" in d:
        t = d["marks_table"]
        marks = MarkTable(
            tuple(
                (_parse_preds(e.get("when", []), space), tuple(float(x) for x in e["probs"]))
                for e in t.get("entries", [])
            ),
            default=None if t.get("default") is None else tuple(float(x) for x in t["default"]),
        )
    return DslRule(rate=rate, atoms=tuple(atoms), marks=marks)


def _parse_intervention(d: dict, space: MarkSpace) -> InterventionSpec:
    target = space.component_index(d["target"])
    kind = d["kind"]
    if kind == "prevent":
        return Prevent(target)
    if kind == "static":
        schedule = tuple(
            (float(e["t"]), space.mark_index(e["mark"])) for e in d["schedule"]
        )
        return Static(target, schedule)
    if kind == "delayed_copy":
        return DelayedCopy(
            target,
            space.component_index(d["source"]),
            float(d["delay"]),
            space.mark_index(d["mark"]),
        )
    if kind == "triggered":
        return TriggeredAllocation(
            target,
            space.component_index(d["trigger"]),
            space.component_index(d["visit"]),
            float(d["window"]),
            float(d["delay"]),
            space.mark_index(d["mark"]),
        )
    raise ConfigError(f"unknown intervention kind {kind!r}")


def _parse_outcome(d: dict, space: MarkSpace, horizon: float) -> OutcomeFunctional:
    return OutcomeFunctional(
        kind=d["kind"],
        component=space.component_index(d["component"]),
        t=float(d.get("t", horizon)),
        cap=d.get("cap"),
        threshold=d.get("threshold"),
    )


def _parse_continuous(config: dict) -> Scenario:
    horizon = float(config["horizon"])
    comp_names = tuple(c["name"] for c in config["components"])
    labels: list[str] = []
    owners: list[int] = []
    for i, c in enumerate(config["components"]):
        for label in c.get("marks", [c["name"]]):
            labels.append(label)
            owners.append(i)
    space = MarkSpace(comp_names, tuple(labels), tuple(owners))
    rules = {
        c["name"]: _parse_component_rule(c, space) for c in config["components"]
    }
    model = CompensatorModel(
        space, rules, horizon, event_cap=config.get("event_cap", 10_000)
    )
    interventions = tuple(
        _parse_intervention(d, space) for d in config.get("interventions", [])
    )
    baseline_cfg = config.get("baseline")
    if baseline_cfg:
        law = tuple(
            (Baseline.from_dict(b["values"]), float(b["prob"])) for b in baseline_cfg
        )
        if abs(sum(p for _, p in law) - 1.0) > 1e-9:
            raise ConfigError("baseline law probabilities must sum to 1")
    else:
        law = ((Baseline(), 1.0),)
    outcome = _parse_outcome(config["outcome"], space, horizon)
    return Scenario(
        space=space,
        model=model,
        interventions=interventions,
        baseline_law=law,
        outcome=outcome,
        horizon=horizon,
        run=dict(config.get("run", {})),
        raw=config,
    )


def _parse_discrete(config: dict) -> Scenario:
    from .oracle import DiscreteScenario, DiscreteVariable, to_continuous

    horizon = float(config["horizon"])
    variables = []
    for v in config["variables"]:
        table = {
            tuple(int(ch) for ch in key): float(p) for key, p in v["table"].items()
        }
        variables.append(
            DiscreteVariable(
                name=v["name"],
                time=float(v["time"]),
                component=v["component"],
                prob=table,
                is_treatment=bool(v.get("treatment", False)),
                regime_value=v.get("regime"),
            )
        )
    ds = DiscreteScenario(tuple(variables), horizon, config["outcome"])
    scenario = to_continuous(ds)
    return Scenario(
        space=scenario.space,
        model=scenario.model,
        interventions=scenario.interventions,
        baseline_law=scenario.baseline_law,
        outcome=scenario.outcome,
        horizon=scenario.horizon,
        discrete=ds,
        run=dict(config.get("run", {})),
        raw=config,
    )


def normalize_config(config: dict) -> dict:
    """Canonical form of a config document: parsed and re-emitted."""
    return json.loads(json.dumps(config, sort_keys=True))


def parse_config(config: dict) -> Scenario:
    config = normalize_config(config)
    kind = config.get("type", "continuous")
    if kind == "discrete":
        return _parse_discrete(config)
    if kind == "continuous":
        return _parse_continuous(config)
    raise ConfigError(f"unknown scenario type {kind!r}")


def load_config(path: str) -> Scenario:
    with open(path) as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(config)
