"""Marked-point-process simulation and causal estimation.

Simulates longitudinal event data together with potential outcomes under
predictable treatment regimes, computes likelihood-ratio weight processes,
estimates interventional means by inverse probability weighting and
g-formula Monte Carlo, and verifies the continuous-time machinery against
an exact discrete-time enumeration oracle.
"""

from .compensator import (
    AtomSpec,
    CompensatorModel,
    CustomRule,
    DslRule,
    HazardSegmentPlan,
    MarkTable,
    Predicate,
    ProbTable,
    RateFactor,
    RateRule,
    check_regularity,
    cumulative,
    is_discrete,
    log_density,
    survival,
)
from .estimate import (
    EstimateReport,
    OutcomeFunctional,
    fit_discrete_atoms,
    gformula_mc,
    ipw_estimate,
    joint_potential_mean,
    martingale_residuals,
)
from .intervention import (
    DelayedCopy,
    DeviationTimes,
    InterventionSpec,
    KernelAllocation,
    Prevent,
    Static,
    TriggeredAllocation,
    deviation_time,
    evaluate,
    predictability_check,
)
from .oracle import (
    DiscreteScenario,
    DiscreteVariable,
    cross_check_continuous,
    enumerate_worlds,
    oracle_g_formula,
    oracle_ipw,
    to_continuous,
)
from .scenario import Scenario, load_config, parse_config, scenario_hash
from .simulate import (
    JointRealization,
    RandomizerStream,
    inverse_transform_time,
    simulate_interventional,
    simulate_joint,
    simulate_observed,
)
from .trajectory import (
    Baseline,
    MarkSpace,
    Trajectory,
    count,
    restrict,
    single_mark_space,
    validate,
)
from .weights import (
    LambdaPath,
    PositivityError,
    WeightPath,
    deviation_compensator,
    positivity_check,
    weight_path_product,
    weight_path_sde,
)

__version__ = "0.1.0"
