"""Exact W2 transport between discrete measures, Wasserstein prox maps,
quasi-firmly nonexpansive operators on measures and proximal iterations."""

from .errors import *  # noqa: F401,F403
from .functionals import (
    Functional,
    check_gg_convexity,
    distance_potential,
    functional_from_spec,
    interaction_energy,
    lipschitz_probe,
    potential_energy,
    quadratic_interaction,
    quadratic_potential,
    sum_functional,
)
from .iterate import (
    Constant,
    Diminishing,
    IterationTrace,
    PerFunction,
    StepSchedule,
    StopRule,
    asymptotic_regularity,
    convergence_report,
    cyclic_ppa,
    cyclic_ppa_diminishing,
    fejer_monitor,
    ppa,
    quadratic_growth_check,
    step_bound_check,
)
from .measures import (
    DiscreteMeasure,
    FixedSetWitness,
    PointMap,
    canonicalize,
    dirac,
    make_discrete,
    projection_measure,
    pushforward,
    second_moment,
)
from .operators import (
    MeasureMap,
    check_disintegration_condition,
    check_nonexpansive,
    check_pushforward_ineq,
    check_quasi_afne,
    compose,
    composition_constant,
    operator_from_spec,
    prox_operator,
    pushforward_operator,
)
from .prox import ProxConfig, check_eq1, check_eq2, prox, prox_result, verify_argmin_fix
from .reports import CheckReport
from .transport import (
    TransportPlan,
    build_three_plan,
    disintegrate,
    generalized_geodesic,
    geodesic,
    map_induced_plan,
    solve_w2,
    w2,
    w2_squared,
)

__version__ = "0.1.0"
