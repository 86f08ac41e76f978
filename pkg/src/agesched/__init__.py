"""Age-of-information optimal transmission scheduling for energy-harvesting links."""

from .model import (
    AgeTrace,
    FeasibilityReport,
    InconsistentVectorError,
    InfeasibleInstanceError,
    InterUpdateVector,
    Schedule,
    SingleHopInstance,
    TwoHopInstance,
    TwoHopSchedule,
    age_trace_single_hop,
    age_trace_two_hop,
    check_inter_update_feasibility,
    check_schedule,
    check_two_hop_schedule,
    integrate_age,
    objective_single_hop,
    objective_two_hop,
    t_from_x,
    validate_single_hop,
    validate_two_hop,
    x_from_t,
)
from .single_hop import (
    Branch,
    SolveReport,
    amend_long_horizon,
    check_necessary_conditions,
    inter_update_balancing,
    solve,
    solve_short_horizon,
)
from .two_hop import ReductionMap, recover_schedule, reduce, solve_two_hop

__version__ = "0.1.0"
