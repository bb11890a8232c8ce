"""Coordination mechanisms for selfish scheduling on unrelated machines."""

from .analysis import (
    CapExceeded,
    EquilibriumReport,
    enumerate_equilibria,
    optimal_makespan,
    poa_pos_report,
    verify_load_bounds,
)
from .dynamics import best_response, is_equilibrium, potential, run_dynamics
from .instance import (
    UNAVAILABLE,
    Assignment,
    Instance,
    generate_instance,
    load_vector,
    machine_load,
    makespan,
    p_norm,
)
from .mechanism import (
    MAKESPAN,
    CoefficientFunction,
    CompletionTime,
    completion_time,
    default_d,
    deviation_key,
    lambda_player,
    lambda_set,
)

__version__ = "0.1.0"
