"""CBF safe control sets, QP filters, gauge maps, and safe NN controllers."""

from .polytope import Polytope, ChebyshevResult, chebyshev_center, UnboundedSetError
from .qp import QpSolution, QpError, InfeasibleError, solve_qp, qp_filter, qp_filter_with_solution, qp_filter_grad
from .gauge import gauge_map, gauge_unmap, gauge_map_grad, GaugeError
from .barrier import BarrierParams, safe_control_set, barrier_value, InfeasibleBarrierError
from .controller import (
    AccPlantConfig,
    ControllerNet,
    ControllerTrainConfig,
    train_controller,
    run_closed_loop,
    controller_to_dict,
    controller_from_dict,
)
from .mpc import mpc_baseline

__all__ = [
    "Polytope", "ChebyshevResult", "chebyshev_center", "UnboundedSetError",
    "QpSolution", "QpError", "InfeasibleError", "solve_qp", "qp_filter",
    "qp_filter_with_solution", "qp_filter_grad",
    "gauge_map", "gauge_unmap", "gauge_map_grad", "GaugeError",
    "BarrierParams", "safe_control_set", "barrier_value", "InfeasibleBarrierError",
    "AccPlantConfig", "ControllerNet", "ControllerTrainConfig",
    "train_controller", "run_closed_loop", "controller_to_dict", "controller_from_dict",
    "mpc_baseline",
]
