from .baselines import Constant, Diminishing, run_dgd, run_gradient_tracking, run_prox_pda
from .batch import BatchOutcome, batch_dgd, batch_gradient_tracking, batch_prox_pda
from .common import AlgorithmError, RunResult, Termination

__all__ = [
    "AlgorithmError",
    "BatchOutcome",
    "Constant",
    "Diminishing",
    "batch_dgd",
    "batch_gradient_tracking",
    "batch_prox_pda",
    "RunResult",
    "Termination",
    "run_dgd",
    "run_gradient_tracking",
    "run_prox_pda",
]

from .magenta import (  # noqa: E402
    MagentaInternalError,
    MagentaParams,
    StageReport,
    StageSchedule,
    default_gamma,
    magenta_stage_bound,
    magenta_stepsize,
    project_ball,
    run_magenta,
    theorem1_constants,
)

__all__ += [
    "MagentaInternalError",
    "MagentaParams",
    "StageReport",
    "StageSchedule",
    "default_gamma",
    "magenta_stage_bound",
    "magenta_stepsize",
    "project_ball",
    "run_magenta",
    "theorem1_constants",
]
