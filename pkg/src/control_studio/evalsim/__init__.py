from .metrics import rmse, rmse_per_stream, bootstrap_ci, spearman_rho
from .simulate import (
    ControlTrial,
    EvalContext,
    ProtocolError,
    simulate_control,
    crude_control,
    random_slots,
)
from .refine import RefinementStep, RefinementTrace, iterative_refinement
from .sweep import SweepEntry, SweepReport, robustness_sweep, DEFAULT_K_GRID
from .stimuli import export_stimuli
from . import report, figures
