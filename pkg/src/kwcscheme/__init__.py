"""Structure-preserving finite-difference scheme for the 1D KWC grain-boundary system.

The orientation order ``eta`` is advanced by a linear implicit step and the
orientation angle ``theta`` by a nonlinear implicit step whose discrete
energy never increases. See :mod:`kwcscheme.stepper` for the time step,
:mod:`kwcscheme.analysis` for refinement studies and :mod:`kwcscheme.cli`
for the command-line driver.
"""
from .discrete_ops import GridSpec, make_field, fold_ghosts, interior
from .model import PAPER_PARAMS, MobilityField, ModelParams, StabilityBounds, dt_error_bound, \
    dt_existence_bound
from .stepper import SimState, StepReport, ThetaNonconvergence, ThetaSolveConfig, Trajectory, \
    advance, discrete_energy, initial_state, simulate
from .analysis import ConvergenceReport, convergence_study, smooth_initial_data

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "make_field", "fold_ghosts", "interior",
    "PAPER_PARAMS", "MobilityField", "ModelParams", "StabilityBounds", "dt_error_bound",
    "dt_existence_bound",
    "SimState", "StepReport", "ThetaNonconvergence", "ThetaSolveConfig", "Trajectory",
    "advance", "discrete_energy", "initial_state", "simulate",
    "ConvergenceReport", "convergence_study", "smooth_initial_data",
]
