"""Steady-state quantum sensing with the driven-dissipative Jaynes-Cummings model."""
from .errors import DSLError
from .model import ModelParams, SteadyStateResult, steady_state
from .operators import TruncationSpec

__version__ = "0.1.0"

__all__ = ["DSLError", "ModelParams", "SteadyStateResult", "TruncationSpec", "steady_state", "__version__"]
