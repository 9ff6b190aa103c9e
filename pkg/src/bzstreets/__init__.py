"""Oregonator excitation waves on street-network masks, with coverage sweeps
and the statistics/clustering used to compare superposition maps."""

from .medium import (GridMask, MediumState, OregonatorParams, PerturbationSpec,
                     euler_step, laplacian5, perturb, rest_state)
from .metrics import CoverageTracker, RunRecord, activity, classify_outcome, frequency_map, observe
from .runner import RunSchedule, run, simulate

__version__ = "0.1.0"

__all__ = [
    "GridMask", "MediumState", "OregonatorParams", "PerturbationSpec",
    "euler_step", "laplacian5", "perturb", "rest_state",
    "CoverageTracker", "RunRecord", "activity", "classify_outcome", "frequency_map", "observe",
    "RunSchedule", "run", "simulate",
]
