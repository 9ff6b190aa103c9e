"""Integration loop: steps a perturbed medium until it dies out or time runs out."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Protocol

import numpy as np

from .errors import BZError, ContractViolation, ObserverError
from .medium import MediumState, OregonatorParams, PerturbationSpec, Stepper, perturb
from .metrics import EXCITE_THRESHOLD, CoverageTracker, RunRecord, activity, classify_outcome

log = logging.getLogger(__name__)


class Observer(Protocol):
    stride: int

    def observe(self, state: MediumState) -> None: ...


@dataclass(frozen=True)
class RunSchedule:
    max_steps: int = 100_000
    extinction_window: int = 1000
    workers: int = 1

    def __post_init__(self):
        if self.max_steps < 0:
            raise ContractViolation("max_steps must be >= 0")
        if self.extinction_window < 1:
            raise ContractViolation("extinction_window must be >= 1")
        if self.workers < 1:
            raise ContractViolation("workers must be >= 1")


def initial_state(mask, perturbations: Iterable[PerturbationSpec]) -> MediumState:
    state = MediumState.zeros(mask)
    for spec in perturbations:
        state = perturb(state, spec)
    return state


def run(state: MediumState, params: OregonatorParams, schedule: RunSchedule,
        observers: Iterable[Observer] = (), *,
        excite_threshold: float = EXCITE_THRESHOLD, count_stride: int = 1,
        tracker: CoverageTracker | None = None) -> RunRecord:
    """Integrate ``state`` in place under ``schedule`` and return the record.

    Observers are called after every step whose index is a multiple of
    their ``stride``, in the order given. The run stops early once activity
    has been zero for ``schedule.extinction_window`` consecutive steps.
    """
    observers = list(observers)
    for obs in observers:
        if getattr(obs, "stride", 0) < 1:
            raise ContractViolation(f"observer {obs!r} needs a positive stride")
    if tracker is None:
        tracker = CoverageTracker(state.mask, excite_threshold, count_stride)
    elif tracker.mask != state.mask:
        raise ContractViolation("tracker mask differs from state mask")
    start_activity = activity(state, tracker.excite_threshold)

    executed = 0
    zero_run = 0
    series = np.zeros(schedule.max_steps // tracker.stride, dtype=np.int64)
    n_recorded = 0
    if schedule.max_steps > 0:
        with Stepper(state, params, workers=schedule.workers,
                     threshold=tracker.excite_threshold,
                     counts=tracker._counts, ever=tracker._ever) as stepper:
            while executed < schedule.max_steps:
                # integrate up to the next step some observer wants to see
                chunk = schedule.max_steps - executed
                for obs in observers:
                    chunk = min(chunk, obs.stride - state.step_index % obs.stride)
                done, n_recorded, zero_run = stepper.advance(
                    chunk, series, n_recorded, tracker.stride, zero_run,
                    schedule.extinction_window)
                executed += done
                for obs in observers:
                    if state.step_index % obs.stride == 0:
                        try:
                            obs.observe(state)
                        except (OSError, BZError) as exc:
                            raise ObserverError(
                                f"observer {type(obs).__name__} failed at step "
                                f"{state.step_index}: {exc}") from exc
                if zero_run >= schedule.extinction_window:
                    break
    tracker.extend_series(series[:n_recorded])

    outcome = classify_outcome(
        tracker.activity_series, executed, schedule.max_steps,
        extinction_window=schedule.extinction_window,
        perturbation_size=start_activity, stride=tracker.stride,
    )
    log.debug("phi=%s: %s after %d steps, coverage %.4f",
              params.phi, outcome, executed, tracker.coverage)
    return RunRecord(tracker=tracker, outcome=outcome, steps_executed=executed,
                     coverage=tracker.coverage, initial_activity=start_activity,
                     params=params)


def simulate(mask, params: OregonatorParams, perturbations: Iterable[PerturbationSpec],
             schedule: RunSchedule, observers: Iterable[Observer] = (), **kwargs) -> RunRecord:
    """Fresh zero medium, apply perturbations, run."""
    return run(initial_state(mask, perturbations), params, schedule, observers, **kwargs)
