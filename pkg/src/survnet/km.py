"""Kaplan-Meier estimates of survival and censoring curves, and IPCW weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import SubjectWeights, as_arrays
from .errors import DegenerateCensoring, EmptyDataset


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous non-increasing step function starting at 1.

    ``values[i]`` holds on ``[times[i], times[i + 1])``.
    """

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="right")
        return np.concatenate([[1.0], self.values])[idx]

    def left_limit(self, t) -> np.ndarray:
        """Value just before ``t``: the step at the largest jump strictly below ``t``."""
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.times, t, side="left")
        return np.concatenate([[1.0], self.values])[idx]


def kaplan_meier(event, time) -> StepFunction:
    """Product-limit estimate over distinct event times.

    Subjects censored at an event time are still at risk at that time.
    """
    event, time = as_arrays(event, time)
    if time.size == 0:
        raise EmptyDataset("Kaplan-Meier needs at least one subject")
    tau, deaths = np.unique(time[event], return_counts=True)
    at_risk = time.size - np.searchsorted(np.sort(time), tau, side="left")
    values = np.cumprod(1.0 - deaths / at_risk)
    return StepFunction(tau, values)


def censoring_distribution(event, time) -> StepFunction:
    """Kaplan-Meier estimate of the censoring survival function."""
    event, time = as_arrays(event, time)
    return kaplan_meier(~event, time)


def ipcw_weights(censoring: StepFunction, event, time, horizon: float) -> SubjectWeights:
    """Inverse-probability-of-censoring weights at ``horizon``.

    Events at or before the horizon get ``1 / G(time-)``; subjects still
    under observation after it get ``1 / G(horizon)``; everyone else 0.
    """
    event, time = as_arrays(event, time)
    cases = event & (time <= horizon)
    controls = time > horizon
    w = np.zeros(time.size)
    if cases.any():
        g = censoring.left_limit(time[cases])
        if np.any(g <= 0):
            bad = int(np.flatnonzero(cases)[np.argmax(g <= 0)])
            raise DegenerateCensoring(
                f"censoring survival is 0 just before subject {bad}'s event time", row=bad
            )
        w[cases] = 1.0 / g
    if controls.any():
        g_h = float(censoring(horizon))
        if g_h <= 0:
            bad = int(np.argmax(controls))
            raise DegenerateCensoring(
                f"censoring survival is 0 at horizon {horizon} (subject {bad})", row=bad
            )
        w[controls] = 1.0 / g_h
    return SubjectWeights(w, "ipcw")
