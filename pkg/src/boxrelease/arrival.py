"""Arrival-time distributions at a point detector.

Two rules are provided: the modulus-of-current rule, ``Pi = |j| / int |j|``,
and the cut-off current rule, which keeps ``j`` only while the cumulative
flux through the detector sits at a new running extremum.  For a current of
one sign the two coincide.

All time integrals use the trapezoid rule on the supplied grid, starting at
the first grid time (``t_start`` > 0) rather than at 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observables import current
from .scenario import Scenario
from .wavefunction import evaluate

LEAVENS = "leavens"
CUTOFF = "cutoff"

# detection probabilities (or int |j|) below this are rounding noise
ZERO_DETECTION = 1e-12


class ArrivalError(ValueError):
    """The detector never registers any flux."""


@dataclass(frozen=True)
class CurrentSeries:
    detector_x: float
    times: np.ndarray  # ms
    j: np.ndarray  # 1/ms

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        j = np.asarray(self.j, dtype=float)
        if t.ndim != 1 or t.shape != j.shape or t.size < 2:
            raise ValueError("times and j must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.all(np.isfinite(j)):
            raise ValueError("current must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "j", j)


@dataclass(frozen=True)
class ArrivalDistribution:
    times: np.ndarray
    pi: np.ndarray  # 1/ms
    mean: float  # ms
    method: str
    detection_probability: float | None = None


def current_series(scenario: Scenario, detector_x: float | None = None,
                   t_grid=None) -> CurrentSeries:
    """j(X, t) over ``t_grid`` (defaults to the scenario's time grid)."""
    X = scenario.detector_x if detector_x is None else float(detector_x)
    times = scenario.t_grid.values() if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(times <= 0):
        raise ValueError("current series needs all grid times > 0")
    w = evaluate(scenario.state, np.full_like(times, X), times, scenario)
    return CurrentSeries(X, times, current(w, scenario.constants))


def _trapezoid(y, t) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def cumulative_flux(series: CurrentSeries) -> np.ndarray:
    """f_X(s) = int_{t_start}^s j(X, t) dt on the grid, f_X(t_start) = 0."""
    inc = 0.5 * (series.j[1:] + series.j[:-1]) * np.diff(series.times)
    return np.concatenate(([0.0], np.cumsum(inc)))


def detection_probability(series: CurrentSeries, t: float | None = None) -> float:
    """max{f(s): s <= t} + max{-f(s): s <= t}; ``t`` defaults to the last grid time."""
    f = cumulative_flux(series)
    if t is not None:
        if not series.times[0] <= t <= series.times[-1]:
            raise ValueError("t outside the series grid")
        f = f[: np.searchsorted(series.times, t, side="right")]
    return float(f.max() + (-f).max())


def _normalise(times, weight, method, p_det=None) -> ArrivalDistribution:
    norm = _trapezoid(weight, times)
    if not norm > ZERO_DETECTION:
        raise ArrivalError(f"no flux reaches the detector on this grid (integral {norm:.3e})")
    pi = weight / norm
    dist = ArrivalDistribution(times, pi, 0.0, method, p_det)
    return ArrivalDistribution(times, pi, mean_arrival(dist), method, p_det)


def arrival_leavens(series: CurrentSeries) -> ArrivalDistribution:
    """Pi(t) = |j(X, t)| / int |j(X, t')| dt'."""
    return _normalise(series.times, np.abs(series.j), LEAVENS)


def cutoff_mask(f: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Bracket of the cut-off rule at each grid point: +1, 0 or -1.

    ``Theta(f - max f) - Theta(-f - max(-f))`` with running maxima that
    include the current sample and Theta(0) = 1, so a sample registers when
    the flux equals its running maximum (or minimum).  Ties on a flux
    plateau all register.

    On a grid the flux can top out between two samples; a sample then sits
    at the discrete maximum although j has already turned negative.  As in
    the continuum, where f can only be at its running maximum while it is not
    decreasing, an upward detection also needs ``j >= 0`` and a downward one
    ``j <= 0``.  This also settles the first sample, where f = 0 is both
    extremes and the direction of j decides.
    """
    up = (f >= np.maximum.accumulate(f)) & (j >= 0)
    down = (-f >= np.maximum.accumulate(-f)) & (j <= 0)
    return up.astype(float) - down.astype(float)


def arrival_cutoff(series: CurrentSeries) -> ArrivalDistribution:
    """Cut-off current distribution.

    The retained current ``j * bracket`` is normalised by its trapezoid
    integral.  That constant equals the detection probability P(t_max) up to
    O(dt) at the instants where the flux regains a previous extremum, and
    exactly when j has one sign.
    """
    f = cumulative_flux(series)
    p_det = float(f.max() + (-f).max())
    if not p_det > ZERO_DETECTION:
        raise ArrivalError(f"zero detection probability (P = {p_det:.3e}): no flux crosses the detector")
    retained = series.j * cutoff_mask(f, series.j)
    return _normalise(series.times, retained, CUTOFF, p_det)


def mean_arrival(dist: ArrivalDistribution) -> float:
    """Trapezoid estimate of int t Pi(t) dt."""
    return _trapezoid(dist.times * dist.pi, dist.times)


def arrival(series: CurrentSeries, method: str = LEAVENS) -> ArrivalDistribution:
    if method == LEAVENS:
        return arrival_leavens(series)
    if method == CUTOFF:
        return arrival_cutoff(series)
    raise ValueError(f"unknown arrival method {method!r}")
