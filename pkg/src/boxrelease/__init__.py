"""Particle released from a one-dimensional box: closed-form wavefunctions,
Bohmian trajectories and arrival-time distributions."""
from importlib.metadata import PackageNotFoundError, version as _version

from .arrival import (ArrivalDistribution, ArrivalError, CurrentSeries, arrival,
                      arrival_cutoff, arrival_leavens, cumulative_flux, current_series,
                      detection_probability, mean_arrival)
from .bohmian import (Ensemble, Trajectory, bifurcation_time, ensemble, integrate_batch,
                      integrate_trajectory, sample_initial_positions)
from .observables import NodeError, current, density, velocity
from .scenario import (BoxGeometry, Eigenstate, FreeGaussian, GridSpec, PhysicalConstants,
                       Scenario, ScenarioError, TruncatedGaussian, parse_state,
                       semiclassical_time, semiclassical_velocity, validate)
from .special import erf_complex, fresnel_f
from .wavefunction import (WaveSample, eigenstate_wave, evaluate, free_gaussian_wave,
                           gaussian_wave, oracle_wave)

try:
    __version__ = _version("artifact")
except PackageNotFoundError:  # source checkout without install
    __version__ = "0.1.0"
