"""Bohmian trajectories under dx/dt = j / rho.

Trajectories are integrated with classical RK4 and step-doubling error
control.  An ensemble is advanced as one batch: every trajectory keeps its
own step size and accept/reject history, so a path's result does not depend
on which other paths share the batch.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from numba import njit

from .observables import NODE_EPS
from .scenario import (
    Eigenstate,
    FreeGaussian,
    InitialState,
    Scenario,
    semiclassical_velocity,
    wavenumber,
)
from .wavefunction import evaluate, initial_wave, state_code, wave_kernel

log = logging.getLogger(__name__)

COMPLETED = "completed"
STOPPED_AT_NODE = "stopped-at-node"
LEFT_DOMAIN = "left-domain"

# Position errors made where the density is high reappear divided by the local
# density wherever the path later sits, so the per-step tolerance is tight.
DEFAULT_TOL = 1e-12  # um per step
MIN_STEP = 1e-13  # ms


@dataclass
class Trajectory:
    x0: float
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    status: str = COMPLETED
    message: str = ""

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return list(zip(self.t.tolist(), self.x.tolist(), self.v.tolist()))


@dataclass
class Ensemble:
    scenario: Scenario
    trajectories: list[Trajectory]
    seed: int | None = None
    mode: str = "quantile"
    times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def positions(self) -> np.ndarray:
        """(n_traj, n_times) array of x; NaN after a trajectory stops."""
        out = np.full((len(self.trajectories), len(self.times)), np.nan)
        for i, tr in enumerate(self.trajectories):
            m = min(len(tr.t), len(self.times))
            out[i, :m] = tr.x[:m]
        return out

    def velocities(self) -> np.ndarray:
        out = np.full((len(self.trajectories), len(self.times)), np.nan)
        for i, tr in enumerate(self.trajectories):
            m = min(len(tr.t), len(self.times))
            out[i, :m] = tr.v[:m]
        return out


@njit(cache=True, nogil=True)
def _field(kind, p0, p1, L, hm, node_eps, x, t):
    psi, dpsi = wave_kernel(kind, p0, p1, L, hm, x, t)
    rho = psi.real * psi.real + psi.imag * psi.imag
    if not rho >= node_eps:
        return 0.0, True
    v = hm * (psi.real * dpsi.imag - psi.imag * dpsi.real) / rho
    if not math.isfinite(v):
        return 0.0, True
    return v, False


@njit(cache=True, nogil=True)
def _rk4(kind, p0, p1, L, hm, node_eps, x, t, dt, k1):
    k2, b2 = _field(kind, p0, p1, L, hm, node_eps, x + 0.5 * dt * k1, t + 0.5 * dt)
    k3, b3 = _field(kind, p0, p1, L, hm, node_eps, x + 0.5 * dt * k2, t + 0.5 * dt)
    k4, b4 = _field(kind, p0, p1, L, hm, node_eps, x + dt * k3, t + dt)
    return x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0, b2 or b3 or b4


_ST_COMPLETED, _ST_NODE, _ST_UNDERFLOW, _ST_LEFT, _ST_MAXSTEPS = 0, 1, 2, 3, 4


@njit(cache=True, nogil=True)
def _integrate(kind, p0, p1, L, hm, node_eps, x0, ts, tol, min_step, fixed_step,
               extrapolate, xlo, xhi, max_steps, rec_x, rec_v):
    """Advance one path over ``ts``; fills rec_x/rec_v, returns (status, nrec, t, x, v)."""
    x = x0
    t = ts[0]
    k1, bad = _field(kind, p0, p1, L, hm, node_eps, x, t)
    rec_x[0] = x
    rec_v[0] = k1
    nrec = 1
    h = fixed_step if fixed_step > 0 else (ts[1] - ts[0]) / 4.0
    status = _ST_MAXSTEPS
    for _ in range(max_steps):
        if nrec == ts.shape[0]:
            status = _ST_COMPLETED
            break
        target = ts[nrec]
        rem = target - t
        hit = h >= rem
        hh = rem if hit else h
        if fixed_step > 0:
            x_new, bad = _rk4(kind, p0, p1, L, hm, node_eps, x, t, hh, k1)
            err = 0.0
        else:
            x_full, b1 = _rk4(kind, p0, p1, L, hm, node_eps, x, t, hh, k1)
            x_mid, b2 = _rk4(kind, p0, p1, L, hm, node_eps, x, t, 0.5 * hh, k1)
            k_mid, b3 = _field(kind, p0, p1, L, hm, node_eps, x_mid, t + 0.5 * hh)
            x_half, b4 = _rk4(kind, p0, p1, L, hm, node_eps, x_mid, t + 0.5 * hh, 0.5 * hh, k_mid)
            bad = b1 or b2 or b3 or b4
            diff = x_half - x_full
            err = abs(diff) / 15.0
            x_new = x_half + diff / 15.0 if extrapolate else x_half
        ok = err <= tol and not bad and math.isfinite(x_new)
        h_next = h
        if fixed_step <= 0:
            if bad:
                fac = 0.25
            elif err == 0.0:
                fac = 4.0
            else:
                fac = min(4.0, max(0.2, 0.9 * (tol / err) ** 0.2))
            # a step clipped to land on a sample time does not shrink h
            base = max(h, hh) if (hit and ok) else hh
            h_next = max(base * fac, min_step)
        if not ok:
            if hh <= min_step:
                status = _ST_NODE if bad else _ST_UNDERFLOW
                break
            h = h_next
            continue
        x = x_new
        t = target if hit else t + hh
        k1, bad = _field(kind, p0, p1, L, hm, node_eps, x, t)
        h = h_next
        if bad:
            status = _ST_NODE
            break
        if hit:
            rec_x[nrec] = x
            rec_v[nrec] = k1
            nrec += 1
        if x < xlo or x > xhi:
            status = _ST_LEFT
            break
    if nrec == ts.shape[0]:
        status = _ST_COMPLETED
    return status, nrec, t, x, k1


def _check_times(sample_times) -> np.ndarray:
    ts = np.ascontiguousarray(sample_times, dtype=float)
    if ts.ndim != 1 or ts.size < 2 or np.any(np.diff(ts) <= 0):
        raise ValueError("sample_times must be strictly increasing with >= 2 entries")
    return ts


def _run_one(scenario: Scenario, x0: float, ts: np.ndarray, tol: float, node_eps: float,
             min_step: float, fixed_step: float | None, extrapolate: bool,
             x_bounds, max_steps: int) -> Trajectory:
    kind, p0, p1 = state_code(scenario.state)
    L, hm = float(scenario.L), scenario.constants.hbar_over_m
    xlo, xhi = (-np.inf, np.inf) if x_bounds is None else map(float, x_bounds)
    rec_x = np.full(ts.size, np.nan)
    rec_v = np.full(ts.size, np.nan)
    status, nrec, t_end, x_end, v_end = _integrate(
        kind, p0, p1, L, hm, node_eps, float(x0), ts, tol, min_step,
        float(fixed_step or 0.0), extrapolate, xlo, xhi, max_steps, rec_x, rec_v)
    tt, tx, tv = ts[:nrec].copy(), rec_x[:nrec], rec_v[:nrec]
    if status == _ST_COMPLETED:
        return Trajectory(float(x0), tt, tx, tv)
    if status == _ST_MAXSTEPS:
        raise RuntimeError(f"trajectory from x0={x0!r} exceeded {max_steps} steps")
    if t_end > tt[-1]:
        tt, tx, tv = np.append(tt, t_end), np.append(tx, x_end), np.append(tv, v_end)
    if status == _ST_LEFT:
        return Trajectory(float(x0), tt, tx, tv, LEFT_DOMAIN,
                          f"left [{xlo}, {xhi}] at t={t_end!r} ms")
    why = "density below node_eps" if status == _ST_NODE else "step size underflow"
    log.info("trajectory from x0=%r stopped: %s", x0, why)
    return Trajectory(float(x0), tt, tx, tv, STOPPED_AT_NODE,
                      f"{why} near x={x_end!r} um, t={t_end!r} ms")


def integrate_batch(scenario: Scenario, x0s, sample_times, tol: float = DEFAULT_TOL, *,
                    node_eps: float = NODE_EPS, min_step: float = MIN_STEP,
                    x_bounds: tuple[float, float] | None = None,
                    fixed_step: float | None = None, extrapolate: bool = True,
                    max_steps: int = 50_000_000, workers: int | None = None) -> list[Trajectory]:
    """Integrate independent paths from ``sample_times[0]`` over the sample grid.

    Each path runs RK4 with step doubling: a step of size h is compared with
    two steps of h/2 and accepted when ``|difference| / 15 <= tol`` (um).
    The accepted value is the Richardson-corrected two-half-step result
    unless ``extrapolate`` is false.  ``fixed_step`` switches error control
    off.  Steps are clipped so that every sample time is hit exactly.

    Raises ``ValueError`` if a starting point lies on a node.
    """
    ts = _check_times(sample_times)
    x0s = [float(v) for v in np.atleast_1d(x0s)]
    for x0 in x0s:
        w = evaluate(scenario.state, x0, ts[0], scenario)
        if not float(np.abs(w.psi) ** 2) >= node_eps:
            raise ValueError(f"initial position x0={x0!r} is at a node (rho < {node_eps})")

    def job(x0):
        return _run_one(scenario, x0, ts, tol, node_eps, min_step, fixed_step,
                        extrapolate, x_bounds, max_steps)

    if len(x0s) == 1 or workers == 1:
        return [job(x0) for x0 in x0s]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, x0s))


def default_sample_times(scenario: Scenario, t_end: float, count: int = 201) -> np.ndarray:
    return np.linspace(scenario.t_start, t_end, count)


def integrate_trajectory(scenario: Scenario, x0: float, t_end: float,
                         tol: float = DEFAULT_TOL, *, sample_times=None,
                         node_eps: float = NODE_EPS, **kwargs) -> Trajectory:
    """Integrate one Bohmian path from ``(scenario.t_start, x0)`` to ``t_end``."""
    if not t_end > scenario.t_start:
        raise ValueError("t_end must exceed t_start")
    ts = default_sample_times(scenario, t_end) if sample_times is None else sample_times
    return integrate_batch(scenario, [x0], ts, tol, node_eps=node_eps, **kwargs)[0]


# Initial positions --------------------------------------------------------------

def _eigen_cdf(n: int, L: float, x):
    k = wavenumber(n, L)
    return x / L - np.sin(2 * k * x) / (2 * k * L)


def _z_minus_sin(z):
    """z - sin(z) without cancellation for small z."""
    z = np.asarray(z, dtype=float)
    z2 = z * z
    term, series = z * z2 / 6.0, np.zeros_like(z)
    for i in range(1, 12):
        series = series + term
        term = -term * z2 / ((2 * i + 2) * (2 * i + 3))
    return np.where(z < 0.5, series, z - np.sin(z))


def _invert_monotone(cdf, u, lo, hi, iterations=80):
    u = np.asarray(u, dtype=float)
    a = np.full(u.shape, lo, dtype=float)
    b = np.full(u.shape, hi, dtype=float)
    for _ in range(iterations):
        m = 0.5 * (a + b)
        below = cdf(m) < u
        a = np.where(below, m, a)
        b = np.where(below, b, m)
    return 0.5 * (a + b)


def quantile_positions(state: InitialState, u, L: float) -> np.ndarray:
    """Map probabilities ``u`` in (0, 1) to positions distributed as |psi0|^2."""
    u = np.asarray(u, dtype=float)
    if isinstance(state, Eigenstate):
        # invert lobe by lobe: between nodes the CDF is j/n + (z - sin z)/(2 n pi)
        # with z = 2 k (x - j L/n), which stays accurate next to the nodes
        n = state.n
        j = np.clip(np.floor(u * n), 0, n - 1)
        target = (u * n - j) * 2 * math.pi
        z = _invert_monotone(_z_minus_sin, target, 0.0, 2 * math.pi)
        return (j + z / (2 * math.pi)) * (L / n)
    # |psi0|^2 of either Gaussian is a normal law with standard deviation sigma0
    nd = NormalDist(state.x0, state.sigma0)
    if isinstance(state, FreeGaussian):
        return np.array([nd.inv_cdf(p) for p in u.ravel()]).reshape(u.shape)
    lo, hi = nd.cdf(0.0), nd.cdf(L)
    return np.array([nd.inv_cdf(lo + p * (hi - lo)) for p in u.ravel()]).reshape(u.shape)


def sample_initial_positions(state: InitialState, count: int, seed: int | None = None,
                             *, L: float = 1.0, mode: str = "born",
                             node_eps: float = NODE_EPS) -> list[float]:
    """Initial positions distributed as |psi0|^2 on the box.

    ``mode="born"`` draws independent samples from ``numpy.random.default_rng(seed)``;
    ``mode="quantile"`` places the points at the probabilities ``(i + 1/2)/count``.
    Points where ``|psi0|^2 < node_eps`` are redrawn (born) or dropped
    (quantile).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if mode == "quantile":
        xs = quantile_positions(state, (np.arange(count) + 0.5) / count, L)
        keep = np.abs(initial_wave(state, xs, L)) ** 2 >= node_eps
        if not np.all(keep):
            warnings.warn(f"dropped {int((~keep).sum())} quantile point(s) at nodes", stacklevel=2)
        return xs[keep].tolist()
    if mode != "born":
        raise ValueError(f"unknown sampling mode {mode!r}")
    rng = np.random.default_rng(seed)
    out: list[float] = []
    while len(out) < count:
        xs = quantile_positions(state, rng.random(count - len(out)), L)
        ok = np.abs(initial_wave(state, xs, L)) ** 2 >= node_eps
        out.extend(xs[ok].tolist())
    return out


def ensemble(scenario: Scenario, count: int, seed: int | None = None,
             t_end: float | None = None, tol: float = DEFAULT_TOL, *,
             mode: str = "quantile", sample_times=None, node_eps: float = NODE_EPS,
             positions=None, **kwargs) -> Ensemble:
    """Integrate a set of paths; order of results follows the initial positions."""
    t_end = scenario.t_max if t_end is None else t_end
    ts = default_sample_times(scenario, t_end) if sample_times is None else np.asarray(sample_times)
    if positions is None:
        positions = sample_initial_positions(scenario.state, count, seed, L=scenario.L,
                                             mode=mode, node_eps=node_eps)
    trajs = integrate_batch(scenario, positions, ts, tol, node_eps=node_eps, **kwargs)
    return Ensemble(scenario, trajs, seed, mode, ts)


# Bifurcation proxy --------------------------------------------------------------

def velocity_split(v, v_ref: float, central_fraction: float = 0.0) -> bool:
    """True when velocities form two groups beyond +-v_ref/2.

    The velocities are binned into (-inf, -v_ref/2), [-v_ref/2, v_ref/2] and
    (v_ref/2, inf).  The split holds when both outer bins are occupied and
    the central bin holds at most ``central_fraction`` of the paths.
    """
    v = np.asarray(v, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        return False
    half = 0.5 * v_ref
    left = np.count_nonzero(v < -half)
    right = np.count_nonzero(v > half)
    centre = v.size - left - right
    return left > 0 and right > 0 and centre <= central_fraction * v.size


def bifurcation_time(ens: Ensemble, v_ref: float | None = None,
                     central_fraction: float = 0.0) -> float | None:
    """Earliest sample time at which :func:`velocity_split` holds, else None.

    ``v_ref`` defaults to the semiclassical velocity of an eigenstate.
    """
    if v_ref is None:
        st = ens.scenario.state
        if not isinstance(st, Eigenstate):
            raise ValueError("v_ref is required for non-eigenstate ensembles")
        v_ref = semiclassical_velocity(st.n, ens.scenario)
    V = ens.velocities()
    for k, t in enumerate(ens.times):
        if velocity_split(V[:, k], v_ref, central_fraction):
            return float(t)
    return None
