"""Wavefunction after both walls of the box are removed at t = 0.

Every evaluator is vectorised over ``x`` and ``t`` (numpy broadcasting) and
returns a :class:`WaveSample` holding psi and d psi / dx.

Eigenstates use the Fresnel closed form.  The truncated Gaussian uses the
completed-square form of the Gaussian-kernel integral, written in terms of
the Faddeeva function so no intermediate quantity overflows.  ``oracle_wave``
integrates the free propagator against the initial state directly and is
kept independent of both.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .scenario import (
    Eigenstate,
    FreeGaussian,
    InitialState,
    Scenario,
    TruncatedGaussian,
    wavenumber,
)
from .special import HALF_1PI, SQRT_PI, tail_scalar, w_upper

# sqrt(1/i) on the principal branch, as in the free propagator
_INV_SQRT_I = cmath.exp(-0.25j * math.pi)
# sqrt(m/(2 pi i hbar t)) sqrt(2/L) / (2i) * sqrt(pi hbar t / m), times sqrt(L)
_EIGEN_C = cmath.exp(-0.75j * math.pi) / 2.0


@dataclass(frozen=True)
class WaveSample:
    """psi [um^-1/2] and dpsi/dx [um^-3/2] at (x [um], t [ms]); arrays broadcast."""

    x: np.ndarray
    t: np.ndarray
    psi: np.ndarray
    dpsi_dx: np.ndarray


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("wavefunction evaluation needs t > 0")
    return t


def xi_n(n: int, x, t, scenario: Scenario):
    """Fresnel upper limit sqrt(m/(pi hbar t)) (v_n t - x)."""
    t = _check_t(t)
    hm = scenario.constants.hbar_over_m
    v = hm * wavenumber(n, scenario.L)
    return np.sqrt(1.0 / (math.pi * hm * t)) * (v * t - np.asarray(x, dtype=float))


def initial_wave(state: InitialState, x, L: float):
    """psi(x, 0); zero outside [0, L] except for the untruncated Gaussian."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= L)
    if isinstance(state, Eigenstate):
        k = wavenumber(state.n, L)
        return np.where(inside, math.sqrt(2.0 / L) * np.sin(k * x), 0.0)
    norm = (2 * math.pi * state.sigma0**2) ** -0.25
    g = norm * np.exp(-((x - state.x0) ** 2) / (4 * state.sigma0**2))
    if isinstance(state, FreeGaussian):
        return g
    return np.where(inside, g, 0.0)


def initial_wave_derivative(state: InitialState, x, L: float):
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= L)
    if isinstance(state, Eigenstate):
        k = wavenumber(state.n, L)
        return np.where(inside, math.sqrt(2.0 / L) * k * np.cos(k * x), 0.0)
    d = -(x - state.x0) / (2 * state.sigma0**2) * initial_wave(state, x, L)
    return d


@njit(cache=True, nogil=True)
def _sgn(q):
    return -1.0 if q < 0 else 1.0


@njit(cache=True, nogil=True)
def eigen_kernel(n, L, hm, x, t):
    """(psi, dpsi/dx) of released eigenstate n at one point; hm = hbar/m."""
    k = n * math.pi / L
    s = math.sqrt(1.0 / (math.pi * hm * t))
    a = 0.5 / (hm * t)
    energy_phase = 0.5 * hm * k * k * t  # E t / hbar
    parity = -1.0 if n % 2 else 1.0  # exp(+-i k L)
    c = _EIGEN_C / math.sqrt(L)
    vt = hm * k * t
    xi_a = s * (vt - (x - L))
    xi_b = s * (vt - x)
    xi_c = s * (vt - (L - x))
    xi_d = s * (vt + x)
    ph_edge = parity * cmath.exp(1j * (a * (x - L) * (x - L)))
    ph_orig = cmath.exp(1j * (a * x * x))
    plane_p = cmath.exp(1j * (k * x - energy_phase)) * (HALF_1PI * (_sgn(xi_a) - _sgn(xi_b)))
    plane_m = cmath.exp(-1j * (k * x + energy_phase)) * (HALF_1PI * (_sgn(xi_c) - _sgn(xi_d)))
    psi_p = c * (plane_p + ph_edge * tail_scalar(xi_a) - ph_orig * tail_scalar(xi_b))
    psi_m = c * (plane_m + ph_edge * tail_scalar(xi_c) - ph_orig * tail_scalar(xi_d))
    # d/dx of the F terms adds c s [...] to each part with opposite signs;
    # they cancel because sin(k x') vanishes at both walls.
    return psi_p + psi_m, 1j * k * (psi_p - psi_m)


@njit(cache=True, nogil=True)
def gauss_kernel(x0, sigma0, L, hm, x, t, truncated):
    """(psi, dpsi/dx) of the released Gaussian, truncated to [0, L] or free."""
    A = 0.25 / (sigma0 * sigma0)
    a = 0.5 / (hm * t)
    alpha = A - 1j * a
    sqrt_alpha = cmath.sqrt(alpha)
    q_star = 1j * a * A * (x - x0) * (x - x0) / alpha
    pref = (2 * math.pi * sigma0 * sigma0) ** -0.25 * math.sqrt(a / math.pi) * _INV_SQRT_I
    if not truncated:
        integral = SQRT_PI / sqrt_alpha * cmath.exp(q_star)
        return pref * integral, pref * 2j * a * A * (x - x0) / alpha * integral
    centre = (A * x0 - 1j * a * x) / alpha
    z_l = sqrt_alpha * (L - centre)
    z_0 = -sqrt_alpha * centre
    s_l = _sgn(z_l.real)
    s_0 = _sgn(z_0.real)
    e_l = cmath.exp(-A * (L - x0) * (L - x0) + 1j * (a * (x - L) * (x - L)))
    e_0 = cmath.exp(-A * x0 * x0 + 1j * (a * x * x))
    bracket = (s_l - s_0) * cmath.exp(q_star) - s_l * e_l * w_upper(1j * s_l * z_l) \
        + s_0 * e_0 * w_upper(1j * s_0 * z_0)
    integral = SQRT_PI / (2 * sqrt_alpha) * bracket
    dpsi = pref * 2j * a * (A * (x - x0) / alpha * integral + (e_l - e_0) / (2 * alpha))
    return pref * integral, dpsi


@njit(cache=True, nogil=True)
def wave_kernel(kind, p0, p1, L, hm, x, t):
    """Dispatch on state kind: 0 eigenstate (p0 = n), 1 truncated, 2 free Gaussian."""
    if kind == 0:
        return eigen_kernel(int(p0), L, hm, x, t)
    return gauss_kernel(p0, p1, L, hm, x, t, kind == 1)


@njit(cache=True)
def _wave_map(kind, p0, p1, L, hm, x, t):
    psi = np.empty(x.shape[0], dtype=np.complex128)
    dpsi = np.empty(x.shape[0], dtype=np.complex128)
    for i in range(x.shape[0]):
        psi[i], dpsi[i] = wave_kernel(kind, p0, p1, L, hm, x[i], t[i])
    return psi, dpsi


def state_code(state: InitialState) -> tuple[int, float, float]:
    """(kind, p0, p1) triple understood by the compiled kernels."""
    if isinstance(state, Eigenstate):
        return 0, float(state.n), 0.0
    if isinstance(state, TruncatedGaussian):
        return 1, float(state.x0), float(state.sigma0)
    if isinstance(state, FreeGaussian):
        return 2, float(state.x0), float(state.sigma0)
    raise TypeError(f"unsupported state {state!r}")


def _run(code, x, t, scenario: Scenario) -> WaveSample:
    t = _check_t(t)
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), t)
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    xf = np.ascontiguousarray(x.ravel())
    tf = np.ascontiguousarray(t.ravel())
    psi, dpsi = _wave_map(code[0], code[1], code[2], float(scenario.L),
                          scenario.constants.hbar_over_m, xf, tf)
    return WaveSample(x, t, psi.reshape(x.shape), dpsi.reshape(x.shape))


def eigenstate_wave(n: int, x, t, scenario: Scenario) -> WaveSample:
    """Released box eigenstate n as a sum of right- and left-moving parts.

    Each part is ``c exp(+-ikx - iEt/hbar) [F(xi_1) - F(xi_2)]`` with
    ``c = exp(-3i pi/4) / (2 sqrt L)``.  Writing ``F = sgn (1+i)/2 +
    exp(i pi xi^2/2) r(xi)`` lets the large phases ``E t/hbar`` and
    ``pi xi^2/2`` cancel analytically, leaving ``exp(i a y^2)`` with
    ``a = m/(2 hbar t)``.
    """
    wavenumber(n, scenario.L)
    return _run((0, float(n), 0.0), x, t, scenario)


def gaussian_wave(x0: float, sigma0: float, x, t, scenario: Scenario) -> WaveSample:
    """Truncated Gaussian released from [0, L].

    The integral of ``exp(Q(x'))`` over [0, L], Q quadratic, equals
    ``sqrt(pi)/(2 sqrt(alpha)) exp(Q*) [erf(z_L) - erf(z_0)]``.  Each erf is
    rewritten as ``s - s exp(-z^2) w(i s z)`` with ``s = sign(Re z)`` so that
    w is only evaluated in the upper half plane, and ``exp(Q* - z^2)`` is the
    bounded endpoint value ``exp(Q(endpoint))``.
    """
    return _run((1, float(x0), float(sigma0)), x, t, scenario)


def free_gaussian_wave(x0: float, sigma0: float, x, t, scenario: Scenario) -> WaveSample:
    """The same Gaussian evolving with no truncation (full-line integral)."""
    return _run((2, float(x0), float(sigma0)), x, t, scenario)


def evaluate(state: InitialState, x, t, scenario: Scenario) -> WaveSample:
    """Closed-form evaluation for any supported initial state."""
    return _run(state_code(state), x, t, scenario)


def norm_truncated_gaussian(x0: float, sigma0: float, L: float) -> float:
    """Probability kept in [0, L] by the truncation."""
    r = math.sqrt(2.0) * sigma0
    return 0.5 * (math.erf((L - x0) / r) + math.erf(x0 / r))


# Brute-force propagator oracle ------------------------------------------------

class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


# Gauss-Kronrod 7/15 abscissae on [-1, 1] (QUADPACK qk15), positive half
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

GK_NODES = np.concatenate((-_XGK[:-1], _XGK[::-1]))
GK_WEIGHTS = np.concatenate((_WGK[:-1], _WGK[::-1]))
_G_WEIGHTS_FULL = np.zeros(15)
_G_WEIGHTS_FULL[[1, 3, 5]] = _WG[:3]
_G_WEIGHTS_FULL[[13, 11, 9]] = _WG[:3]
_G_WEIGHTS_FULL[7] = _WG[3]
G_WEIGHTS = _G_WEIGHTS_FULL


def gauss_kronrod(f, lo, hi, tol, *, initial_panels=1, max_panels=200_000):
    """Adaptive G7/K15 quadrature of a vector-valued integrand.

    ``f`` maps a 1-d array of abscissae to an array of shape ``(m, len)``.
    Panels are bisected until each panel's |K15 - G7| is below its share
    ``tol * width / (hi - lo)`` of the absolute tolerance.

    Returns
    -------
    value : ndarray, shape (m,)
    error : float
        Sum of the panel error estimates.
    """
    edges = np.linspace(lo, hi, max(1, int(initial_panels)) + 1)
    left, right = edges[:-1], edges[1:]
    total = None
    err_total = 0.0
    span = hi - lo
    while left.size:
        mid = 0.5 * (left + right)
        half = 0.5 * (right - left)
        pts = (mid[:, None] + half[:, None] * GK_NODES[None, :]).ravel()
        vals = np.asarray(f(pts)).reshape(-1, left.size, 15)
        k15 = (vals * GK_WEIGHTS).sum(axis=-1) * half
        g7 = (vals * G_WEIGHTS).sum(axis=-1) * half
        err = np.max(np.abs(k15 - g7), axis=0)
        ok = err <= tol * (2 * half) / span
        if np.any(ok):
            part = k15[:, ok].sum(axis=1)
            total = part if total is None else total + part
            err_total += float(err[ok].sum())
        left, right = left[~ok], right[~ok]
        if left.size:
            if left.size * 2 > max_panels or np.min(right - left) < 1e-14 * span:
                raise QuadratureError(
                    f"no convergence on [{lo}, {hi}]: {left.size} panels pending, "
                    f"worst estimate {float(err[~ok].max()):.3e}"
                )
            m = 0.5 * (left + right)
            left, right = np.concatenate((left, m)), np.concatenate((m, right))
    if total is None:
        total = np.zeros(np.asarray(f(np.array([lo]))).shape[0], dtype=complex)
    return total, err_total


def _support(state: InitialState, L: float) -> tuple[float, float]:
    if isinstance(state, FreeGaussian):
        # exp(-(12 sigma)^2 / (4 sigma^2)) = exp(-36) relative cut
        return state.x0 - 12 * state.sigma0, state.x0 + 12 * state.sigma0
    return 0.0, L


def oracle_wave(state: InitialState, x, t: float, scenario: Scenario,
                quad_tol: float = 1e-12) -> WaveSample:
    """Integrate the free propagator against psi(x', 0) by adaptive quadrature.

    psi(x,t) = sqrt(m/(2 pi i hbar t)) int exp(i m (x-x')^2 / (2 hbar t)) psi0(x') dx'
    and d psi / dx from the x-derivative of the kernel.  Slow; for tests.
    """
    t = float(t)
    if not t > 0:
        raise ValueError("wavefunction evaluation needs t > 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    L = scenario.L
    a = 0.5 / (scenario.constants.hbar_over_m * t)
    pref = math.sqrt(a / math.pi) * _INV_SQRT_I
    lo, hi = _support(state, L)
    k_extra = wavenumber(state.n, L) if isinstance(state, Eigenstate) else 0.0

    psi = np.empty(xs.shape, dtype=complex)
    dpsi = np.empty(xs.shape, dtype=complex)
    for i, xv in enumerate(xs):
        # derivative integrand carries 2a|x - x'|; rescale so one tolerance fits both
        scale = 1.0 + 2 * a * max(abs(xv - lo), abs(xv - hi))

        def integrand(xp, xv=xv, scale=scale):
            g = np.exp(1j * a * (xv - xp) ** 2) * initial_wave(state, xp, L)
            return np.stack((g, (2j * a / scale) * (xv - xp) * g))

        # one initial panel per ~pi of accumulated phase
        swing = a * abs((xv - lo) ** 2 - (xv - hi) ** 2) + k_extra * (hi - lo)
        panels = int(min(4096, 2 + swing / math.pi))
        val, _ = gauss_kronrod(integrand, lo, hi, quad_tol / abs(pref), initial_panels=panels)
        psi[i] = pref * val[0]
        dpsi[i] = pref * scale * val[1]
    shape = np.shape(x)
    return WaveSample(np.asarray(x, dtype=float), np.full(shape, t),
                      psi.reshape(shape), dpsi.reshape(shape))
