"""Density, current and Bohmian velocity from a :class:`WaveSample`."""
from __future__ import annotations

import numpy as np

from .scenario import PhysicalConstants
from .wavefunction import WaveSample

NODE_EPS = 1e-12  # 1/um


class NodeError(ValueError):
    """Velocity requested where the density is below ``node_eps``."""

    def __init__(self, x, t, rho):
        self.x, self.t, self.rho = x, t, rho
        super().__init__(f"node: rho={rho:.3e} at x={x!r} um, t={t!r} ms")


def density(sample: WaveSample):
    psi = sample.psi
    return psi.real**2 + psi.imag**2


def current(sample: WaveSample, constants: PhysicalConstants):
    """j = (hbar/m) Im(psi* dpsi/dx), in 1/ms."""
    return constants.hbar_over_m * np.imag(np.conj(sample.psi) * sample.dpsi_dx)


def velocity(sample: WaveSample, constants: PhysicalConstants,
             node_eps: float = NODE_EPS, *, strict: bool = True):
    """Guidance velocity j / rho in um/ms.

    With ``strict`` a :class:`NodeError` is raised for the first point whose
    density is below ``node_eps``; otherwise such points come back as NaN.
    """
    rho = density(sample)
    j = current(sample, constants)
    node = rho < node_eps
    if strict and np.any(node):
        i = np.flatnonzero(np.ravel(node))[0]
        xs = np.broadcast_to(sample.x, np.shape(rho)).ravel()
        ts = np.broadcast_to(sample.t, np.shape(rho)).ravel()
        raise NodeError(float(xs[i]), float(ts[i]), float(np.ravel(rho)[i]))
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(node, np.nan, j / np.where(node, 1.0, rho))
    return v[()] if np.ndim(v) == 0 else v
