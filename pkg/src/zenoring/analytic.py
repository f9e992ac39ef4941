"""Closed-form steady-state predictions in the non-depletion approximation.

The pump amplitude is fixed by its own linear response; everything else is a
linear function of the weak probe or seed field. All functions broadcast over
numpy arrays of detunings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DriveField, OpticalMode


@dataclass(frozen=True)
class PumpFieldSolution:
    beta: complex
    photon_number: float


@dataclass(frozen=True)
class ZenoFigures:
    gamma: float  # extra loss of mode c, rad/s
    cooperativity: float


@dataclass(frozen=True)
class FwmResult:
    p_out: float
    p_out_suppressed: float
    suppression_ratio: float


def _scalar(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def pump_beta(drive: DriveField, mode_b: OpticalMode) -> PumpFieldSolution:
    """Intracavity pump amplitude ``eps / (-i delta_b - kappa_b)``."""
    delta_b = mode_b.omega0 - drive.omega_drive
    beta = drive.epsilon / (-1j * delta_b - mode_b.kappa_total)
    return PumpFieldSolution(beta=complex(beta), photon_number=float(abs(beta) ** 2))


def zeno_figures(g2: float, photon_number: float, mode_c: OpticalMode,
                 mode_d: OpticalMode) -> ZenoFigures:
    g2sq_nb = g2 * g2 * photon_number
    gamma = g2sq_nb / mode_d.kappa_total
    return ZenoFigures(gamma=gamma, cooperativity=gamma / mode_c.kappa_total)


def g2sq_for_cooperativity(cooperativity, mode_c: OpticalMode, mode_d: OpticalMode):
    """Composite ``g2^2 |beta|^2`` giving the requested cooperativity."""
    return cooperativity * mode_c.kappa_total * mode_d.kappa_total


def linear_transmission(delta_c, delta_d, g2sq_nb, mode_c: OpticalMode,
                        mode_d: OpticalMode):
    """Bus-waveguide transmission of a weak probe around mode c.

    ``delta_c`` and ``delta_d`` follow the ``resonance - laser`` convention and
    ``g2sq_nb`` is ``g2**2 * |beta|**2``. With ``g2sq_nb = 0`` this is the bare
    Lorentzian dip of mode c.
    """
    delta_c = np.asarray(delta_c, dtype=float)
    delta_d = np.asarray(delta_d, dtype=float)
    kc = mode_c.kappa_total
    kd = mode_d.kappa_total
    denom = -1j * delta_c - kc + g2sq_nb / (-1j * delta_d - kd)
    t = np.abs(1.0 + 2.0 * mode_c.kappa_external / denom) ** 2
    return _scalar(t)


def fwm_output(delta_a, delta_c, photon_number, g3, seed_power, mode_a: OpticalMode,
               mode_c: OpticalMode, omega_seed=None, omega_idler=None):
    """Stimulated FWM power (W) leaving the ring at the idler near mode c.

    The seed and idler frequencies default to ``omega_a0 - delta_a`` and
    ``omega_c0 - delta_c``; pass them explicitly when the resonances have moved.
    """
    delta_a = np.asarray(delta_a, dtype=float)
    delta_c = np.asarray(delta_c, dtype=float)
    ka, kc = mode_a.kappa_total, mode_c.kappa_total
    if omega_seed is None:
        omega_seed = mode_a.omega0 - delta_a
    if omega_idler is None:
        omega_idler = mode_c.omega0 - delta_c
    p = (2.0 * mode_a.kappa_external / (delta_a ** 2 + ka ** 2)
         * 2.0 * mode_c.kappa_external / (delta_c ** 2 + kc ** 2)
         * (omega_idler / omega_seed)
         * np.asarray(photon_number, dtype=float) ** 2 * g3 ** 2 * seed_power)
    return _scalar(p)


def suppression_factor(delta_c, delta_d, g2sq_nb, mode_c: OpticalMode, mode_d: OpticalMode):
    """``|1 + g2^2|beta|^2 / ((-i delta_d - kappa_d)(-i delta_c - kappa_c))|^2``."""
    delta_c = np.asarray(delta_c, dtype=float)
    delta_d = np.asarray(delta_d, dtype=float)
    kc, kd = mode_c.kappa_total, mode_d.kappa_total
    s = np.abs(1.0 + g2sq_nb / ((-1j * delta_d - kd) * (-1j * delta_c - kc))) ** 2
    return _scalar(s)


def fwm_suppressed(p_out, delta_c, delta_d, g2sq_nb, mode_c: OpticalMode,
                   mode_d: OpticalMode) -> FwmResult:
    ratio = suppression_factor(delta_c, delta_d, g2sq_nb, mode_c, mode_d)
    return FwmResult(p_out=p_out, p_out_suppressed=p_out / ratio, suppression_ratio=ratio)
