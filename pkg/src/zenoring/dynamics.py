"""Time-domain coupled-mode equations for the four-mode ring.

Mean-field equations of motion of the Hamiltonian

    H/hbar = sum_o w_o0 o^+ o + g2 (b^+ c^+ d + h.c.) + g3 ((b^+)^2 a c + h.c.) + drive

with amplitude decay ``kappa_o`` and input flux ``eps_o``, written in a rotating
frame where every laser is stationary. The frame must close both mixing
processes (``frame_a + frame_c = 2 frame_b`` and ``frame_d = frame_b + frame_c``)
for the equations to be autonomous.

Steady states are found by integrating until the fields stop moving, which is
the brute-force oracle for the closed forms in :mod:`zenoring.analytic`.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import root

from .model import (CONSTANTS, MODE_LABELS, DriveField, ModeSet, NonlinearCouplings,
                    make_drive)

log = logging.getLogger(__name__)

# relative slack on the frame closure relations, about 20 ulp of an optical frequency
FRAME_RTOL = 5e-15


class FrameError(ValueError):
    """Rotating frame or drive frequencies inconsistent with the mixing processes."""


class IntegrationError(RuntimeError):
    """The integrator gave up (step-size underflow or non-finite fields)."""


@dataclass(frozen=True)
class RotatingFrame:
    frame_a: float
    frame_b: float
    frame_c: float
    frame_d: float

    def __post_init__(self):
        scale = FRAME_RTOL * abs(self.frame_b)
        if abs(self.frame_a + self.frame_c - 2.0 * self.frame_b) > 4 * scale:
            raise FrameError("frame violates FWM closure frame_a + frame_c = 2 frame_b")
        if abs(self.frame_d - self.frame_b - self.frame_c) > 4 * scale:
            raise FrameError("frame violates TWM closure frame_d = frame_b + frame_c")

    @classmethod
    def from_pump_and_c(cls, omega_pump, omega_c):
        """Frame fixed by the pump and the light around mode c (probe or idler)."""
        return cls(2.0 * omega_pump - omega_c, omega_pump, omega_c, omega_pump + omega_c)

    @classmethod
    def from_pump_and_seed(cls, omega_pump, omega_seed):
        omega_c = 2.0 * omega_pump - omega_seed
        return cls(omega_seed, omega_pump, omega_c, omega_pump + omega_c)

    def as_array(self):
        return np.array([self.frame_a, self.frame_b, self.frame_c, self.frame_d])


@dataclass(frozen=True, eq=False)
class ModeState:
    alpha: np.ndarray  # complex amplitudes (a, b, c, d), sqrt(photons)
    time: float = 0.0

    def __post_init__(self):
        arr = np.asarray(self.alpha, dtype=complex).reshape(4)
        object.__setattr__(self, "alpha", arr)

    @classmethod
    def vacuum(cls):
        return cls(np.zeros(4, dtype=complex))

    def __getattr__(self, name):
        if name.startswith("alpha_") and name[6:] in MODE_LABELS:
            return complex(self.alpha[MODE_LABELS.index(name[6:])])
        raise AttributeError(name)

    @property
    def photon_numbers(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = math.inf  # s
    steady_threshold: float = 1e-10
    max_time: float = 200e-9  # s

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "steady_threshold", "max_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"integrator setting {name} must be positive")
        if not self.steady_threshold < 1:
            raise ValueError("steady_threshold must be below 1")


class CMTSystem:
    """Right-hand side of the coupled-mode equations with precomputed coefficients.

    ``delta`` holds the frame detunings ``frame_o - omega_o0`` (note the sign,
    opposite to the ``resonance - laser`` detunings used elsewhere).
    """

    def __init__(self, delta, kappa, eps, g2, g3):
        self.delta = np.asarray(delta, dtype=float).reshape(4)
        self.kappa = np.asarray(kappa, dtype=float).reshape(4)
        self.eps = np.asarray(eps, dtype=complex).reshape(4)
        self.g2 = float(g2)
        self.g3 = float(g3)
        self._lin = [complex(1j * d - k) for d, k in zip(self.delta, self.kappa)]
        self._eps = [complex(e) for e in self.eps]

    @classmethod
    def from_config(cls, modes: ModeSet, couplings: NonlinearCouplings,
                    drives: Sequence[DriveField], frame: RotatingFrame):
        frames = frame.as_array()
        eps = np.zeros(4, dtype=complex)
        for drive in drives:
            k = MODE_LABELS.index(drive.target_mode)
            if abs(drive.omega_drive - frames[k]) > 4 * FRAME_RTOL * frames[k]:
                raise FrameError(
                    f"drive on mode {drive.target_mode} at {drive.omega_drive!r} rad/s "
                    f"is not stationary in the frame ({frames[k]!r} rad/s)")
            eps[k] += drive.epsilon
        omega0 = np.array([m.omega0 for m in modes])
        return cls(frames - omega0, modes.kappas, eps, couplings.g2, couplings.g3)

    def rhs(self, t, y):
        a, b, c, d = y.tolist()
        la, lb, lc, ld = self._lin
        ea, eb, ec, ed = self._eps
        g2, g3 = self.g2, self.g3
        bb = b * b
        ac, bc = a.conjugate(), b.conjugate()
        cc = c.conjugate()
        return np.array([
            la * a - 1j * g3 * cc * bb + ea,
            lb * b - 2j * g3 * bc * a * c - 1j * g2 * cc * d + eb,
            lc * c - 1j * g3 * ac * bb - 1j * g2 * bc * d + ec,
            ld * d - 1j * g2 * b * c + ed,
        ])

    def energy(self, y) -> float:
        """Rotating-frame Hamiltonian of the fields (conserved when lossless and undriven)."""
        a, b, c, d = np.asarray(y, dtype=complex)
        n = np.abs(np.array([a, b, c, d])) ** 2
        h = -np.dot(self.delta, n)
        h += 2.0 * self.g2 * (np.conj(b) * np.conj(c) * d).real
        h += 2.0 * self.g3 * (np.conj(b) ** 2 * a * c).real
        return float(h)

    @property
    def slowest_rate(self) -> float:
        k = self.kappa[self.kappa > 0]
        return float(k.min()) if k.size else 1.0

    def steady_metric(self, y) -> float:
        """Largest per-field ``|d alpha/dt| / (kappa_min |alpha|)``."""
        f = np.abs(self.rhs(0.0, np.asarray(y, dtype=complex)))
        amp = np.abs(y) * self.slowest_rate
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(amp > 0, f / np.where(amp > 0, amp, 1.0), np.where(f > 0, np.inf, 0.0))
        return float(rel.max())


def cmt_rhs(state: ModeState, modes: ModeSet, couplings: NonlinearCouplings,
            drives: Sequence[DriveField], frame: RotatingFrame) -> np.ndarray:
    return CMTSystem.from_config(modes, couplings, drives, frame).rhs(state.time, state.alpha)


def manley_rowe(state: ModeState):
    """Photon-number combinations conserved by lossless FWM and TWM."""
    na, nb, nc, nd = state.photon_numbers
    return na + nb + nc + 2.0 * nd, 2.0 * na + nb + nd


@dataclass
class Trajectory:
    times: np.ndarray
    alphas: np.ndarray  # shape (n, 4)

    @property
    def photon_numbers(self):
        return np.abs(self.alphas) ** 2

    def state(self, i=-1) -> ModeState:
        return ModeState(self.alphas[i], float(self.times[i]))

    def write_csv(self, path):
        header = ["time_s"]
        for o in MODE_LABELS:
            header += [f"re_{o}", f"im_{o}"]
        header += [f"n_{o}" for o in MODE_LABELS]
        n = self.photon_numbers
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, al, nn in zip(self.times, self.alphas, n):
                row = [t]
                for z in al:
                    row += [z.real, z.imag]
                row += list(nn)
                w.writerow([format(float(v), ".17g") for v in row])


def integrate(system: CMTSystem, state0: ModeState, settings: IntegratorSettings,
              duration: float, n_samples: int = 201) -> Trajectory:
    """Adaptive Dormand-Prince 8(5,3) integration over ``duration`` seconds."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    t0 = state0.time
    t_eval = np.linspace(t0, t0 + duration, n_samples)
    # scipy's automatic first step can overflow the cubic terms from vacuum
    fastest = float(np.max(np.abs(system.delta) + system.kappa))
    first = min(duration, 1e-2 / fastest) if fastest > 0 else None
    sol = solve_ivp(system.rhs, (t0, t0 + duration), np.asarray(state0.alpha, dtype=complex),
                    method="DOP853", t_eval=t_eval, rtol=settings.rel_tol,
                    atol=settings.abs_tol, max_step=settings.max_step, first_step=first)
    if sol.status < 0:
        raise IntegrationError(f"integration failed at t={sol.t[-1] if sol.t.size else t0!r}: "
                               f"{sol.message}")
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError("fields became non-finite")
    return Trajectory(sol.t.copy(), sol.y.T.copy())


@dataclass
class SteadyStateResult:
    state: ModeState
    converged: bool
    metric: float
    trajectory: Trajectory = field(repr=False, default=None)


# metric below which the trajectory is close enough to hand over to Newton
POLISH_BELOW = 1e-5


def polish(system: CMTSystem, alpha) -> np.ndarray:
    """Newton refinement of a nearly steady state; returns ``alpha`` if it does not help."""
    alpha = np.asarray(alpha, dtype=complex)
    if not np.any(alpha):
        return alpha
    scale = np.maximum(np.abs(alpha), 1e-12 * np.abs(alpha).max())
    rate = system.slowest_rate

    def fun(x):
        y = (x[:4] + 1j * x[4:]) * scale
        f = system.rhs(0.0, y) / (rate * scale)
        return np.concatenate([f.real, f.imag])

    x0 = np.concatenate([(alpha / scale).real, (alpha / scale).imag])
    sol = root(fun, x0, method="hybr", options={"xtol": 1e-15})
    cand = (sol.x[:4] + 1j * sol.x[4:]) * scale
    if np.all(np.isfinite(cand)) and system.steady_metric(cand) < system.steady_metric(alpha):
        return cand
    return alpha


def steady_state(system: CMTSystem, settings: IntegratorSettings,
                 state0: ModeState | None = None, chunk_rates: float = 10.0,
                 keep_trajectory: bool = False) -> SteadyStateResult:
    """Integrate in chunks of ``chunk_rates / kappa_min`` until the fields settle.

    Once the trajectory is within ``POLISH_BELOW`` of stationary, a Newton step
    removes the integrator's tolerance floor; the branch is still the one the
    time evolution selected.

    A run that reaches ``settings.max_time`` first is returned with
    ``converged=False`` and the last state.
    """
    state = state0 if state0 is not None else ModeState.vacuum()
    chunk = chunk_rates / system.slowest_rate
    pieces = []
    metric = system.steady_metric(state.alpha)
    while state.time < settings.max_time:
        span = min(chunk, settings.max_time - state.time)
        traj = integrate(system, state, settings, span, n_samples=21 if keep_trajectory else 2)
        if keep_trajectory:
            pieces.append(traj if not pieces else Trajectory(traj.times[1:], traj.alphas[1:]))
        state = traj.state()
        metric = system.steady_metric(state.alpha)
        if settings.steady_threshold <= metric < POLISH_BELOW:
            state = ModeState(polish(system, state.alpha), state.time)
            metric = system.steady_metric(state.alpha)
        if metric < settings.steady_threshold:
            break
    converged = metric < settings.steady_threshold
    if not converged:
        log.warning("steady state not reached by t=%.3g s (metric %.3g)", state.time, metric)
    full = None
    if keep_trajectory and pieces:
        full = Trajectory(np.concatenate([p.times for p in pieces]),
                          np.concatenate([p.alphas for p in pieces]))
    return SteadyStateResult(state, converged, metric, full)


# -- driven scenarios used to cross-check the closed forms ---------------------------

@dataclass
class Scenario:
    system: CMTSystem
    frame: RotatingFrame
    drives: list
    modes: ModeSet

    def probe_transmission(self, state: ModeState) -> float:
        """``|1 - 2 kappa_c1 alpha_c / eps_c|^2`` for the probe on mode c."""
        eps_c = self.system.eps[2]
        return float(abs(1.0 - 2.0 * self.modes.c.kappa_external * state.alpha[2] / eps_c) ** 2)

    def idler_power(self, state: ModeState) -> float:
        """Power (W) leaving the ring from mode c at the frame frequency."""
        flux = 2.0 * self.modes.c.kappa_external * abs(state.alpha[2]) ** 2
        return float(CONSTANTS.hbar * self.frame.frame_c * flux)


def probe_scenario(modes, couplings, pump_power, probe_power, delta_b=0.0, delta_c=0.0):
    """Pump on mode b plus a weak probe on mode c; detunings are ``resonance - laser``."""
    omega_pump = modes.b.omega0 - delta_b
    omega_probe = modes.c.omega0 - delta_c
    frame = RotatingFrame.from_pump_and_c(omega_pump, omega_probe)
    drives = [make_drive(modes.b, omega_pump, pump_power),
              make_drive(modes.c, omega_probe, probe_power)]
    return Scenario(CMTSystem.from_config(modes, couplings, drives, frame), frame, drives, modes)


def seed_scenario(modes, couplings, pump_power, seed_power, delta_b=0.0, delta_a=0.0):
    """Pump on mode b plus a seed on mode a generating an idler around mode c."""
    omega_pump = modes.b.omega0 - delta_b
    omega_seed = modes.a.omega0 - delta_a
    frame = RotatingFrame.from_pump_and_seed(omega_pump, omega_seed)
    drives = [make_drive(modes.b, omega_pump, pump_power),
              make_drive(modes.a, omega_seed, seed_power)]
    return Scenario(CMTSystem.from_config(modes, couplings, drives, frame), frame, drives, modes)
