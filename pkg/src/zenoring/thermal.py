"""Quasi-static thermal model and the pump-scan experiments built on it.

The pumped photon number ``n = |beta|^2`` red-shifts every resonance linearly,
``omega_o(n) = omega_o0 - eta_o * n``. Each pump step solves the steady
self-consistency for ``n`` (a cubic) and keeps the root continuously connected
to the previous step, which reproduces the triangle-shaped transmission and
its single thermal drop. The TWM mismatch then follows the hot resonances:

    delta_pm = omega_d(n) - omega_pump - omega_c(n)
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import analytic
from .fitting import SpectrumTrace
from .model import (DomainError, DriveField, ModeSet, NonlinearCouplings,
                    make_drive, omega_to_wavelength, wavelength_to_omega)

UPPER = "upper"
DROPPED = "dropped"


@dataclass(frozen=True)
class ThermalModel:
    eta_a: float
    eta_b: float
    eta_c: float
    eta_d: float  # rad/s of red shift per pump photon
    quasi_static: bool = True

    def __post_init__(self):
        for name in ("eta_a", "eta_b", "eta_c", "eta_d"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"thermal coefficient {name} must be non-negative")
        if not self.quasi_static:
            raise DomainError("only the quasi-static thermal model is implemented")

    @property
    def etas(self):
        return np.array([self.eta_a, self.eta_b, self.eta_c, self.eta_d])

    @property
    def mismatch_pull(self) -> float:
        """Rate at which heating moves the mismatch, ``eta_d - eta_b - eta_c``."""
        return self.eta_d - self.eta_b - self.eta_c


@dataclass(frozen=True)
class SweepPlan:
    pump_start: float  # m
    pump_stop: float  # m
    pump_steps: int
    pump_power: float  # W
    scan_power: float  # W, probe (mode c) or seed (mode a)
    scan_span: float  # rad/s, full width of the probe/seed window
    scan_steps: int
    direction: str = "up"

    def __post_init__(self):
        if self.pump_steps < 2 or self.scan_steps < 2:
            raise DomainError("sweep plans need at least two steps on each axis")
        if not 0 < self.pump_start < self.pump_stop:
            raise DomainError("pump_start must be positive and below pump_stop")
        if not (self.pump_power >= 0 and self.scan_power >= 0):
            raise DomainError("sweep powers must be non-negative")
        if not self.scan_span > 0:
            raise DomainError("scan_span must be positive")
        if self.direction not in ("up", "down"):
            raise DomainError("direction must be 'up' or 'down'")

    def pump_wavelengths(self) -> np.ndarray:
        lam = np.linspace(self.pump_start, self.pump_stop, self.pump_steps)
        return lam if self.direction == "up" else lam[::-1].copy()

    def scan_offsets(self) -> np.ndarray:
        """Detunings of the probe/seed from its (thermally shifted) resonance."""
        return np.linspace(-0.5 * self.scan_span, 0.5 * self.scan_span, self.scan_steps)


@dataclass(frozen=True)
class SweepPoint:
    pump_wavelength: float
    pump_transmission: float
    beta_sq: float
    delta_pm: float
    branch: str


def _cubic_real_roots(x0: float, s: float) -> np.ndarray:
    """Real roots of ``u((x0 - u)^2 + 1) = s``, ascending."""
    B, C, D = -2.0 * x0, x0 * x0 + 1.0, -s
    disc = 18 * B * C * D - 4 * B ** 3 * D + B * B * C * C - 4 * C ** 3 - 27 * D * D
    roots = np.roots([1.0, B, C, D])
    if disc > 0:
        real = np.sort(roots.real)
    else:
        real = np.array([roots[np.argmin(np.abs(roots.imag))].real])
    # Newton polish; the roots of this cubic are well separated except at a fold
    for _ in range(3):
        f = real * ((x0 - real) ** 2 + 1.0) - s
        df = 3 * real ** 2 - 4 * x0 * real + x0 * x0 + 1.0
        step = np.where(df != 0, f / np.where(df != 0, df, 1.0), 0.0)
        real = real - step
    return np.maximum(real, 0.0)


def pump_photon_roots(pump: DriveField, mode_b, eta_b: float) -> np.ndarray:
    """All steady pump photon numbers allowed by the thermal self-consistency."""
    kappa = mode_b.kappa_total
    delta0 = mode_b.omega0 - pump.omega_drive
    eps2 = pump.epsilon ** 2
    if eta_b == 0.0 or eps2 == 0.0:
        return np.array([eps2 / (delta0 ** 2 + kappa ** 2)])
    u = _cubic_real_roots(delta0 / kappa, eta_b * eps2 / kappa ** 3)
    return u * kappa / eta_b


def thermal_steady_pump(pump: DriveField, modes: ModeSet, thermal: ThermalModel,
                        previous: Optional[SweepPoint] = None) -> SweepPoint:
    roots = pump_photon_roots(pump, modes.b, thermal.eta_b)
    if roots.size == 0:
        raise RuntimeError("thermal cubic returned no real root")
    # the middle root of three is unstable and never selected
    stable = roots[[0, -1]] if roots.size == 3 else roots
    branch = UPPER
    if previous is None:
        n = float(stable[0])
    else:
        n = float(stable[np.argmin(np.abs(stable - previous.beta_sq))])
        jump = abs(n - previous.beta_sq) > 0.5 * max(n, previous.beta_sq)
        if previous.branch == DROPPED or (jump and previous.beta_sq > 0):
            branch = DROPPED
    hot = np.array([m.omega0 for m in modes]) - thermal.etas * n
    kb = modes.b.kappa_total
    delta_b = hot[1] - pump.omega_drive
    t_pump = abs(1.0 + 2.0 * modes.b.kappa_external / (-1j * delta_b - kb)) ** 2
    delta_pm = hot[3] - pump.omega_drive - hot[2]
    return SweepPoint(omega_to_wavelength(pump.omega_drive), float(t_pump), n,
                      float(delta_pm), branch)


@dataclass
class PumpSweep:
    plan: SweepPlan
    points: List[SweepPoint]
    omegas: np.ndarray

    @property
    def wavelengths(self):
        return np.array([p.pump_wavelength for p in self.points])

    @property
    def transmission(self):
        return np.array([p.pump_transmission for p in self.points])

    @property
    def beta_sq(self):
        return np.array([p.beta_sq for p in self.points])

    @property
    def delta_pm(self):
        return np.array([p.delta_pm for p in self.points])

    @property
    def upper(self):
        return np.array([p.branch == UPPER for p in self.points])

    @property
    def drop_index(self) -> Optional[int]:
        idx = np.flatnonzero(~self.upper)
        return int(idx[0]) if idx.size else None

    def phase_matched_index(self) -> Optional[int]:
        """Upper-branch step nearest the first zero crossing of ``delta_pm``."""
        dpm, up = self.delta_pm, self.upper
        for k in range(len(dpm) - 1):
            if up[k] and up[k + 1] and dpm[k] * dpm[k + 1] <= 0:
                return k if abs(dpm[k]) <= abs(dpm[k + 1]) else k + 1
        return None

    def crossing_wavelength(self) -> Optional[float]:
        k = self.phase_matched_index()
        if k is None:
            return None
        dpm, lam = self.delta_pm, self.wavelengths
        j = k + 1 if k + 1 < len(dpm) and dpm[k] * dpm[k + 1] <= 0 and self.upper[k + 1] else k - 1
        if dpm[j] == dpm[k]:
            return float(lam[k])
        return float(lam[k] + (lam[j] - lam[k]) * dpm[k] / (dpm[k] - dpm[j]))


def pump_sweep(plan: SweepPlan, modes: ModeSet, thermal: ThermalModel) -> PumpSweep:
    lam = plan.pump_wavelengths()
    omegas = wavelength_to_omega(lam)
    points = []
    prev = None
    for om in omegas:
        prev = thermal_steady_pump(make_drive(modes.b, om, plan.pump_power), modes, thermal, prev)
        points.append(prev)
    return PumpSweep(plan, points, omegas)


def calibrate_g2(cooperativity: float, sweep: PumpSweep, modes: ModeSet) -> float:
    """``g2`` giving the requested cooperativity at the phase-matched step."""
    k = sweep.phase_matched_index()
    if k is None:
        raise ValueError("the mismatch never crosses zero on the upper branch; "
                         "cannot calibrate g2 from a cooperativity")
    n = sweep.beta_sq[k]
    if not n > 0:
        raise ValueError("no pump photons at the phase-matched step")
    return math.sqrt(analytic.g2sq_for_cooperativity(cooperativity, modes.c, modes.d) / n)


def _chunks(n, jobs):
    jobs = max(1, min(int(jobs), n))
    edges = np.linspace(0, n, jobs + 1).astype(int)
    return [slice(edges[i], edges[i + 1]) for i in range(jobs)]


def _parallel_rows(func, n, jobs):
    parts = _chunks(n, jobs)
    if len(parts) == 1:
        return func(parts[0])
    with ThreadPoolExecutor(max_workers=len(parts)) as pool:
        results = list(pool.map(func, parts))
    return np.concatenate(results, axis=0)


def probe_sequence(plan: SweepPlan, modes: ModeSet, couplings: NonlinearCouplings,
                   thermal: ThermalModel, sweep: Optional[PumpSweep] = None,
                   steps=None, twm_enabled: bool = True):
    """Probe transmission around mode c at every (or the selected) pump step.

    Detunings are measured from the thermally shifted mode-c resonance.
    """
    if sweep is None:
        sweep = pump_sweep(plan, modes, thermal)
    idx = range(len(sweep.points)) if steps is None else steps
    offsets = plan.scan_offsets()
    g2sq = couplings.g2 ** 2 if twm_enabled else 0.0
    out = []
    for k in idx:
        pt = sweep.points[k]
        t = analytic.linear_transmission(offsets, pt.delta_pm + offsets, g2sq * pt.beta_sq,
                                         modes.c, modes.d)
        out.append((pt, SpectrumTrace(offsets.copy(), np.asarray(t))))
    return out


@dataclass
class FwmMap:
    pump_wavelengths: np.ndarray  # (P,)
    seed_wavelengths: np.ndarray  # (P, S)
    p_out: np.ndarray  # (P, S), W
    twm_enabled: bool

    def column_max(self):
        return self.p_out.max(axis=1)


def fwm_map(plan: SweepPlan, modes: ModeSet, couplings: NonlinearCouplings,
            thermal: ThermalModel, twm_enabled: bool, sweep: Optional[PumpSweep] = None,
            jobs: int = 1) -> FwmMap:
    """Stimulated FWM output over pump wavelength x seed detuning from the hot mode a."""
    if sweep is None:
        sweep = pump_sweep(plan, modes, thermal)
    n = sweep.beta_sq[:, None]
    dpm = sweep.delta_pm[:, None]
    omega_p = sweep.omegas[:, None]
    hot_a = modes.a.omega0 - thermal.eta_a * n
    hot_c = modes.c.omega0 - thermal.eta_c * n
    offsets = plan.scan_offsets()[None, :]
    g2sq = couplings.g2 ** 2

    def rows(sl):
        omega_seed = hot_a[sl] - offsets
        omega_idler = 2.0 * omega_p[sl] - omega_seed
        delta_c = hot_c[sl] - omega_idler
        p = analytic.fwm_output(offsets, delta_c, n[sl], couplings.g3, plan.scan_power,
                                modes.a, modes.c, omega_seed=omega_seed, omega_idler=omega_idler)
        if twm_enabled:
            p = p / analytic.suppression_factor(delta_c, dpm[sl] + delta_c, g2sq * n[sl],
                                                modes.c, modes.d)
        return np.broadcast_to(p, omega_seed.shape)

    p_out = _parallel_rows(rows, len(sweep.points), jobs)
    seed_lam = omega_to_wavelength(hot_a - offsets)
    return FwmMap(sweep.wavelengths, np.asarray(seed_lam), np.asarray(p_out), twm_enabled)


@dataclass
class SuppressionTrace:
    pump_wavelengths: np.ndarray
    ratio: np.ndarray

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.ratio))

    @property
    def peak_ratio(self) -> float:
        return float(self.ratio[self.peak_index])

    @property
    def peak_wavelength(self) -> float:
        return float(self.pump_wavelengths[self.peak_index])


def suppression_trace(map_off: FwmMap, map_on: FwmMap) -> SuppressionTrace:
    """Per pump step, the ratio of the TWM-off to the TWM-on column maximum."""
    if (map_off.p_out.shape != map_on.p_out.shape
            or not np.array_equal(map_off.pump_wavelengths, map_on.pump_wavelengths)
            or not np.array_equal(map_off.seed_wavelengths, map_on.seed_wavelengths)):
        raise ValueError("FWM maps are on different grids")
    hi, lo = map_off.column_max(), map_on.column_max()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where((hi == 0) & (lo == 0), 1.0, hi / lo)
    return SuppressionTrace(map_off.pump_wavelengths.copy(), ratio)
