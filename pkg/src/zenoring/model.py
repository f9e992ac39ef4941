"""Units, constants and the value types shared by the other modules.

All frequencies are angular (rad/s) and all decay rates are amplitude decay
rates, so a mode with decay rate ``kappa`` has a full width at half maximum of
``2 * kappa`` and a photon (energy) lifetime of ``1 / (2 * kappa)``.
Wavelengths only appear at the I/O boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

MODE_LABELS = ("a", "b", "c", "d")


class DomainError(ValueError):
    """Raised when a physical quantity is outside its allowed range."""


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.054571817e-34  # J s
    c_light: float = 2.99792458e8  # m/s


CONSTANTS = PhysicalConstants()


def wavelength_to_omega(wavelength, constants: PhysicalConstants = CONSTANTS):
    """Vacuum wavelength (m) to angular frequency (rad/s)."""
    lam = np.asarray(wavelength, dtype=float)
    if np.any(~(lam > 0)):
        raise DomainError(f"wavelength must be positive, got {wavelength!r}")
    out = 2.0 * math.pi * constants.c_light / lam
    return float(out) if out.ndim == 0 else out


def omega_to_wavelength(omega, constants: PhysicalConstants = CONSTANTS):
    om = np.asarray(omega, dtype=float)
    if np.any(~(om > 0)):
        raise DomainError(f"angular frequency must be positive, got {omega!r}")
    out = 2.0 * math.pi * constants.c_light / om
    return float(out) if out.ndim == 0 else out


def lifetime_to_kappa(tau: float) -> float:
    """Photon lifetime (s) to amplitude decay rate (rad/s), ``1 / (2 tau)``."""
    if not tau > 0:
        raise DomainError(f"lifetime must be positive, got {tau!r}")
    return 1.0 / (2.0 * tau)


@dataclass(frozen=True)
class OpticalMode:
    """One cavity resonance."""

    label: str
    omega0: float
    kappa_intrinsic: float
    kappa_external: float

    def __post_init__(self):
        if self.label not in MODE_LABELS:
            raise DomainError(f"unknown mode label {self.label!r}")
        if not self.omega0 > 0:
            raise DomainError(f"mode {self.label}: omega0 must be positive")
        if not self.kappa_intrinsic > 0:
            raise DomainError(f"mode {self.label}: kappa_intrinsic must be positive")
        if not self.kappa_external >= 0:
            raise DomainError(f"mode {self.label}: kappa_external must be non-negative")

    @property
    def kappa_total(self) -> float:
        return self.kappa_intrinsic + self.kappa_external

    @classmethod
    def from_lab(cls, label, wavelength, lifetime, external_fraction=0.5):
        """Build a mode from its wavelength (m), photon lifetime (s) and kappa_ext / kappa."""
        if not 0.0 <= external_fraction < 1.0:
            raise DomainError("external_fraction must lie in [0, 1)")
        kappa = lifetime_to_kappa(lifetime)
        k_ext = external_fraction * kappa
        return cls(label, wavelength_to_omega(wavelength), kappa - k_ext, k_ext)


@dataclass(frozen=True)
class ModeSet:
    a: OpticalMode
    b: OpticalMode
    c: OpticalMode
    d: OpticalMode

    def __post_init__(self):
        for label in MODE_LABELS:
            if getattr(self, label).label != label:
                raise DomainError(f"mode in slot {label!r} is labelled {getattr(self, label).label!r}")

    def __iter__(self) -> Iterator[OpticalMode]:
        return iter((self.a, self.b, self.c, self.d))

    def __getitem__(self, label: str) -> OpticalMode:
        if label not in MODE_LABELS:
            raise KeyError(label)
        return getattr(self, label)

    @property
    def kappas(self) -> np.ndarray:
        return np.array([m.kappa_total for m in self])

    @property
    def cold_mismatch(self) -> float:
        """TWM mismatch of the cold resonances, omega_d0 - omega_b0 - omega_c0."""
        return self.d.omega0 - self.b.omega0 - self.c.omega0


@dataclass(frozen=True)
class NonlinearCouplings:
    g2: float  # TWM single-photon rate, rad/s
    g3: float  # FWM single-photon rate, rad/s

    def __post_init__(self):
        if not self.g2 >= 0:
            raise DomainError("g2 must be non-negative")
        if not self.g3 >= 0:
            raise DomainError("g3 must be non-negative")


@dataclass(frozen=True)
class DriveField:
    target_mode: str
    omega_drive: float
    power_onchip: float
    epsilon: float  # input flux amplitude, sqrt(photons)/s


def make_drive(mode: OpticalMode, omega_drive: float, power: float,
               constants: PhysicalConstants = CONSTANTS) -> DriveField:
    """Laser of ``power`` W at ``omega_drive`` coupled into ``mode`` through the bus waveguide."""
    if not power >= 0:
        raise DomainError(f"drive power must be non-negative, got {power!r}")
    if not omega_drive > 0:
        raise DomainError(f"drive frequency must be positive, got {omega_drive!r}")
    eps = math.sqrt(2.0 * mode.kappa_external * power / (constants.hbar * omega_drive))
    return DriveField(mode.label, float(omega_drive), float(power), eps)


@dataclass(frozen=True)
class DetuningSet:
    """Detunings ``resonance - laser`` for all four modes plus the TWM mismatch."""

    delta_a: float
    delta_b: float
    delta_c: float
    delta_d: float
    delta_pm: float


def detunings(modes: ModeSet, omega_pump: float, omega_c: float,
              omega_a: Optional[float] = None) -> DetuningSet:
    """Detunings for pump ``omega_pump`` and light at ``omega_c`` around mode c.

    ``omega_a`` defaults to the FWM partner ``2 omega_pump - omega_c``.
    """
    if omega_a is None:
        omega_a = 2.0 * omega_pump - omega_c
    delta_c = modes.c.omega0 - omega_c
    delta_pm = modes.d.omega0 - (omega_pump + modes.c.omega0)
    return DetuningSet(
        delta_a=modes.a.omega0 - omega_a,
        delta_b=modes.b.omega0 - omega_pump,
        delta_c=delta_c,
        delta_d=delta_pm + delta_c,
        delta_pm=delta_pm,
    )
