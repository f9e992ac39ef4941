"""Least-squares fits of probe transmission spectra.

Two models share one damped least-squares driver:

* ``lorentzian``: bare resonance dip, parameters (center, kappa, kappa_ext);
* ``zeno``: probe transmission with the TWM-coupled ancillary mode,
  parameters (g2sq_nb, delta_pm, kappa_d) and optionally the center, with the
  mode-c linewidths frozen from a pump-off Lorentzian fit.

Parameters are fitted in units of a frequency scale (the trace linewidth) and
the center is fitted as an offset from its starting guess, which keeps the fit
well conditioned and exactly equivariant under shifts of the detuning axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.optimize import least_squares

MIN_POINTS = 8


@dataclass(frozen=True, eq=False)
class SpectrumTrace:
    detunings: np.ndarray  # rad/s, resonance - laser
    transmissions: np.ndarray
    sigma: Optional[np.ndarray] = None

    def __post_init__(self):
        x = np.asarray(self.detunings, dtype=float)
        y = np.asarray(self.transmissions, dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("detunings and transmissions must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("spectrum contains non-finite values")
        object.__setattr__(self, "detunings", x)
        object.__setattr__(self, "transmissions", y)
        if self.sigma is not None:
            s = np.asarray(self.sigma, dtype=float)
            if s.shape != x.shape or np.any(~(s > 0)):
                raise ValueError("sigma must be positive and match the spectrum length")
            object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.detunings.size

    def shifted(self, shift: float) -> "SpectrumTrace":
        return SpectrumTrace(self.detunings + shift, self.transmissions, self.sigma)


@dataclass
class FitParameter:
    name: str
    value: float
    sigma: float
    units: str


@dataclass
class FitReport:
    model: str
    parameters: List[FitParameter]
    residual_rms: float
    converged: bool
    iterations: int
    gradient_norm: float
    message: str = ""
    fixed: Dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name) -> FitParameter:
        for p in self.parameters:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def values(self) -> Dict[str, float]:
        return {p.name: p.value for p in self.parameters}

    def to_dict(self):
        def num(v):
            return float(v) if np.isfinite(v) else None
        return {
            "model": self.model,
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "residual_rms": num(self.residual_rms),
            "gradient_norm": num(self.gradient_norm),
            "message": self.message,
            "parameters": [{"name": p.name, "value": num(p.value), "sigma": num(p.sigma),
                            "units": p.units} for p in self.parameters],
            "fixed": {k: float(v) for k, v in self.fixed.items()},
        }


def lorentzian_transmission(x, center, kappa, kappa_ext):
    return np.abs(1.0 + 2.0 * kappa_ext / (-1j * (x - center) - kappa)) ** 2


def zeno_transmission(x, g2sq_nb, delta_pm, kappa_d, kappa, kappa_ext, center=0.0):
    d = x - center
    denom = -1j * d - kappa + g2sq_nb / (-1j * (delta_pm + d) - kappa_d)
    return np.abs(1.0 + 2.0 * kappa_ext / denom) ** 2


def _jacobian(fun, p, h=1e-6):
    r0 = fun(p)
    jac = np.empty((r0.size, p.size))
    for j in range(p.size):
        step = h * max(1.0, abs(p[j]))
        e = np.zeros_like(p)
        e[j] = step
        jac[:, j] = (fun(p + e) - fun(p - e)) / (2 * step)
    return jac


def _run(residual, p0, max_nfev):
    res = least_squares(residual, p0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_nfev)
    return res


def _finish(model, names, units, to_physical, residual, res, gtol, weighted, fixed):
    """Turn a least_squares result (internal units) into a FitReport."""
    p = res.x
    r = residual(p)
    m, k = r.size, p.size
    jac = _jacobian(residual, p)
    grad = jac.T @ r
    gnorm = float(np.max(np.abs(grad)) / m)
    dof = max(m - k, 1)
    jtj = jac.T @ jac
    scale = 1.0 if weighted else float(r @ r) / dof
    # parameters in the null space of J^T J are unidentified
    w, v = np.linalg.eigh(jtj)
    tol = w.max() * 1e-12 if w.max() > 0 else 0.0
    good = w > tol
    cov = (v[:, good] / w[good]) @ v[:, good].T * scale
    var = np.diag(cov).copy()
    unresolved = np.abs(v[:, ~good]).max(axis=1) > 1e-6 if (~good).any() else np.zeros(k, bool)
    var[unresolved] = np.inf
    values, sig = to_physical(p, np.sqrt(np.maximum(var, 0.0)))
    params = [FitParameter(n, float(val), float(s), u)
              for n, val, s, u in zip(names, values, sig, units)]
    converged = bool(res.status > 0 and gnorm <= gtol)
    rms = float(np.sqrt(np.mean(r ** 2)))
    return FitReport(model, params, rms, converged, int(res.nfev), gnorm,
                     res.message, dict(fixed or {}))


def _check(trace: SpectrumTrace):
    if len(trace) < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points to fit, got {len(trace)}")


def guess_lorentzian(trace: SpectrumTrace):
    """Center, width and coupling from the dip location, half-depth width and depth."""
    x, y = trace.detunings, trace.transmissions
    i = int(np.argmin(y))
    center = x[i]
    base = float(np.median(np.concatenate([y[:max(1, len(y) // 10)], y[-max(1, len(y) // 10):]])))
    tmin = float(np.clip(y[i] / base if base > 0 else y[i], 0.0, 1.0))
    half = 0.5 * (y[i] + base)
    below = np.flatnonzero(y <= half)
    span = x[-1] - x[0]
    if below.size >= 2:
        kappa = 0.5 * abs(x[below[-1]] - x[below[0]])
    else:
        kappa = abs(span) / 10
    kappa = max(kappa, abs(span) / (4 * len(x)))
    kappa_ext = 0.5 * (1.0 - np.sqrt(tmin)) * kappa
    return center, kappa, kappa_ext


def fit_lorentzian(trace: SpectrumTrace, initial=None, max_nfev=4000,
                   gtol=1e-8) -> FitReport:
    """Fit ``|1 + 2 kappa_ext / (-i (x - center) - kappa)|^2`` to a transmission trace.

    Under- and overcoupled resonances (``kappa_ext`` and ``kappa - kappa_ext``) give
    the same transmission; the undercoupled value ``kappa_ext <= kappa / 2`` is reported.

    ``initial`` is an optional (center, kappa, kappa_ext) tuple in rad/s.
    """
    _check(trace)
    c0, k0, ke0 = guess_lorentzian(trace) if initial is None else initial
    scale = abs(k0) if k0 else 1.0
    x, y = trace.detunings, trace.transmissions
    w = 1.0 / trace.sigma if trace.sigma is not None else 1.0

    def residual(p):
        return (lorentzian_transmission(x, c0 + p[0] * scale, p[1] * scale, p[2] * scale) - y) * w

    res = _run(residual, np.array([0.0, k0 / scale, ke0 / scale]), max_nfev)

    def to_physical(p, s):
        # the spectrum depends on (kappa - 2 kappa_ext)^2 only: report the undercoupled twin
        k = p[1] * scale
        ke = 0.5 * (k - abs(k - 2.0 * p[2] * scale))
        return (np.array([c0 + p[0] * scale, k, ke]), s * scale)

    return _finish("lorentzian", ["center", "kappa", "kappa_ext"], ["rad/s"] * 3, to_physical,
                   residual, res, gtol, trace.sigma is not None, None)


def fit_zeno(trace: SpectrumTrace, kappa: float, kappa_ext: float, center: Optional[float] = 0.0,
             initial=None, max_nfev=4000, gtol=1e-8) -> FitReport:
    """Fit the Zeno-modified probe transmission with mode-c linewidths frozen.

    ``center=None`` fits the mode-c center as a fourth parameter. ``initial`` is an
    optional (g2sq_nb, delta_pm, kappa_d) tuple; without it a small grid of starts
    is tried and the lowest-cost fit kept.
    """
    _check(trace)
    x, y = trace.detunings, trace.transmissions
    w = 1.0 / trace.sigma if trace.sigma is not None else 1.0
    free_center = center is None
    c0 = x[int(np.argmin(y))] if free_center else center
    s = kappa

    def unpack(p):
        return p[0] * s * s, p[1] * s, p[2] * s, (c0 + p[3] * s) if free_center else c0

    def residual(p):
        g, dpm, kd, c = unpack(p)
        return (zeno_transmission(x, g, dpm, kd, kappa, kappa_ext, c) - y) * w

    if initial is not None:
        starts = [np.array([initial[0] / s ** 2, initial[1] / s, initial[2] / s])]
    else:
        # extra loss from the dip depth at the center: |1 - 2 ke / (k + gamma)|^2
        tmin = float(np.clip(np.min(y), 0.0, 0.999))
        gamma = max(2.0 * kappa_ext / max(1.0 - np.sqrt(tmin), 1e-3) - kappa, 0.05 * kappa)
        width = float(np.ptp(x))
        starts = []
        for kd in (1.0, 4.0, 16.0):
            for dpm in (0.0, -0.25 * width / s, 0.25 * width / s):
                starts.append(np.array([gamma * kd / s, dpm, kd]))
    best = None
    for p0 in starts:
        if free_center:
            p0 = np.append(p0, 0.0)
        res = _run(residual, p0, max_nfev)
        if best is None or res.cost < best.cost:
            best = res

    def to_physical(p, sig):
        g, dpm, kd, c = unpack(p)
        vals = [g, dpm, kd] + ([c] if free_center else [])
        sigs = [sig[0] * s * s, sig[1] * s, sig[2] * s] + ([sig[3] * s] if free_center else [])
        return np.array(vals), np.array(sigs)

    names = ["g2sq_nb", "delta_pm", "kappa_d"] + (["center"] if free_center else [])
    units = ["rad^2/s^2", "rad/s", "rad/s"] + (["rad/s"] if free_center else [])
    fixed = {"kappa": kappa, "kappa_ext": kappa_ext}
    if not free_center:
        fixed["center"] = center
    return _finish("zeno", names, units, to_physical, residual, best, gtol,
                   trace.sigma is not None, fixed)
