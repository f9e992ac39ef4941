"""TOML configuration: parsing, validation and unit conversion.

Lab units at the boundary (nm, mW, ps, GHz, ns), SI and rad/s inside. Every
key is checked against the schema below; unknown keys are errors. See
``README.md`` for the grammar.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Tuple

from .dynamics import IntegratorSettings
from .model import (CONSTANTS, MODE_LABELS, DomainError, ModeSet, NonlinearCouplings,
                    OpticalMode, PhysicalConstants, lifetime_to_kappa, wavelength_to_omega)
from .thermal import SweepPlan, ThermalModel, calibrate_g2, pump_sweep

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
GHZ = 2.0 * math.pi * 1e9  # rad/s per GHz

MODE_KEYS = {"wavelength_nm", "lifetime_ps", "external_fraction", "kappa_intrinsic",
             "kappa_external", "fwm_mismatch_ghz", "twm_mismatch_ghz"}
COUPLING_KEYS = {"g2", "g3", "cooperativity", "calibration_plan", "twm",
                 "phase_match_tolerance"}
THERMAL_KEYS = {"eta_a", "eta_b", "eta_c", "eta_d"}
INTEGRATOR_KEYS = {"rel_tol", "abs_tol", "max_step_ps", "steady_threshold", "max_time_ns"}
PLAN_KEYS = {"pump_start_nm", "pump_stop_nm", "pump_steps", "pump_power_mw", "scan_power_mw",
             "scan_span_ghz", "scan_steps", "direction"}
TOP_KEYS = {"schema", "modes", "couplings", "thermal", "integrator", "plans"}

BUNDLED = ("default", "acceptance")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class SystemConfig:
    modes: ModeSet
    couplings: NonlinearCouplings
    thermal: ThermalModel
    integrator: IntegratorSettings
    plans: Mapping[str, SweepPlan]
    twm_enabled: bool = True
    constants: PhysicalConstants = CONSTANTS
    source: dict = field(default_factory=dict, compare=False, repr=False)
    warnings: Tuple[str, ...] = ()
    calibration: Optional[dict] = None

    def plan(self, name: str = "main") -> SweepPlan:
        try:
            return self.plans[name]
        except KeyError:
            raise ConfigError(f"plans.{name}: no such sweep plan "
                              f"(have {', '.join(sorted(self.plans)) or 'none'})") from None

    @property
    def active_couplings(self) -> NonlinearCouplings:
        """Couplings with g2 zeroed when TWM is disabled."""
        if self.twm_enabled:
            return self.couplings
        return NonlinearCouplings(0.0, self.couplings.g3)

    def config_hash(self) -> str:
        blob = json.dumps(self.source, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def bundled_config_path(name: str) -> Path:
    return Path(str(resources.files("zenoring.data") / f"{name}.toml"))


def resolve_config_path(path) -> Path:
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        return bundled_config_path(str(path))
    return p


def parse_override(text: str):
    """``section.key=value`` with a TOML value; bare words become strings."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {text!r} has an empty key")
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    return key.split("."), parsed


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    raw = copy.deepcopy(raw)
    for text in overrides:
        keys, value = parse_override(text)
        node = raw
        for k in keys[:-1]:
            nxt = node.setdefault(k, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {text!r}: {k} is not a table")
            node = nxt
        node[keys[-1]] = value
    return raw


def load_config(path, overrides: Sequence[str] = ()) -> SystemConfig:
    path = resolve_config_path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return build_config(apply_overrides(raw, overrides))


# -- validation helpers -------------------------------------------------------------------

def _table(raw, key, where):
    val = raw.get(key)
    if not isinstance(val, dict):
        raise ConfigError(f"{where}{key}: expected a table")
    return val


def _unknown(table, allowed, where):
    extra = sorted(set(table) - set(allowed))
    if extra:
        raise ConfigError(f"{where}{extra[0]}: unknown key")


def _num(table, key, where, default=None, required=True):
    if key not in table:
        if required and default is None:
            raise ConfigError(f"{where}{key}: missing")
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{where}{key}: expected a finite number, got {v!r}")
    return float(v)


def _positive(table, key, where, **kw):
    v = _num(table, key, where, **kw)
    if v is not None and not v > 0:
        raise ConfigError(f"{where}{key}: must be positive, got {v!r}")
    return v


def _mode_rates(label, spec, where):
    has_life = "lifetime_ps" in spec
    has_kappa = "kappa_intrinsic" in spec or "kappa_external" in spec
    if has_life == has_kappa:
        raise ConfigError(f"{where}: give either lifetime_ps or kappa_intrinsic/kappa_external")
    if has_life:
        if "external_fraction" in spec:
            frac = _num(spec, "external_fraction", where + ".")
        else:
            frac = 0.5
        if not 0.0 <= frac < 1.0:
            raise ConfigError(f"{where}.external_fraction: must lie in [0, 1), got {frac!r}")
        kappa = lifetime_to_kappa(_positive(spec, "lifetime_ps", where + ".") * 1e-12)
        return kappa * (1.0 - frac), kappa * frac
    if "external_fraction" in spec:
        raise ConfigError(f"{where}.external_fraction: only valid together with lifetime_ps")
    k0 = _num(spec, "kappa_intrinsic", where + ".")
    k1 = _num(spec, "kappa_external", where + ".")
    if not k0 > 0:
        raise ConfigError(f"{where}.kappa_intrinsic: must be positive, got {k0!r}")
    if not k1 >= 0:
        raise ConfigError(f"{where}.kappa_external: must be non-negative, got {k1!r}")
    return k0, k1


def _modes(raw) -> ModeSet:
    table = _table(raw, "modes", "")
    _unknown(table, MODE_LABELS, "modes.")
    specs = {}
    for label in MODE_LABELS:
        spec = _table(table, label, "modes.")
        _unknown(spec, MODE_KEYS, f"modes.{label}.")
        specs[label] = spec
    omegas = {}
    for label in ("b", "c"):
        where = f"modes.{label}"
        for bad in ("fwm_mismatch_ghz", "twm_mismatch_ghz"):
            if bad in specs[label]:
                raise ConfigError(f"{where}.{bad}: only valid for mode "
                                  f"{'a' if bad.startswith('fwm') else 'd'}")
        omegas[label] = wavelength_to_omega(_positive(specs[label], "wavelength_nm", where + ".") * 1e-9)
    for label, key, ref in (("a", "fwm_mismatch_ghz", lambda m: 2 * omegas["b"] - omegas["c"]),
                            ("d", "twm_mismatch_ghz", lambda m: omegas["b"] + omegas["c"])):
        spec, where = specs[label], f"modes.{label}"
        other = "twm_mismatch_ghz" if key.startswith("fwm") else "fwm_mismatch_ghz"
        if other in spec:
            raise ConfigError(f"{where}.{other}: only valid for mode {'d' if label == 'a' else 'a'}")
        if ("wavelength_nm" in spec) == (key in spec):
            raise ConfigError(f"{where}: give exactly one of wavelength_nm or {key}")
        if key in spec:
            omegas[label] = ref(None) + _num(spec, key, where + ".") * GHZ
        else:
            omegas[label] = wavelength_to_omega(_positive(spec, "wavelength_nm", where + ".") * 1e-9)
    modes = {}
    for label in MODE_LABELS:
        k0, k1 = _mode_rates(label, specs[label], f"modes.{label}")
        try:
            modes[label] = OpticalMode(label, omegas[label], k0, k1)
        except DomainError as exc:
            raise ConfigError(f"modes.{label}: {exc}") from None
    return ModeSet(**modes)


def _thermal(raw) -> ThermalModel:
    table = _table(raw, "thermal", "")
    _unknown(table, THERMAL_KEYS, "thermal.")
    vals = {}
    for k in sorted(THERMAL_KEYS):
        v = _num(table, k, "thermal.")
        if v < 0:
            raise ConfigError(f"thermal.{k}: must be non-negative, got {v!r}")
        vals[k] = v
    return ThermalModel(**vals)


def _integrator(raw) -> IntegratorSettings:
    table = raw.get("integrator", {})
    if not isinstance(table, dict):
        raise ConfigError("integrator: expected a table")
    _unknown(table, INTEGRATOR_KEYS, "integrator.")
    d = IntegratorSettings()
    thr = _positive(table, "steady_threshold", "integrator.", default=d.steady_threshold)
    if not thr < 1:
        raise ConfigError(f"integrator.steady_threshold: must be below 1, got {thr!r}")
    max_step = _positive(table, "max_step_ps", "integrator.", default=math.inf)
    return IntegratorSettings(
        rel_tol=_positive(table, "rel_tol", "integrator.", default=d.rel_tol),
        abs_tol=_positive(table, "abs_tol", "integrator.", default=d.abs_tol),
        max_step=max_step * 1e-12 if math.isfinite(max_step) else math.inf,
        steady_threshold=thr,
        max_time=_positive(table, "max_time_ns", "integrator.", default=d.max_time * 1e9) * 1e-9,
    )


def _plans(raw) -> Dict[str, SweepPlan]:
    table = raw.get("plans", {})
    if not isinstance(table, dict):
        raise ConfigError("plans: expected a table")
    plans = {}
    for name, spec in table.items():
        where = f"plans.{name}."
        if not isinstance(spec, dict):
            raise ConfigError(f"plans.{name}: expected a table")
        _unknown(spec, PLAN_KEYS, where)
        steps = {}
        for key in ("pump_steps", "scan_steps"):
            v = spec.get(key)
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"{where}{key}: expected an integer, got {v!r}")
            if v < 2:
                raise ConfigError(f"{where}{key}: must be at least 2, got {v!r}")
            steps[key] = v
        start = _positive(spec, "pump_start_nm", where)
        stop = _positive(spec, "pump_stop_nm", where)
        if not start < stop:
            raise ConfigError(f"{where}pump_stop_nm: must exceed pump_start_nm")
        powers = {}
        for key in ("pump_power_mw", "scan_power_mw"):
            v = _num(spec, key, where)
            if v < 0:
                raise ConfigError(f"{where}{key}: must be non-negative, got {v!r}")
            powers[key] = v * 1e-3
        direction = spec.get("direction", "up")
        if direction not in ("up", "down"):
            raise ConfigError(f"{where}direction: must be 'up' or 'down', got {direction!r}")
        plans[name] = SweepPlan(
            pump_start=start * 1e-9, pump_stop=stop * 1e-9, pump_steps=steps["pump_steps"],
            pump_power=powers["pump_power_mw"], scan_power=powers["scan_power_mw"],
            scan_span=_positive(spec, "scan_span_ghz", where) * GHZ,
            scan_steps=steps["scan_steps"], direction=direction)
    return plans


def build_config(raw: dict) -> SystemConfig:
    """Validate a parsed config dict and build the SystemConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table")
    _unknown(raw, TOP_KEYS, "")
    schema = raw.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"schema: unsupported version {schema!r} (expected {SCHEMA_VERSION})")
    modes = _modes(raw)
    thermal = _thermal(raw)
    integrator = _integrator(raw)
    plans = _plans(raw)

    table = _table(raw, "couplings", "")
    _unknown(table, COUPLING_KEYS, "couplings.")
    twm = table.get("twm", True)
    if not isinstance(twm, bool):
        raise ConfigError(f"couplings.twm: expected true or false, got {twm!r}")
    g3 = _num(table, "g3", "couplings.")
    if g3 < 0:
        raise ConfigError(f"couplings.g3: must be non-negative, got {g3!r}")
    tolerance = _positive(table, "phase_match_tolerance", "couplings.", default=200.0)

    warnings = []
    mismatch = modes.cold_mismatch
    if twm and abs(mismatch) > tolerance * modes.c.kappa_total:
        warnings.append(
            f"cold TWM mismatch {mismatch / modes.c.kappa_total:.4g} kappa_c exceeds the "
            f"phase-matching tolerance of {tolerance:g} kappa_c; phase matching is unreachable")
    if twm and thermal.mismatch_pull == 0.0:
        warnings.append("thermal.eta_d equals eta_b + eta_c; heating cannot tune the mismatch")

    calibration = None
    if ("g2" in table) == ("cooperativity" in table):
        raise ConfigError("couplings: give exactly one of g2 or cooperativity")
    if "g2" in table:
        if "calibration_plan" in table:
            raise ConfigError("couplings.calibration_plan: only valid with cooperativity")
        g2 = _num(table, "g2", "couplings.")
        if g2 < 0:
            raise ConfigError(f"couplings.g2: must be non-negative, got {g2!r}")
    else:
        coop = _num(table, "cooperativity", "couplings.")
        if coop < 0:
            raise ConfigError(f"couplings.cooperativity: must be non-negative, got {coop!r}")
        plan_name = table.get("calibration_plan", "main")
        if plan_name not in plans:
            raise ConfigError(f"couplings.calibration_plan: no plan named {plan_name!r}")
        sweep = pump_sweep(plans[plan_name], modes, thermal)
        try:
            g2 = calibrate_g2(coop, sweep, modes)
        except ValueError as exc:
            raise ConfigError(f"couplings.cooperativity: {exc}") from None
        k = sweep.phase_matched_index()
        calibration = {"cooperativity": coop, "plan": plan_name, "step": k,
                       "pump_wavelength_nm": sweep.wavelengths[k] * 1e9, "g2": g2}

    for w in warnings:
        log.warning(w)
    return SystemConfig(modes=modes, couplings=NonlinearCouplings(g2, g3), thermal=thermal,
                        integrator=integrator, plans=plans, twm_enabled=twm, source=raw,
                        warnings=tuple(warnings), calibration=calibration)
