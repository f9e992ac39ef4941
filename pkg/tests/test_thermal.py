from dataclasses import replace

import numpy as np
import pytest

from zenoring import analytic
from zenoring.config import load_config
from zenoring.model import DomainError, make_drive
from zenoring.thermal import (DROPPED, UPPER, FwmMap, SweepPlan, ThermalModel, fwm_map,
                              probe_sequence, pump_photon_roots, pump_sweep, suppression_trace,
                              thermal_steady_pump)
from oracles import KAPPA_TEL, default_modes


@pytest.fixture(scope="module")
def cfg():
    return load_config("acceptance")


@pytest.fixture(scope="module")
def sweep(cfg):
    return pump_sweep(cfg.plan(), cfg.modes, cfg.thermal)


def small_plan(**kw):
    base = dict(pump_start=1549.95e-9, pump_stop=1550.05e-9, pump_steps=41, pump_power=1e-3,
                scan_power=1e-4, scan_span=8 * KAPPA_TEL, scan_steps=41)
    base.update(kw)
    return SweepPlan(**base)


def test_thermal_model_validation():
    with pytest.raises(DomainError):
        ThermalModel(-1.0, 0, 0, 0)
    with pytest.raises(DomainError):
        ThermalModel(0, 0, 0, 0, quasi_static=False)
    with pytest.raises(DomainError):
        small_plan(pump_steps=1)
    with pytest.raises(DomainError):
        small_plan(pump_start=1551e-9)


def test_roots_satisfy_self_consistency(cfg):
    modes, th = cfg.modes, cfg.thermal
    kb = modes.b.kappa_total
    for lam in (1549.9e-9, 1550.1e-9, 1550.3e-9):
        from zenoring.model import wavelength_to_omega
        drive = make_drive(modes.b, wavelength_to_omega(lam), 0.18)
        roots = pump_photon_roots(drive, modes.b, th.eta_b)
        assert roots.size in (1, 3)
        for n in roots:
            d = modes.b.omega0 - th.eta_b * n - drive.omega_drive
            assert n == pytest.approx(drive.epsilon ** 2 / (d * d + kb * kb), rel=1e-10)


def test_zero_power_is_cold(cfg):
    modes = cfg.modes
    drive = make_drive(modes.b, modes.b.omega0 + 0.3 * KAPPA_TEL, 0.0)
    pt = thermal_steady_pump(drive, modes, cfg.thermal)
    assert pt.beta_sq == 0.0
    kb = modes.b.kappa_total
    cold = abs(1 + 2 * modes.b.kappa_external / (-1j * (-0.3 * KAPPA_TEL) - kb)) ** 2
    # omega0 + 0.3 kappa loses ~1e-10 to cancellation at optical frequencies
    assert pt.pump_transmission == pytest.approx(cold, rel=1e-8)
    assert pt.delta_pm == pytest.approx(modes.cold_mismatch - 0.3 * KAPPA_TEL, rel=1e-9)


def test_triangle_single_drop(sweep):
    t = sweep.transmission
    branches = [p.branch for p in sweep.points]
    d = sweep.drop_index
    assert d is not None
    assert all(b == UPPER for b in branches[:d]) and all(b == DROPPED for b in branches[d:])
    # slow ramp down then one abrupt jump back towards 1
    assert t[d - 1] < 0.05 and t[d] > 0.95
    jumps = np.flatnonzero(np.abs(np.diff(t)) > 0.2)
    assert list(jumps) == [d - 1]
    k0 = int(np.argmax(sweep.beta_sq > 0.1 * sweep.beta_sq.max()))
    # asymmetric: the falling edge spans many steps, the rise is a single step
    assert d - k0 > 100


def test_delta_pm_crosses_inside_triangle(sweep):
    k = sweep.phase_matched_index()
    d = sweep.drop_index
    assert k is not None and 0 < k < d
    dpm = sweep.delta_pm
    assert dpm[0] > 0 and np.min(dpm[:d]) <= 0 <= np.max(dpm[:d])
    lam = sweep.crossing_wavelength()
    assert sweep.wavelengths[0] < lam < sweep.wavelengths[d]


def test_delta_pm_continuous_except_at_drop(sweep):
    steps = np.abs(np.diff(sweep.delta_pm))
    d = sweep.drop_index
    typical = np.median(steps)
    big = np.flatnonzero(steps > 50 * typical)
    assert list(big) == [d - 1]
    # the jump heads back towards the cold value
    assert sweep.delta_pm[d] > sweep.delta_pm[d - 1]


def test_hysteresis_free_below_threshold():
    cfg = load_config("default")
    up = small_plan()
    down = replace(up, direction="down")
    s_up = pump_sweep(up, cfg.modes, cfg.thermal)
    s_dn = pump_sweep(down, cfg.modes, cfg.thermal)
    for om in s_up.omegas:
        assert pump_photon_roots(make_drive(cfg.modes.b, om, up.pump_power), cfg.modes.b,
                                 cfg.thermal.eta_b).size == 1
    np.testing.assert_allclose(s_up.beta_sq, s_dn.beta_sq[::-1], rtol=1e-9, atol=0)
    np.testing.assert_allclose(s_up.transmission, s_dn.transmission[::-1], rtol=1e-9, atol=0)


def test_hysteresis_above_threshold(cfg):
    plan = cfg.plan()
    s_dn = pump_sweep(replace(plan, direction="down"), cfg.modes, cfg.thermal)
    s_up = pump_sweep(plan, cfg.modes, cfg.thermal)
    # scanning down never climbs the hot branch that the up-scan rides
    assert s_dn.beta_sq.max() < 0.5 * s_up.beta_sq.max()


def test_probe_sequence_zero_power(cfg):
    plan = replace(cfg.plan(), pump_power=0.0, pump_steps=5)
    seq = probe_sequence(plan, cfg.modes, cfg.active_couplings, cfg.thermal)
    first = seq[0][1].transmissions
    for _, tr in seq:
        np.testing.assert_array_equal(tr.transmissions, first)
    assert first[len(first) // 2] == pytest.approx(0.0, abs=1e-12)


def test_probe_sequence_phase_matched_dip(cfg, sweep):
    k = sweep.phase_matched_index()
    pt, tr = probe_sequence(cfg.plan(), cfg.modes, cfg.active_couplings, cfg.thermal, sweep,
                            [k])[0]
    c = analytic.zeno_figures(cfg.active_couplings.g2, pt.beta_sq, cfg.modes.c,
                              cfg.modes.d).cooperativity
    assert c == pytest.approx(4.8738, rel=1e-12)
    mid = len(tr.transmissions) // 2
    # the step sits within a fraction of kappa_d of exact phase matching
    assert tr.transmissions[mid] == pytest.approx((c / (1 + c)) ** 2, abs=2e-3)
    assert tr.transmissions[mid] == pytest.approx(0.6885, abs=2e-3)


def test_probe_sequence_shallowest_near_phase_match(cfg, sweep):
    seq = probe_sequence(cfg.plan(), cfg.modes, cfg.active_couplings, cfg.thermal, sweep)
    dips = np.array([tr.transmissions.min() for _, tr in seq])
    d = sweep.drop_index
    k = sweep.phase_matched_index()
    assert abs(int(np.argmax(dips[:d])) - k) <= 3


def test_map_far_off_resonance_dark(cfg, sweep):
    fmap = fwm_map(cfg.plan(), cfg.modes, cfg.couplings, cfg.thermal, False, sweep)
    assert fmap.column_max()[0] < 1e-6 * fmap.column_max().max()
    d = sweep.drop_index
    assert fmap.column_max()[-1] < 1e-6 * fmap.column_max().max()
    cm = fmap.column_max()[:d]
    k0 = int(np.argmax(cm > 1e-3 * cm.max()))
    assert np.all(np.diff(cm[k0:]) > 0)


def test_map_suppression_at_phase_match(cfg, sweep):
    off = fwm_map(cfg.plan(), cfg.modes, cfg.couplings, cfg.thermal, False, sweep)
    on = fwm_map(cfg.plan(), cfg.modes, cfg.couplings, cfg.thermal, True, sweep)
    k = sweep.phase_matched_index()
    ratio = off.column_max()[k] / on.column_max()[k]
    assert ratio == pytest.approx((1 + 4.8738) ** 2, rel=0.05)
    tr = suppression_trace(off, on)
    far = np.abs(sweep.delta_pm) > 20 * cfg.modes.d.kappa_total
    assert np.all(np.abs(tr.ratio[far] - 1) < 0.05)
    assert abs(tr.peak_index - k) <= 1


def test_suppression_trace_identity_and_mismatch(cfg, sweep):
    m = fwm_map(cfg.plan(), cfg.modes, cfg.couplings, cfg.thermal, True, sweep)
    assert np.all(suppression_trace(m, m).ratio == 1.0)
    other = FwmMap(m.pump_wavelengths[:-1], m.seed_wavelengths[:-1], m.p_out[:-1], False)
    with pytest.raises(ValueError):
        suppression_trace(m, other)


def test_map_jobs_deterministic(cfg, sweep):
    a = fwm_map(cfg.plan(), cfg.modes, cfg.couplings, cfg.thermal, True, sweep, jobs=1)
    b = fwm_map(cfg.plan(), cfg.modes, cfg.couplings, cfg.thermal, True, sweep, jobs=7)
    assert np.array_equal(a.p_out, b.p_out)
    assert np.array_equal(a.seed_wavelengths, b.seed_wavelengths)


def test_map_seed_symmetry():
    """With no heating and everything centred, the map is even in the seed detuning
    once the photon-energy factor omega_idler / omega_seed is divided out."""
    from zenoring.model import NonlinearCouplings
    modes = default_modes(delta_pm=0.0)
    cold = ThermalModel(0.0, 0.0, 0.0, 0.0)
    lam_b = 2 * np.pi * 2.99792458e8 / modes.b.omega0
    plan = small_plan(pump_start=lam_b, pump_stop=lam_b * (1 + 1e-9), pump_steps=2,
                      pump_power=0.18, scan_steps=51)
    sw = pump_sweep(plan, modes, cold)
    for twm in (False, True):
        fm = fwm_map(plan, modes, NonlinearCouplings(3e5, 0.1), cold, twm, sw)
        from zenoring.model import wavelength_to_omega
        w_seed = wavelength_to_omega(fm.seed_wavelengths[0])
        w_idler = 2 * sw.omegas[0] - w_seed
        p = fm.p_out[0] * w_seed / w_idler
        if not twm:
            np.testing.assert_allclose(p, p[::-1], rtol=1e-12, atol=0)
        raw = fm.p_out[0]
        assert np.max(np.abs(raw - raw[::-1]) / raw) < 1e-4
