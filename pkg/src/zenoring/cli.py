"""Command-line interface.

Exit status: 0 success, 2 invalid configuration or arguments, 3 non-convergence
(steady state not reached, integration failure, or fit not converged).
Diagnostics go to stderr; data goes to files under ``--out`` and summaries to
stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analytic, dynamics, thermal
from .config import GHZ, ConfigError, load_config, resolve_config_path
from .fitting import SpectrumTrace, fit_lorentzian, fit_zeno, lorentzian_transmission, zeno_transmission
from .io import RunManifest, fmt, read_spectrum_csv, write_csv, write_json
from .model import DomainError, make_drive, omega_to_wavelength, wavelength_to_omega

log = logging.getLogger("zenoring")

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 2, 3


class NotConverged(RuntimeError):
    pass


class Run:
    """Per-invocation context: config, output directory and produced files."""

    def __init__(self, args):
        self.args = args
        self.config = load_config(args.config, args.override)
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs = []

    def csv(self, name, header, columns):
        self.outputs.append(str(write_csv(self.out / name, header, columns).relative_to(self.out)))

    def json(self, name, obj):
        self.outputs.append(str(write_json(self.out / name, obj).relative_to(self.out)))

    def figure(self, name, func, *a, **kw):
        if self.args.no_figures:
            return
        func(*a, path=self.out / name, **kw)
        self.outputs.append(name)


def _sweep_csv(run, sweep, name="sweep.csv"):
    run.csv(name, ["pump_wavelength_nm", "pump_transmission", "beta_sq", "delta_pm_hz", "branch"],
            [sweep.wavelengths * 1e9, sweep.transmission, sweep.beta_sq,
             sweep.delta_pm / (2 * math.pi), [p.branch for p in sweep.points]])


def _spectrum_csv(run, name, trace):
    run.csv(name, ["probe_detuning_hz", "transmission"],
            [trace.detunings / (2 * math.pi), trace.transmissions])


def cmd_spectrum(run):
    from . import plotting
    cfg, plan = run.config, run.config.plan(run.args.plan)
    couplings = cfg.active_couplings
    if run.args.pump_nm is not None:
        drive = make_drive(cfg.modes.b, wavelength_to_omega(run.args.pump_nm * 1e-9),
                                   plan.pump_power)
        point = thermal.thermal_steady_pump(drive, cfg.modes, cfg.thermal)
    else:
        sweep = thermal.pump_sweep(plan, cfg.modes, cfg.thermal)
        k = sweep.phase_matched_index()
        if k is None:
            drive = make_drive(cfg.modes.b, cfg.modes.b.omega0, plan.pump_power)
            point = thermal.thermal_steady_pump(drive, cfg.modes, cfg.thermal)
        else:
            point = sweep.points[k]
    offsets = plan.scan_offsets()
    t = analytic.linear_transmission(offsets, point.delta_pm + offsets,
                                     couplings.g2 ** 2 * point.beta_sq, cfg.modes.c, cfg.modes.d)
    trace = SpectrumTrace(offsets, np.asarray(t))
    _spectrum_csv(run, "spectrum.csv", trace)
    run.figure("spectrum.png", plotting.plot_spectrum, trace)
    zf = analytic.zeno_figures(couplings.g2, point.beta_sq, cfg.modes.c, cfg.modes.d)
    print(f"pump_wavelength_nm={fmt(point.pump_wavelength * 1e9)}")
    print(f"beta_sq={fmt(point.beta_sq)}")
    print(f"delta_pm_hz={fmt(point.delta_pm / (2 * math.pi))}")
    print(f"cooperativity={fmt(zf.cooperativity)}")
    print(f"min_transmission={fmt(np.min(t))}")


def _spectra_steps(sweep, count):
    upper = np.flatnonzero(sweep.upper)
    if count <= 0 or upper.size == 0:
        return []
    k = sweep.phase_matched_index()
    onset = int(upper[np.argmax(sweep.beta_sq[upper] > 0.05 * sweep.beta_sq.max())])
    last = k if k is not None else int(upper[-1])
    steps = sorted(set(np.linspace(onset, last, max(count - 1, 1)).round().astype(int)))
    if sweep.drop_index is not None:
        steps.append(sweep.drop_index)
    return steps


def cmd_sweep(run):
    from . import plotting
    cfg, plan = run.config, run.config.plan(run.args.plan)
    sweep = thermal.pump_sweep(plan, cfg.modes, cfg.thermal)
    _sweep_csv(run, sweep)
    steps = _spectra_steps(sweep, run.args.spectra)
    seq = thermal.probe_sequence(plan, cfg.modes, cfg.active_couplings, cfg.thermal, sweep, steps)
    for k, (_, trace) in zip(steps, seq):
        _spectrum_csv(run, f"spectra/spectrum_step_{k:05d}.csv", trace)
    run.figure("sweep.png", plotting.plot_sweep, sweep)
    if seq:
        run.figure("spectra.png", plotting.plot_spectra, seq)
    d, k = sweep.drop_index, sweep.phase_matched_index()
    print(f"drop_wavelength_nm={fmt(sweep.wavelengths[d] * 1e9) if d is not None else 'none'}")
    cross = sweep.crossing_wavelength()
    print(f"phase_match_wavelength_nm={fmt(cross * 1e9) if cross is not None else 'none'}")
    print(f"phase_match_step={k if k is not None else 'none'}")


def _map_csv(run, name, fmap):
    pump = np.broadcast_to(fmap.pump_wavelengths[:, None], fmap.p_out.shape)
    run.csv(name, ["pump_wavelength_nm", "seed_wavelength_nm", "p_out_w"],
            [pump * 1e9, fmap.seed_wavelengths * 1e9, fmap.p_out])


def cmd_fwm_map(run):
    from . import plotting
    cfg, plan = run.config, run.config.plan(run.args.plan)
    on = run.args.twm == "on"
    fmap = thermal.fwm_map(plan, cfg.modes, cfg.couplings, cfg.thermal, twm_enabled=on,
                           jobs=run.args.jobs)
    tag = "on" if on else "off"
    _map_csv(run, f"fwm_map_twm_{tag}.csv", fmap)
    run.figure(f"fwm_map_twm_{tag}.png", plotting.plot_fwm_map, fmap)
    i = int(np.argmax(fmap.column_max()))
    print(f"max_p_out_w={fmt(fmap.p_out.max())}")
    print(f"max_pump_wavelength_nm={fmt(fmap.pump_wavelengths[i] * 1e9)}")


def cmd_suppression(run):
    from . import plotting
    cfg, plan = run.config, run.config.plan(run.args.plan)
    sweep = thermal.pump_sweep(plan, cfg.modes, cfg.thermal)
    off = thermal.fwm_map(plan, cfg.modes, cfg.couplings, cfg.thermal, False, sweep, run.args.jobs)
    on = thermal.fwm_map(plan, cfg.modes, cfg.couplings, cfg.thermal, True, sweep, run.args.jobs)
    trace = thermal.suppression_trace(off, on)
    run.csv("suppression.csv", ["pump_wavelength_nm", "max_p_out_off_w", "max_p_out_on_w",
                                "suppression_ratio", "delta_pm_hz"],
            [trace.pump_wavelengths * 1e9, off.column_max(), on.column_max(), trace.ratio,
             sweep.delta_pm / (2 * math.pi)])
    run.figure("suppression.png", plotting.plot_suppression, trace, off.column_max(),
               on.column_max())
    print(f"peak_suppression_ratio={fmt(trace.peak_ratio)}")
    print(f"peak_pump_wavelength_nm={fmt(trace.peak_wavelength * 1e9)}")
    print(f"peak_step={trace.peak_index}")


def _rel(a, b):
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def cmd_steady(run):
    cfg, plan = run.config, run.config.plan(run.args.plan)
    modes, couplings = cfg.modes, cfg.active_couplings
    delta_b = run.args.pump_detuning_ghz * GHZ
    delta_x = run.args.scan_detuning_ghz * GHZ
    if run.args.scenario == "probe":
        sc = dynamics.probe_scenario(modes, couplings, plan.pump_power, plan.scan_power,
                                     delta_b=delta_b, delta_c=delta_x)
    else:
        sc = dynamics.seed_scenario(modes, couplings, plan.pump_power, plan.scan_power,
                                    delta_b=delta_b, delta_a=delta_x)
    res = dynamics.steady_state(sc.system, cfg.integrator, keep_trajectory=run.args.trajectory)
    st = res.state
    frames = sc.frame.as_array()
    omega0 = np.array([m.omega0 for m in modes])
    delta = omega0 - frames  # resonance - frame
    beta = analytic.pump_beta(sc.drives[0], modes.b)
    n_b = beta.photon_number
    g2sq_nb = couplings.g2 ** 2 * n_b
    rows = [("n_b", n_b, st.photon_numbers[1])]
    if run.args.scenario == "probe":
        eps_c = sc.drives[1].epsilon
        denom = -1j * delta[2] - modes.c.kappa_total + g2sq_nb / (-1j * delta[3] - modes.d.kappa_total)
        rows.append(("n_c", eps_c ** 2 / abs(denom) ** 2, st.photon_numbers[2]))
        rows.append(("transmission",
                     analytic.linear_transmission(delta[2], delta[3], g2sq_nb, modes.c, modes.d),
                     sc.probe_transmission(st)))
    else:
        seed = sc.drives[1]
        rows.append(("n_a", seed.epsilon ** 2 / (delta[0] ** 2 + modes.a.kappa_total ** 2),
                     st.photon_numbers[0]))
        p = analytic.fwm_output(delta[0], delta[2], n_b, couplings.g3, seed.power_onchip,
                                modes.a, modes.c, omega_seed=frames[0], omega_idler=frames[2])
        if couplings.g2 > 0:
            p = analytic.fwm_suppressed(p, delta[2], delta[3], g2sq_nb, modes.c,
                                        modes.d).p_out_suppressed
        rows.append(("p_out_w", p, sc.idler_power(st)))
    names, ana, ode = zip(*rows)
    errs = [_rel(a, b) for a, b in zip(ana, ode)]
    run.csv("comparison.csv", ["quantity", "analytic", "ode", "rel_error"],
            [list(names), list(ana), list(ode), errs])
    run.csv("steady_state.csv", ["mode", "re", "im", "photons"],
            [["a", "b", "c", "d"], st.alpha.real, st.alpha.imag, st.photon_numbers])
    if res.trajectory is not None:
        res.trajectory.write_csv(run.out / "trajectory.csv")
        run.outputs.append("trajectory.csv")
    print(f"{'quantity':<14}{'analytic':>26}{'ode':>26}{'rel_error':>12}")
    for n, a, o, e in zip(names, ana, ode, errs):
        print(f"{n:<14}{fmt(a):>26}{fmt(o):>26}{e:>12.3e}")
    print(f"converged={res.converged} metric={res.metric:.3e} time_s={fmt(st.time)}")
    if not res.converged:
        raise NotConverged("steady state not reached within max_time")


def cmd_fit(run):
    from . import plotting
    args = run.args
    trace, ref = read_spectrum_csv(args.input)
    if args.model == "lorentzian":
        report = fit_lorentzian(trace)
        v = report.values
        model = lorentzian_transmission(trace.detunings, v["center"], v["kappa"], v["kappa_ext"])
    else:
        kappa, kappa_ext = args.kappa, args.kappa_ext
        if args.cold_fit:
            cold = json.loads(Path(args.cold_fit).read_text())
            pars = {p["name"]: p["value"] for p in cold["parameters"]}
            kappa, kappa_ext = pars["kappa"], pars["kappa_ext"]
        if kappa is None or kappa_ext is None:
            raise ValueError("the zeno model needs --kappa and --kappa-ext or --cold-fit")
        report = fit_zeno(trace, kappa, kappa_ext, center=None if args.free_center else 0.0)
        v = report.values
        model = zeno_transmission(trace.detunings, v["g2sq_nb"], v["delta_pm"], v["kappa_d"],
                                  kappa, kappa_ext, v.get("center", 0.0))
    out = report.to_dict()
    if ref is not None:
        out["reference_wavelength_nm"] = omega_to_wavelength(ref) * 1e9
    run.json("fit.json", out)
    run.figure("fit.png", plotting.plot_spectrum, trace, fit=model)
    for p in report.parameters:
        print(f"{p.name}={fmt(p.value)} sigma={fmt(p.sigma)} {p.units}")
    print(f"residual_rms={fmt(report.residual_rms)} converged={report.converged}")
    if not report.converged:
        raise NotConverged("fit did not converge")


COMMANDS = {
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "fwm-map": cmd_fwm_map,
    "suppression": cmd_suppression,
    "steady": cmd_steady,
    "fit": cmd_fit,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default",
                        help="TOML config file, or the name of a bundled config "
                             "(default, acceptance)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker threads for grid evaluation")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. plans.main.pump_power_mw=90")
    common.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="zenoring", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("spectrum", parents=[common], help="probe transmission around mode c")
    s.add_argument("--plan", default="main")
    s.add_argument("--pump-nm", type=float, default=None,
                   help="pump wavelength; default is the phase-matched sweep step")

    s = sub.add_parser("sweep", parents=[common], help="thermal pump sweep and probe spectra")
    s.add_argument("--plan", default="main")
    s.add_argument("--spectra", type=int, default=7, help="number of probe spectra to write")

    s = sub.add_parser("fwm-map", parents=[common], help="stimulated FWM map over pump x seed")
    s.add_argument("--plan", default="main")
    s.add_argument("--twm", choices=("on", "off"), default="on")

    s = sub.add_parser("suppression", parents=[common], help="FWM suppression ratio trace")
    s.add_argument("--plan", default="main")

    s = sub.add_parser("steady", parents=[common], help="ODE steady state vs closed forms")
    s.add_argument("--plan", default="main", help="plan supplying pump and probe/seed powers")
    s.add_argument("--scenario", choices=("probe", "seed"), default="probe")
    s.add_argument("--pump-detuning-ghz", type=float, default=0.0)
    s.add_argument("--scan-detuning-ghz", type=float, default=0.0,
                   help="probe (mode c) or seed (mode a) detuning, resonance - laser")
    s.add_argument("--trajectory", action="store_true", help="also write trajectory.csv")

    s = sub.add_parser("fit", parents=[common], help="fit a transmission spectrum CSV")
    s.add_argument("--input", required=True)
    s.add_argument("--model", choices=("lorentzian", "zeno"), default="lorentzian")
    s.add_argument("--kappa", type=float, default=None, help="mode-c total decay rate, rad/s")
    s.add_argument("--kappa-ext", type=float, default=None, help="mode-c external rate, rad/s")
    s.add_argument("--cold-fit", default=None, help="fit.json of a pump-off Lorentzian fit")
    s.add_argument("--free-center", action="store_true", help="also fit the mode-c center")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    # a fresh handler per call so the stream is whatever stderr is right now
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    if args.jobs < 1:
        log.error("--jobs must be at least 1")
        return EXIT_INVALID
    t0 = time.perf_counter()
    status = EXIT_OK
    try:
        run = Run(args)
        COMMANDS[args.command](run)
    except (ConfigError, DomainError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except NotConverged as exc:
        log.error("%s", exc)
        status = EXIT_NONCONVERGED
    except dynamics.IntegrationError as exc:
        log.error("%s", exc)
        return EXIT_NONCONVERGED
    manifest = RunManifest(command=" ".join(["zenoring"] + list(argv if argv is not None
                                                                 else sys.argv[1:])),
                           config_path=str(resolve_config_path(args.config)),
                           config_hash=run.config.config_hash(), overrides=list(args.override),
                           outputs=sorted(run.outputs),
                           wall_time_s=time.perf_counter() - t0)
    manifest.write(run.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
