"""Figures written next to the CSV outputs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TWO_PI = 2 * np.pi

plt.rcParams.update({
    "figure.dpi": 110,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "svg.hashsalt": "zenoring",
    "axes.formatter.useoffset": False,
})


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_sweep(sweep, path):
    lam = sweep.wavelengths * 1e9
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(4.5, 4.5))
    ax1.plot(lam, sweep.transmission, "k-", lw=1)
    ax1.set_ylabel("pump transmission")
    ax2.plot(lam, sweep.delta_pm / TWO_PI / 1e9, "b-", lw=1)
    ax2.axhline(0, color="0.6", lw=0.8, ls="--")
    k = sweep.phase_matched_index()
    if k is not None:
        for ax in (ax1, ax2):
            ax.axvline(lam[k], color="r", lw=0.8, ls=":")
    ax2.set_ylabel(r"$\delta_{pm}/2\pi$ (GHz)")
    ax2.set_xlabel("pump wavelength (nm)")
    return _save(fig, path)


def plot_spectra(sequence, path, offset=1.1):
    fig, ax = plt.subplots(figsize=(3.8, 5))
    for i, (pt, trace) in enumerate(sequence):
        x = trace.detunings / TWO_PI / 1e9
        ax.plot(x, trace.transmissions + i * offset, "r-", lw=1)
        ax.text(x[-1], 1 + i * offset, f"{(pt.pump_wavelength * 1e9 - 1550) * 1e3:.1f} pm",
                fontsize=7, ha="right", va="bottom")
    ax.set_xlabel(r"probe detuning $\delta_c/2\pi$ (GHz)")
    ax.set_ylabel("transmission (offset)")
    return _save(fig, path)


def plot_spectrum(trace, path, fit=None):
    fig, ax = plt.subplots(figsize=(4, 3))
    x = trace.detunings / TWO_PI / 1e9
    ax.plot(x, trace.transmissions, "k.", ms=2, label="data")
    if fit is not None:
        ax.plot(x, fit, "r-", lw=1, label="fit")
        ax.legend()
    ax.set_xlabel(r"detuning $/2\pi$ (GHz)")
    ax.set_ylabel("transmission")
    ax.set_ylim(bottom=min(0, float(np.min(trace.transmissions))))
    return _save(fig, path)


def plot_fwm_map(fmap, path):
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    pump = fmap.pump_wavelengths * 1e9
    # seed rows ride on the hot resonance, so plot against the offset from the row centre
    seed = fmap.seed_wavelengths * 1e9
    offset = (seed - seed.mean(axis=1, keepdims=True)) * 1e3
    p = fmap.p_out
    z = p / p.max() if p.max() > 0 else p
    mesh = ax.imshow(z.T, origin="lower", aspect="auto", cmap="viridis", interpolation="nearest",
                     extent=(pump[0], pump[-1], offset[0, 0], offset[0, -1]))
    fig.colorbar(mesh, ax=ax, label="normalised FWM output")
    ax.set_xlabel("pump wavelength (nm)")
    ax.set_ylabel("seed offset from hot mode a (pm)")
    ax.set_title("TWM on" if fmap.twm_enabled else "TWM off", fontsize=9)
    return _save(fig, path)


def plot_suppression(trace, off_max, on_max, path):
    lam = trace.pump_wavelengths * 1e9
    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(4.5, 4.5))
    norm = off_max.max() if off_max.max() > 0 else 1.0
    ax1.semilogy(lam, np.maximum(off_max / norm, 1e-12), "k-", lw=1, label="TWM off")
    ax1.semilogy(lam, np.maximum(on_max / norm, 1e-12), "b--", lw=1, label="TWM on")
    ax1.set_ylabel("max FWM efficiency (norm.)")
    ax1.legend()
    ax2.plot(lam, trace.ratio, "r-", lw=1)
    ax2.set_ylabel("suppression ratio")
    ax2.set_xlabel("pump wavelength (nm)")
    ax2.annotate(f"{trace.peak_ratio:.1f}", (trace.peak_wavelength * 1e9, trace.peak_ratio),
                 fontsize=8, ha="right")
    return _save(fig, path)
