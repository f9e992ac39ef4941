"""Delimited and JSON output with a fixed number format, plus the run manifest."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Sequence

import numpy as np

from . import __version__
from .fitting import SpectrumTrace
from .model import wavelength_to_omega


def fmt(v) -> str:
    if isinstance(v, str):
        return v
    return format(float(v), ".17g")


def write_csv(path, header: Sequence[str], columns: Sequence) -> Path:
    """Write equal-length columns under ``header``; numbers get 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c).ravel() if not isinstance(c, list) else c for c in columns]
    n = len(cols[0])
    if any(len(c) != n for c in cols):
        raise ValueError("CSV columns differ in length")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(n):
            w.writerow([fmt(c[i]) for c in cols])
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_spectrum_csv(path):
    """Read a spectrum CSV with ``detuning_hz`` or ``wavelength_nm``, ``transmission``
    and optional ``sigma`` columns.

    Returns the trace (detunings in rad/s, ``resonance - laser`` convention) and
    the reference angular frequency that wavelength input was measured against
    (``None`` for detuning input).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "transmission" not in header:
        raise ValueError(f"{path}: missing 'transmission' column")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if data.size == 0:
        raise ValueError(f"{path}: no data rows")
    col = {name: data[:, i] for i, name in enumerate(header)}
    sigma = col.get("sigma")
    ref = None
    if "detuning_hz" in col:
        x = 2.0 * math.pi * col["detuning_hz"]
    elif "probe_detuning_hz" in col:
        x = 2.0 * math.pi * col["probe_detuning_hz"]
    elif "wavelength_nm" in col:
        omega = wavelength_to_omega(col["wavelength_nm"] * 1e-9)
        ref = float(0.5 * (omega.min() + omega.max()))
        x = ref - omega
    else:
        raise ValueError(f"{path}: need a detuning_hz or wavelength_nm column")
    order = np.argsort(x, kind="stable")
    return SpectrumTrace(x[order], col["transmission"][order],
                         None if sigma is None else sigma[order]), ref


@dataclass
class RunManifest:
    command: str
    config_path: str
    config_hash: str
    overrides: List[str]
    tool_version: str = __version__
    outputs: List[str] = field(default_factory=list)
    wall_time_s: float = 0.0
    started_utc: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                                                   time.gmtime()))
    python: str = field(default_factory=platform.python_version)

    def write(self, out_dir) -> Path:
        return write_json(Path(out_dir) / "manifest.json", asdict(self))
