"""Accelerogram container and on-disk formats.

Native format: one header line ``# dt=<value_s> n=<count> label=<text>``
followed by one acceleration value (g) per line, 9 significant digits.
Recorded motions may instead come as two whitespace- or comma-separated
columns (time, acceleration); the time step is inferred and must be
uniform to 1e-6 relative.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import FormatError

STANDARD_GRAVITY = 9.81  # m/s^2 per g


@dataclass(frozen=True)
class Accelerogram:
    """Uniformly sampled acceleration time series in units of g."""

    dt: float
    samples: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "samples",
                           np.asarray(self.samples, dtype=float))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.samples.size == 0:
            raise ValueError("samples must be non-empty")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    @property
    def n(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return (self.n - 1) * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt


def write_accelerogram(acc: Accelerogram, path: str | os.PathLike) -> None:
    """Write a motion in the native single-column text format."""
    with open(path, "w") as fh:
        fh.write(f"# dt={acc.dt:.9g} n={acc.n} label={acc.label}\n")
        for v in acc.samples:
            fh.write(f"{v:.9g}\n")


def _read_native(lines: list[str], path) -> Accelerogram:
    header = lines[0][1:].strip()
    fields = {}
    # label may contain spaces: split the first two key=value tokens, keep the rest
    try:
        dt_tok, n_tok, rest = header.split(None, 2)
    except ValueError:
        raise FormatError(f"{path}: malformed header: {header!r}")
    for tok in (dt_tok, n_tok):
        key, _, value = tok.partition("=")
        fields[key] = value
    if not rest.startswith("label="):
        raise FormatError(f"{path}: header missing label field")
    label = rest[len("label="):]
    try:
        dt = float(fields["dt"])
        n = int(fields["n"])
    except (KeyError, ValueError):
        raise FormatError(f"{path}: malformed header: {header!r}")
    values = np.array([float(s) for s in lines[1:] if s.strip()], dtype=float)
    if values.size != n:
        raise FormatError(f"{path}: header says n={n}, found {values.size} samples")
    return Accelerogram(dt=dt, samples=values, label=label)


def _read_two_column(lines: list[str], path, units: str | None) -> Accelerogram:
    if units is None:
        raise FormatError(
            f"{path}: two-column motion files need explicit units (--units g|m/s2)")
    if units not in ("g", "m/s2"):
        raise FormatError(f"unknown units {units!r}; expected 'g' or 'm/s2'")
    rows = []
    for s in lines:
        s = s.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.replace(",", " ").split()
        if len(parts) != 2:
            raise FormatError(f"{path}: expected two columns, got {s!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least two samples")
    t = np.array([r[0] for r in rows])
    a = np.array([r[1] for r in rows])
    steps = np.diff(t)
    dt = steps[0]
    if dt <= 0 or np.any(np.abs(steps - dt) > 1e-6 * abs(dt)):
        raise FormatError(f"{path}: non-uniform time steps")
    if units == "m/s2":
        a = a / STANDARD_GRAVITY
    return Accelerogram(dt=dt, samples=a, label=os.path.basename(str(path)))


def ingest_recorded(path: str | os.PathLike, units: str | None = None) -> Accelerogram:
    """Read a motion file, auto-detecting native vs two-column layout.

    Native files are always in g.  For two-column (time, acceleration)
    files the units argument is required; 'm/s2' values are divided by
    9.81.
    """
    with open(path) as fh:
        lines = fh.readlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    if lines[0].startswith("#") and "dt=" in lines[0]:
        return _read_native(lines, path)
    return _read_two_column(lines, path, units)
