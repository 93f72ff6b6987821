"""Uniformly sampled waveforms and their CSV serialization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np


class WaveformError(ValueError):
    """Raised for malformed or incompatible waveforms."""


@dataclass(frozen=True)
class Waveform:
    """A uniformly sampled signal: value ``samples[k]`` at ``start + k*step``."""

    start: float
    step: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not self.step > 0:
            raise WaveformError(f"step must be > 0, got {self.step}")
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise WaveformError("samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            bad = int(np.flatnonzero(~np.isfinite(self.samples))[0])
            raise WaveformError(f"non-finite sample at t={self.time_at(bad)!r}")

    def __len__(self) -> int:
        return int(self.samples.size)

    def time_at(self, index: int) -> float:
        return self.start + index * self.step

    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.samples.size)

    @property
    def stop(self) -> float:
        return self.time_at(len(self) - 1)

    def index_at(self, t: float) -> int:
        """Grid index nearest to time t (clamped to the waveform extent)."""
        k = int(round((t - self.start) / self.step))
        return min(max(k, 0), len(self) - 1)

    def slice_time(self, t0: float, t1: float) -> "Waveform":
        i0, i1 = self.index_at(t0), self.index_at(t1)
        if i1 <= i0:
            raise WaveformError(f"empty slice [{t0}, {t1}]")
        return Waveform(self.time_at(i0), self.step, self.samples[i0 : i1 + 1])

    def same_grid(self, other: "Waveform") -> bool:
        return (
            self.start == other.start
            and self.step == other.step
            and len(self) == len(other)
        )

    def __sub__(self, other: "Waveform") -> "Waveform":
        if not self.same_grid(other):
            raise WaveformError("waveform grids do not match")
        return Waveform(self.start, self.step, self.samples - other.samples)


def _fmt(x: float) -> str:
    # repr() is the shortest round-trip form, which keeps CSVs byte-stable
    return repr(float(x))


def write_csv(path, columns: Dict[str, Waveform]) -> None:
    """Write waveforms sharing one grid as ``t,<name>...`` rows (SI units, LF)."""
    if not columns:
        raise WaveformError("no waveforms to write")
    waves = list(columns.values())
    first = waves[0]
    for w in waves[1:]:
        if not first.same_grid(w):
            raise WaveformError("CSV columns must share one sampling grid")
    names = list(columns.keys())
    with open(path, "w", newline="\n") as fh:
        fh.write("t," + ",".join(names) + "\n")
        times = first.times()
        data = [columns[n].samples for n in names]
        for k in range(len(first)):
            row = [_fmt(times[k])] + [_fmt(col[k]) for col in data]
            fh.write(",".join(row) + "\n")


def read_csv(path) -> Dict[str, Waveform]:
    """Inverse of :func:`write_csv` (used by tests and round-trip checks)."""
    with open(path, "r") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if header[0] != "t" or len(header) < 2:
        raise WaveformError(f"{path}: not a waveform CSV")
    data = np.array([[float(v) for v in row] for row in rows])
    t = data[:, 0]
    step = t[1] - t[0] if len(t) > 1 else 1.0
    return {
        name: Waveform(t[0], step, data[:, j + 1]) for j, name in enumerate(header[1:])
    }
