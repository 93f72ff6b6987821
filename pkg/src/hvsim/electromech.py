"""Drive voltage to normalized actuator displacement.

The static law is quadratic in voltage (electrostatic pressure), normalized
to 1.0 at the reference voltage; the mechanics are a second-order low-pass.
Both the natural frequency (80 Hz) and damping (0.7) are calibration values:
the model exists to expose supply-dependent dynamics, not to fit a specific
actuator, and its output is dimensionless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.signal import cont2discrete, lfilter

from .circuit import ControlSignal
from .devices import ConverterParams, DeaLoadParams, expand_dea_load
from .engine import IntegrationSettings
from .presets import FIG8_FREQUENCIES, bench_matched_to_converter
from .runner import run_scenario
from .scenario import Scenario
from .topology import StackParams, build_half_bridge
from .waveform import Waveform


class ElectromechError(ValueError):
    pass


@dataclass(frozen=True)
class ElectromechParams:
    reference_voltage: float = 1800.0
    static_gain: float = 1.0
    natural_frequency: float = 80.0
    damping_ratio: float = 0.7

    def __post_init__(self) -> None:
        if not (
            self.reference_voltage > 0
            and self.static_gain > 0
            and self.natural_frequency > 0
            and self.damping_ratio > 0
        ):
            raise ElectromechError("electromech parameters must be positive")


def displacement_response(v: Waveform, params: ElectromechParams) -> Waveform:
    """Normalized displacement for a drive-voltage waveform.

    ``x = H2(s) * gain * (v / v_ref)^2`` with ``H2`` the unit-DC-gain
    second-order low-pass, discretized zero-order-hold on the waveform grid
    (exact for stepwise inputs at the sample instants).
    """
    max_step = 1.0 / (20.0 * params.natural_frequency)
    if v.step > max_step:
        raise ElectromechError(
            f"step {v.step:.3g} s too coarse for a {params.natural_frequency:g} Hz "
            f"filter (need <= {max_step:.3g} s)"
        )
    wn = 2.0 * math.pi * params.natural_frequency
    num = [wn * wn]
    den = [1.0, 2.0 * params.damping_ratio * wn, wn * wn]
    bz, az, _ = cont2discrete((num, den), dt=v.step, method="zoh")
    u = params.static_gain * (v.samples / params.reference_voltage) ** 2
    x = lfilter(np.atleast_1d(np.squeeze(bz)), np.atleast_1d(np.squeeze(az)), u)
    return Waveform(v.start, v.step, x)


def displacement_amplitude(x: Waveform, period: float) -> float:
    """Half the peak-to-peak displacement over the final period."""
    final = x.slice_time(x.stop - period, x.stop)
    return float(final.samples.max() - final.samples.min()) / 2.0


def _fig8_scenario(
    supply, frequency: float, balancing: float = 1.8e6
) -> Scenario:
    period = 1.0 / frequency
    step = min(20e-6, period / 2000.0)
    circuit = build_half_bridge(
        supply,
        StackParams(balancing_resistance=balancing),
        load=expand_dea_load(DeaLoadParams()),
        control=ControlSignal(frequency=frequency),
    )
    return Scenario(
        circuit,
        IntegrationSettings(step=step, stop=2.0 * period),
        probes=("A", "O", "load_m"),
        origin=f"fig8-{frequency:g}Hz",
    )


def displacement_sweep(
    supply: str,
    frequencies: Sequence[float] = FIG8_FREQUENCIES,
    params: Optional[ElectromechParams] = None,
    converter: Optional[ConverterParams] = None,
) -> Dict[float, float]:
    """Displacement amplitude per frequency for ``supply`` of ``converter`` or
    ``bench``.

    The bench setting is matched to the converter's loaded DC output, so the
    two supplies agree in the quasi-static limit and differ only through
    their dynamics.
    """
    if supply not in ("converter", "bench"):
        raise ElectromechError(f"supply must be 'converter' or 'bench', got {supply!r}")
    if any(f <= 0 for f in frequencies):
        raise ElectromechError("frequencies must be positive")
    params = params or ElectromechParams()
    converter = converter or ConverterParams()
    if supply == "converter":
        sup = converter
    else:
        sup = bench_matched_to_converter(converter, expand_dea_load(DeaLoadParams()))
    out: Dict[float, float] = {}
    for f in frequencies:
        run = run_scenario(_fig8_scenario(sup, float(f)))
        x = displacement_response(run.voltage("load_m"), params)
        out[float(f)] = displacement_amplitude(x, 1.0 / float(f))
    return out


def rise_time_10_90(v: Waveform) -> float:
    """10-90% rise time of the first edge crossing both thresholds (seconds)."""
    s = v.samples
    lo, hi = float(s.min()), float(s.max())
    swing = hi - lo
    if swing <= 0:
        raise ElectromechError("waveform has no swing")
    th_lo, th_hi = lo + 0.1 * swing, lo + 0.9 * swing
    i = 0
    while i < len(s) - 1:
        if s[i] < th_lo <= s[i + 1]:
            j = i + 1
            while j < len(s) and s[j] < th_hi:
                j += 1
            if j < len(s):
                return v.time_at(j) - v.time_at(i)
            break
        i += 1
    raise ElectromechError("no edge crosses both thresholds")
