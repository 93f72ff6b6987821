"""Behavioral device models: gate drivers, supplies, loads, and the probe.

Two-terminal building blocks are expressed as :class:`Fragment` objects whose
components reference the symbolic terminals ``"+"`` and ``"-"``; instantiating
a fragment rebinds those to real node labels and prefixes internal names.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from .circuit import (
    Capacitor,
    CircuitError,
    Component,
    ControlSignal,
    ConverterSource,
    Probe,
    Resistor,
    VoltageSource,
)

__all__ = [
    "ControlSignal",
    "DriverSpec",
    "ConverterParams",
    "BenchSupplyParams",
    "DeaLoadParams",
    "Fragment",
    "ScheduleError",
    "driver_schedule",
    "expand_converter",
    "expand_bench_supply",
    "expand_dea_load",
    "series_rc_load",
    "ceramic_load",
    "probe_fragment",
    "derated_capacitance",
]


class ScheduleError(ValueError):
    """Driver delays are incompatible with the commanded edge spacing."""


@dataclass(frozen=True)
class DriverSpec:
    """Photovoltaic gate-driver timing: asymmetric turn-on/turn-off delays
    plus a per-device offset modeling part-to-part mismatch."""

    turn_on_delay: float = 0.4e-3
    turn_off_delay: float = 0.1e-3
    delay_offset: float = 0.0

    def __post_init__(self) -> None:
        if self.turn_on_delay < 0 or self.turn_off_delay < 0:
            raise CircuitError("driver delays must be >= 0")


@dataclass(frozen=True)
class ConverterParams:
    """Miniature DC-HVDC converter equivalent (EMF, internal R, output C)."""

    open_circuit_voltage: float = 4500.0
    internal_resistance: float = 3e6
    parallel_capacitance: float = 3e-9

    def __post_init__(self) -> None:
        if not (
            self.open_circuit_voltage > 0
            and self.internal_resistance > 0
            and self.parallel_capacitance > 0
        ):
            raise CircuitError("converter parameters must be positive")


@dataclass(frozen=True)
class BenchSupplyParams:
    """Benchtop HV generator equivalent.

    The output resistance and slew limit are calibration parameters (the
    generator itself is not characterized beyond its voltage setting); they
    matter only to startup ramps and fast transients.
    """

    voltage: float
    output_resistance: float = 1e3
    slew_limit: float = 35e6  # V/s

    def __post_init__(self) -> None:
        if not (self.voltage > 0 and self.output_resistance > 0 and self.slew_limit > 0):
            raise CircuitError("bench supply parameters must be positive")


@dataclass(frozen=True)
class DeaLoadParams:
    """Actuator equivalent: series electrode resistance feeding the actuator
    capacitance in parallel with its leakage resistance.  ``parallel_resistance``
    of ``None`` drops the leakage branch (pure series-RC mimic load)."""

    capacitance: float = 49e-9
    series_resistance: float = 60e3
    parallel_resistance: Optional[float] = 6.6e6

    def __post_init__(self) -> None:
        if not (self.capacitance > 0 and self.series_resistance > 0):
            raise CircuitError("DEA load parameters must be positive")
        if self.parallel_resistance is not None and not self.parallel_resistance > 0:
            raise CircuitError("DEA parallel resistance must be positive or None")

    @property
    def dc_resistance(self) -> float:
        if self.parallel_resistance is None:
            return math.inf
        return self.series_resistance + self.parallel_resistance


@dataclass(frozen=True)
class Fragment:
    """Two-terminal subcircuit template over symbolic terminals "+" and "-".

    Component names inside a fragment start with their netlist type letter
    (R/C/S/V/X); instantiation splices the instance prefix in after it, so
    printed netlists keep the letter-coded statement form.
    """

    components: Tuple[Component, ...]

    def instantiate(self, pos: str, neg: str, prefix: str) -> List[Component]:
        def bind(label: str) -> str:
            if label == "+":
                return pos
            if label == "-":
                return neg
            return f"{prefix}_{label}"

        out = []
        for comp in self.components:
            out.append(
                replace(
                    comp,
                    name=comp.name[0] + prefix + comp.name[1:],
                    pos=bind(comp.pos),
                    neg=bind(comp.neg),
                )
            )
        return out


def driver_schedule(
    control: ControlSignal,
    driver: DriverSpec,
    stop: float,
    invert: bool = False,
) -> List[Tuple[float, bool]]:
    """Switch-state events for one device following ``control``.

    Each commanded rising edge becomes an ON event after
    ``turn_on_delay + delay_offset``; falling edges become OFF events after
    ``turn_off_delay + delay_offset``.  Raises :class:`ScheduleError` when a
    delayed event would land at or past the event of the next commanded edge
    (command period too short for the driver).
    """
    if not stop > 0:
        raise ScheduleError(f"stop time must be > 0, got {stop}")
    events: List[Tuple[float, bool]] = []
    for t_cmd, state in control.edges(stop):
        if invert:
            state = not state
        delay = driver.turn_on_delay if state else driver.turn_off_delay
        events.append((t_cmd + delay + driver.delay_offset, state))
    for (t_a, _), (t_b, _) in zip(events, events[1:]):
        if not t_a < t_b:
            raise ScheduleError(
                f"driver delays reorder events at t={t_a!r}: command period too "
                f"short for driver (on={driver.turn_on_delay}, off={driver.turn_off_delay})"
            )
    return [(t, s) for t, s in events if t <= stop]


def expand_converter(params: ConverterParams, precharged: bool = True) -> Fragment:
    """Converter supply fragment (single composite component).

    ``precharged`` starts the output capacitor at the open-circuit voltage,
    i.e. the supply has settled before the drive begins.
    """
    return Fragment(
        components=(
            ConverterSource(
                name="X",
                pos="+",
                neg="-",
                open_circuit_voltage=params.open_circuit_voltage,
                internal_resistance=params.internal_resistance,
                parallel_capacitance=params.parallel_capacitance,
                precharged=precharged,
            ),
        )
    )


def expand_bench_supply(params: BenchSupplyParams) -> Fragment:
    """Bench generator fragment: slew-limited EMF behind its output resistance."""
    return Fragment(
        components=(
            VoltageSource(name="V_emf", pos="e", neg="-", voltage=params.voltage,
                          slew=params.slew_limit),
            Resistor(name="R_rout", pos="e", neg="+", resistance=params.output_resistance),
        )
    )


def derated_capacitance(c0: float, derating: float, rated_voltage: float, v: float) -> float:
    """Ceramic-capacitor capacitance at bias ``v``: ``c0*(1 - derating*min(|v|, rated))``.

    Linear and clamped at the rated voltage; raises when the model would go
    nonphysical (``derating*|v| >= 1``).
    """
    if c0 <= 0:
        raise CircuitError(f"capacitance must be > 0, got {c0}")
    if derating < 0:
        raise CircuitError(f"derating must be >= 0, got {derating}")
    v_eff = min(abs(v), rated_voltage)
    factor = 1.0 - derating * v_eff
    if factor <= 0.0:
        raise CircuitError(f"derating*|v| = {derating * v_eff} >= 1 (nonphysical)")
    return c0 * factor


def expand_dea_load(params: DeaLoadParams) -> Fragment:
    """Actuator load fragment: R_s in series with [C parallel R_p]."""
    comps: List[Component] = [
        Resistor(name="R_rs", pos="+", neg="m", resistance=params.series_resistance),
        Capacitor(name="C_c", pos="m", neg="-", capacitance=params.capacitance),
    ]
    if params.parallel_resistance is not None:
        comps.append(Resistor(name="R_rp", pos="m", neg="-", resistance=params.parallel_resistance))
    return Fragment(components=tuple(comps))


def series_rc_load(resistance: float, capacitance: float) -> Fragment:
    """Series-RC mimic load (the bench stand-in for an actuator)."""
    return expand_dea_load(
        DeaLoadParams(
            capacitance=capacitance,
            series_resistance=resistance,
            parallel_resistance=None,
        )
    )


def ceramic_load(
    c0: float,
    series_resistance: float = 100e3,
    derating: float = 2e-4,
    rated_voltage: float = 2000.0,
    bias_voltage: float = 0.0,
) -> Fragment:
    """Series-RC load built from a ceramic capacitor with HV derating.

    The derating coefficient (2e-4 per volt, clamped at the 2 kV rating) is a
    calibration default; simulation uses the derated value at ``bias_voltage``.
    """
    comps = (
        Resistor(name="R_rs", pos="+", neg="m", resistance=series_resistance),
        Capacitor(
            name="C_c",
            pos="m",
            neg="-",
            capacitance=c0,
            derating=derating,
            rated_voltage=rated_voltage,
            bias_voltage=bias_voltage,
        ),
    )
    return Fragment(components=comps)


def probe_fragment(input_resistance: float = 100e6, input_capacitance: float = 5.5e-12) -> Fragment:
    return Fragment(
        components=(
            Probe(name="X", pos="+", neg="-", input_resistance=input_resistance,
                  input_capacitance=input_capacitance),
        )
    )
