"""Circuit data model: components, control signals, and the netlist graph.

A :class:`Circuit` is an immutable bag of components plus named square-wave
control signals.  Node references are string labels; ``"0"`` and ``"GND"``
both denote the ground reference.  Composite components (converter supply,
scope probe) are kept intact here and lowered to primitives by the engine.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple, Union

GROUND_LABELS = ("0", "GND")


class CircuitError(ValueError):
    """A circuit violates a structural invariant (bad value, floating node...)."""


def is_ground(label: str) -> bool:
    return label in GROUND_LABELS


@dataclass(frozen=True)
class ControlSignal:
    """Square-wave command: high for the first ``duty`` fraction of each period.

    ``phase`` shifts the waveform right by ``phase / (2*pi)`` periods.  A zero
    frequency yields a constant signal (the state at t=0 holds forever).
    """

    frequency: float
    duty: float = 0.5
    phase: float = 0.0
    shape: str = "square"

    def __post_init__(self) -> None:
        if self.frequency < 0:
            raise CircuitError(f"control frequency must be >= 0, got {self.frequency}")
        if not 0.0 < self.duty < 1.0:
            raise CircuitError(f"control duty must be in (0, 1), got {self.duty}")
        if self.shape != "square":
            raise CircuitError(f"unsupported control shape {self.shape!r}")

    @property
    def phase_periods(self) -> float:
        return (self.phase / (2.0 * math.pi)) % 1.0

    def state_at(self, t: float) -> bool:
        if self.frequency == 0.0:
            x = (-self.phase_periods) % 1.0
        else:
            x = (t * self.frequency - self.phase_periods) % 1.0
        return x < self.duty

    def edges(self, stop: float) -> List[Tuple[float, bool]]:
        """Commanded state changes in [0, stop], as (time, new_state)."""
        if self.frequency == 0.0:
            return []
        period = 1.0 / self.frequency
        out: List[Tuple[float, bool]] = []
        k = -1  # start one period early so a fall from a pre-zero rise is kept
        while True:
            rise = (k + self.phase_periods) * period
            fall = rise + self.duty * period
            if rise > stop:
                break
            for t, state in ((rise, True), (fall, False)):
                if 0.0 <= t <= stop:
                    out.append((t, state))
            k += 1
        out.sort(key=lambda e: e[0])
        return out


@dataclass(frozen=True)
class Resistor:
    name: str
    pos: str
    neg: str
    resistance: float

    def validate(self) -> None:
        if not self.resistance > 0:
            raise CircuitError(f"{self.name}: resistance must be > 0, got {self.resistance}")


@dataclass(frozen=True)
class Capacitor:
    """Linear capacitor with optional high-voltage derating.

    When ``derating`` is nonzero the capacitance used in simulation is the
    derated value at ``bias_voltage`` (clamped at ``rated_voltage``); the
    derating curve is evaluated once, keeping the element linear.
    ``initial_voltage`` is the pre-charge applied when a transient starts.
    """

    name: str
    pos: str
    neg: str
    capacitance: float
    initial_voltage: float = 0.0
    derating: float = 0.0
    rated_voltage: float = math.inf
    bias_voltage: float = 0.0

    def validate(self) -> None:
        if not self.capacitance > 0:
            raise CircuitError(f"{self.name}: capacitance must be > 0, got {self.capacitance}")
        if self.derating < 0:
            raise CircuitError(f"{self.name}: derating must be >= 0")
        self.effective_capacitance()

    def effective_capacitance(self) -> float:
        if self.derating == 0.0:
            return self.capacitance
        v = min(abs(self.bias_voltage), self.rated_voltage)
        factor = 1.0 - self.derating * v
        if factor <= 0.0:
            raise CircuitError(
                f"{self.name}: derating*|v| >= 1 at bias {self.bias_voltage} V (nonphysical)"
            )
        return self.capacitance * factor


@dataclass(frozen=True)
class Switch:
    """Voltage-controlled switch with the gate-driver delays folded in.

    The switch follows the named control signal (inverted when ``invert``),
    with rising commands delayed by ``turn_on_delay + delay_offset`` and
    falling commands by ``turn_off_delay + delay_offset``.
    """

    name: str
    pos: str
    neg: str
    control: str
    ron: float = 5.0
    roff: float = 1e9
    invert: bool = False
    turn_on_delay: float = 0.4e-3
    turn_off_delay: float = 0.1e-3
    delay_offset: float = 0.0

    def validate(self) -> None:
        if not self.ron > 0 or not self.roff > 0:
            raise CircuitError(f"{self.name}: switch resistances must be > 0")
        if not self.ron < self.roff:
            raise CircuitError(
                f"{self.name}: on-resistance {self.ron} must be below off-resistance {self.roff}"
            )
        if self.turn_on_delay < 0 or self.turn_off_delay < 0:
            raise CircuitError(f"{self.name}: driver delays must be >= 0")


@dataclass(frozen=True)
class VoltageSource:
    """Ideal voltage source, optionally slew-limited or gated by a control.

    With ``slew`` set, the EMF ramps from 0 toward the target at that rate
    (V/s).  With ``control`` set, the target is ``voltage`` while the control
    is high and 0 while low.
    """

    name: str
    pos: str
    neg: str
    voltage: float
    slew: Optional[float] = None
    control: Optional[str] = None

    def validate(self) -> None:
        if self.slew is not None and not self.slew > 0:
            raise CircuitError(f"{self.name}: slew limit must be > 0")


@dataclass(frozen=True)
class ConverterSource:
    """Behavioral DC-HVDC converter: EMF behind an internal resistor with a
    parallel output capacitor.  ``precharged`` starts the output capacitor at
    the open-circuit voltage (supply settled before the drive starts)."""

    name: str
    pos: str
    neg: str
    open_circuit_voltage: float = 4500.0
    internal_resistance: float = 3e6
    parallel_capacitance: float = 3e-9
    precharged: bool = True

    def validate(self) -> None:
        if not (
            self.open_circuit_voltage > 0
            and self.internal_resistance > 0
            and self.parallel_capacitance > 0
        ):
            raise CircuitError(f"{self.name}: converter parameters must be positive")


@dataclass(frozen=True)
class Probe:
    """Oscilloscope probe input: resistance in parallel with capacitance."""

    name: str
    pos: str
    neg: str
    input_resistance: float = 100e6
    input_capacitance: float = 5.5e-12

    def validate(self) -> None:
        if not self.input_resistance > 0 or not self.input_capacitance > 0:
            raise CircuitError(f"{self.name}: probe parameters must be positive")


Component = Union[Resistor, Capacitor, Switch, VoltageSource, ConverterSource, Probe]

#: component kinds that provide a DC conduction path between their terminals
_DC_CONDUCTING = (Resistor, Switch, VoltageSource, ConverterSource, Probe)


@dataclass(frozen=True)
class Circuit:
    """Immutable component graph plus named control signals."""

    components: Tuple[Component, ...]
    controls: Tuple[Tuple[str, ControlSignal], ...] = ()

    @staticmethod
    def build(components: Sequence[Component], controls: Optional[Dict[str, ControlSignal]] = None) -> "Circuit":
        circuit = Circuit(
            components=tuple(components),
            controls=tuple((controls or {}).items()),
        )
        circuit.validate()
        return circuit

    @property
    def control_map(self) -> Dict[str, ControlSignal]:
        return dict(self.controls)

    def node_labels(self) -> List[str]:
        """All non-ground node labels in first-appearance order."""
        seen: List[str] = []
        for comp in self.components:
            for label in (comp.pos, comp.neg):
                if not is_ground(label) and label not in seen:
                    seen.append(label)
        return seen

    def component(self, name: str) -> Component:
        for comp in self.components:
            if comp.name == name:
                return comp
        raise KeyError(name)

    def with_replaced(self, name: str, **changes) -> "Circuit":
        """Copy of the circuit with one component's fields replaced."""
        found = False
        comps = []
        for comp in self.components:
            if comp.name == name:
                comp = replace(comp, **changes)
                found = True
            comps.append(comp)
        if not found:
            raise KeyError(name)
        return Circuit(components=tuple(comps), controls=self.controls)

    def validate(self) -> None:
        names = set()
        for comp in self.components:
            if comp.name in names:
                raise CircuitError(f"duplicate component name {comp.name!r}")
            names.add(comp.name)
            comp.validate()

        controls = self.control_map
        for comp in self.components:
            ctrl = getattr(comp, "control", None)
            if ctrl is not None and ctrl not in controls:
                raise CircuitError(f"{comp.name}: undefined control {ctrl!r}")

        self._check_dc_connectivity()

    def _check_dc_connectivity(self) -> None:
        # union-find over DC-conducting edges; every node must reach ground
        parent: Dict[str, str] = {"0": "0"}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a: str, b: str) -> None:
            parent.setdefault(a, a)
            parent.setdefault(b, b)
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb

        def canon(label: str) -> str:
            return "0" if is_ground(label) else label

        for comp in self.components:
            a, b = canon(comp.pos), canon(comp.neg)
            parent.setdefault(a, a)
            parent.setdefault(b, b)
            if isinstance(comp, _DC_CONDUCTING):
                union(a, b)

        ground_root = find("0")
        for label in parent:
            if find(label) != ground_root:
                raise CircuitError(
                    f"node {label!r} has no DC path to ground (floating subcircuit)"
                )


def _canonical_records(circuit: Circuit) -> List[str]:
    lines = []
    for comp in circuit.components:
        fields_ = [type(comp).__name__]
        for key, value in sorted(vars(comp).items()):
            fields_.append(f"{key}={value!r}")
        lines.append(" ".join(fields_))
    for name, ctrl in circuit.controls:
        lines.append(
            f"ctrl {name} {ctrl.shape} f={ctrl.frequency!r} duty={ctrl.duty!r} phase={ctrl.phase!r}"
        )
    return lines


def stamp_checksum(circuit: Circuit) -> str:
    """Canonical digest of the circuit structure and values.

    Identical circuits hash identically; any change of topology, a component
    value, or a control parameter changes the digest.
    """
    payload = "\n".join(_canonical_records(circuit)).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
