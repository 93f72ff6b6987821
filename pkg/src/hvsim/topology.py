"""Builders for the series-stack half-bridge and its variants.

The single-channel bridge exposes the measurement nodes ``A`` (supply rail),
``B`` (between the high-side devices), ``O`` (output midpoint), ``C`` (between
the low-side devices); the bottom of the stack is ground (point ``D``).
High-side switches follow the control signal directly, low-side switches
follow its complement, so the asymmetric driver delays give natural
break-before-make behavior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .circuit import (
    Capacitor,
    Circuit,
    CircuitError,
    Component,
    ControlSignal,
    Resistor,
    Switch,
)
from .devices import (
    BenchSupplyParams,
    ConverterParams,
    DriverSpec,
    Fragment,
    expand_bench_supply,
    expand_converter,
    probe_fragment,
)

SupplyParams = Union[BenchSupplyParams, ConverterParams]


@dataclass(frozen=True)
class StackParams:
    """Per-channel series-stack configuration.

    The per-device sequences run top to bottom: high side first, then low
    side.  The 900 MOhm / 100 MOhm default off-resistances model the leakage
    mismatch that skews static sharing (a 9:1 modeling choice, not a measured
    value); the 50 us driver offset on the second device of each side models
    driver mismatch during transitions.
    """

    devices_per_side: int = 2
    balancing_resistance: Optional[float] = 3.6e6
    snubber_capacitance: Optional[float] = None
    off_resistances: Sequence[float] = (900e6, 100e6, 900e6, 100e6)
    driver_offsets: Sequence[float] = (0.0, 50e-6, 0.0, 50e-6)
    on_resistance: float = 5.0
    driver: DriverSpec = field(default_factory=DriverSpec)

    def __post_init__(self) -> None:
        if self.devices_per_side < 1:
            raise CircuitError("devices per side must be >= 1")
        n_total = 2 * self.devices_per_side
        if len(self.off_resistances) != n_total:
            raise CircuitError(
                f"need {n_total} off-resistances, got {len(self.off_resistances)}"
            )
        if len(self.driver_offsets) != n_total:
            raise CircuitError(
                f"need {n_total} driver offsets, got {len(self.driver_offsets)}"
            )
        if self.balancing_resistance is not None and not self.balancing_resistance > 0:
            raise CircuitError("balancing resistance must be positive or None")
        if self.snubber_capacitance is not None and not self.snubber_capacitance > 0:
            raise CircuitError("snubber capacitance must be positive or None")


@dataclass(frozen=True)
class ChannelSpec:
    """One output channel of a multi-channel configuration."""

    control: ControlSignal
    load: Optional[Fragment]


def _side_nodes(top: str, bottom: str, count: int, mid_labels: Sequence[str]) -> List[str]:
    if count - 1 > len(mid_labels):
        extra = [f"{mid_labels[0]}{i}" for i in range(len(mid_labels), count - 1)]
        mid_labels = list(mid_labels) + extra
    return [top] + list(mid_labels[: count - 1]) + [bottom]


def _stack_side(
    params: StackParams,
    control_name: str,
    invert: bool,
    nodes: Sequence[str],
    base_index: int,
    prefix: str,
) -> List[Component]:
    comps: List[Component] = []
    for i in range(params.devices_per_side):
        di = base_index + i
        pos, neg = nodes[i], nodes[i + 1]
        comps.append(
            Switch(
                name=f"S{prefix}q{di + 1}",
                pos=pos,
                neg=neg,
                control=control_name,
                ron=params.on_resistance,
                roff=params.off_resistances[di],
                invert=invert,
                turn_on_delay=params.driver.turn_on_delay,
                turn_off_delay=params.driver.turn_off_delay,
                delay_offset=params.driver.delay_offset + params.driver_offsets[di],
            )
        )
        if params.balancing_resistance is not None:
            comps.append(
                Resistor(f"R{prefix}b{di + 1}", pos, neg, params.balancing_resistance)
            )
        if params.snubber_capacitance is not None:
            comps.append(
                Capacitor(f"C{prefix}sn{di + 1}", pos, neg, params.snubber_capacitance)
            )
    return comps


def build_half_bridge(
    supply: SupplyParams,
    stack: StackParams,
    load: Optional[Fragment],
    control: ControlSignal,
    probe_nodes: Sequence[str] = (),
    control_name: str = "g",
) -> Circuit:
    """Single-channel bridge with labeled nodes A, B, O, C (D is ground)."""
    comps: List[Component] = []
    if isinstance(supply, BenchSupplyParams):
        comps.extend(expand_bench_supply(supply).instantiate("A", "0", "sup"))
    else:
        comps.extend(expand_converter(supply).instantiate("A", "0", "sup"))

    high = _side_nodes("A", "O", stack.devices_per_side, ["B"])
    low = _side_nodes("O", "0", stack.devices_per_side, ["C"])
    comps.extend(_stack_side(stack, control_name, False, high, 0, ""))
    comps.extend(_stack_side(stack, control_name, True, low, stack.devices_per_side, ""))

    if load is not None:
        comps.extend(load.instantiate("O", "0", "load"))
    for node in probe_nodes:
        comps.extend(probe_fragment().instantiate(node, "0", f"scope{node}"))

    return Circuit.build(comps, {control_name: control})


def build_dual_channel(
    supply: ConverterParams,
    channels: Tuple[ChannelSpec, ChannelSpec],
    stack: Optional[StackParams] = None,
) -> Circuit:
    """Two bridges sharing one converter; per-channel nodes get 1/2 suffixes."""
    if stack is None:
        stack = StackParams(balancing_resistance=1.8e6)
    comps: List[Component] = []
    comps.extend(expand_converter(supply).instantiate("A", "0", "sup"))
    controls: Dict[str, ControlSignal] = {}
    for ch_i, channel in enumerate(channels, start=1):
        tag = str(ch_i)
        ctrl_name = f"g{tag}"
        controls[ctrl_name] = channel.control
        high = _side_nodes("A", f"O{tag}", stack.devices_per_side, [f"B{tag}"])
        low = _side_nodes(f"O{tag}", "0", stack.devices_per_side, [f"C{tag}"])
        comps.extend(_stack_side(stack, ctrl_name, False, high, 0, f"ch{tag}"))
        comps.extend(
            _stack_side(stack, ctrl_name, True, low, stack.devices_per_side, f"ch{tag}")
        )
        if channel.load is not None:
            comps.extend(channel.load.instantiate(f"O{tag}", "0", f"load{tag}"))
    return Circuit.build(comps, controls)
