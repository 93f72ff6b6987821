"""Circuit model tests: controls, component invariants, validation."""

import math

import pytest

from hvsim.circuit import (
    Capacitor,
    Circuit,
    CircuitError,
    ControlSignal,
    Resistor,
    Switch,
)


class TestControlSignal:
    def test_square_phase_zero(self):
        s = ControlSignal(frequency=100.0)
        assert s.state_at(0.0) is True
        assert s.state_at(5.1e-3) is False
        assert s.state_at(10.1e-3) is True

    def test_phase_pi_starts_low(self):
        s = ControlSignal(frequency=100.0, phase=math.pi)
        assert s.state_at(0.0) is False
        assert s.state_at(6e-3) is True

    def test_edges_alternate_and_match_states(self):
        s = ControlSignal(frequency=50.0, duty=0.3, phase=1.0)
        edges = s.edges(0.1)
        assert edges, "expected edges within five periods"
        for (t0, s0), (t1, s1) in zip(edges, edges[1:]):
            assert t0 < t1
            assert s0 != s1
        for t, state in edges:
            assert s.state_at(t + 1e-9) is state

    def test_zero_frequency_constant(self):
        s = ControlSignal(frequency=0.0)
        assert s.edges(10.0) == []
        assert s.state_at(0.0) is s.state_at(123.0)

    def test_duty_bounds(self):
        with pytest.raises(CircuitError):
            ControlSignal(frequency=1.0, duty=0.0)
        with pytest.raises(CircuitError):
            ControlSignal(frequency=1.0, duty=1.0)


class TestComponentInvariants:
    def test_resistor_positive(self):
        with pytest.raises(CircuitError):
            Circuit.build([Resistor("R1", "a", "0", 0.0)])

    def test_switch_on_below_off(self):
        with pytest.raises(CircuitError, match="below off"):
            Circuit.build(
                [Switch("S1", "a", "0", control="g", ron=10.0, roff=5.0)],
                {"g": ControlSignal(frequency=1.0)},
            )

    def test_undefined_control_rejected(self):
        with pytest.raises(CircuitError, match="undefined control"):
            Circuit.build([Switch("S1", "a", "0", control="g")])

    def test_duplicate_names_rejected(self):
        with pytest.raises(CircuitError, match="duplicate"):
            Circuit.build(
                [Resistor("R1", "a", "0", 1.0), Resistor("R1", "b", "0", 2.0)]
            )

    def test_derated_capacitor_effective_value(self):
        cap = Capacitor(
            "C1", "a", "0", 10e-9, derating=2e-4, rated_voltage=2000.0,
            bias_voltage=1800.0,
        )
        assert cap.effective_capacitance() == pytest.approx(6.4e-9)

    def test_ground_aliases_unify(self):
        c = Circuit.build(
            [Resistor("R1", "a", "GND", 1.0), Resistor("R2", "a", "0", 1.0)]
        )
        assert c.node_labels() == ["a"]
