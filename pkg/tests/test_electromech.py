"""Displacement model tests: static law, filter fidelity, and symmetry."""

import math

import numpy as np
import pytest

from hvsim.electromech import (
    ElectromechError,
    ElectromechParams,
    displacement_response,
    rise_time_10_90,
)
from hvsim.waveform import Waveform


def wave(samples, step):
    return Waveform(0.0, step, np.asarray(samples, dtype=float))


PARAMS = ElectromechParams()


class TestDisplacementResponse:
    def test_zero_in_zero_out(self):
        x = displacement_response(wave(np.zeros(5000), 1e-4), PARAMS)
        assert np.all(x.samples == 0.0)

    def test_static_gain_at_reference(self):
        t = np.arange(0, 0.3, 1e-4)
        x = displacement_response(wave(np.full(t.size, 1800.0), 1e-4), PARAMS)
        assert x.samples[-1] == pytest.approx(1.0, abs=1e-6)

    def test_sign_flip_invariance(self):
        rng = np.random.default_rng(5)
        v = rng.uniform(-2000, 2000, 4000)
        pos = displacement_response(wave(v, 1e-4), PARAMS)
        neg = displacement_response(wave(-v, 1e-4), PARAMS)
        assert np.array_equal(pos.samples, neg.samples)

    def test_static_response_monotone_in_magnitude(self):
        levels = [200.0, 600.0, 1200.0, 1800.0, 2400.0]
        finals = []
        for level in levels:
            t = np.arange(0, 0.3, 1e-4)
            x = displacement_response(wave(np.full(t.size, level), 1e-4), PARAMS)
            finals.append(x.samples[-1])
        assert all(a < b for a, b in zip(finals, finals[1:]))

    def test_fast_drive_attenuated_40db(self):
        # sine at 10x the natural frequency; the squared drive lands at 20x
        f = 10 * PARAMS.natural_frequency
        step = 1e-5
        t = np.arange(0, 0.5, step)
        v = 1800.0 * np.sin(2 * np.pi * f * t)
        x = displacement_response(wave(v, step), PARAMS)
        tail = x.samples[t.size // 2 :]
        ac = (tail.max() - tail.min()) / 2.0
        quasi_static_ac = 0.5  # AC amplitude of (v/vref)^2 for a full-scale sine
        assert 20 * math.log10(quasi_static_ac / ac) >= 40.0

    def test_step_response_matches_continuous(self):
        # discrete filter vs the exact underdamped second-order step response
        # at step = 1/(100 fn): within 1%
        fn, zeta = PARAMS.natural_frequency, PARAMS.damping_ratio
        step = 1.0 / (100.0 * fn)
        t = np.arange(0, 0.25, step)
        v = np.full(t.size, 1800.0)
        x = displacement_response(wave(v, step), PARAMS).samples
        wn = 2 * math.pi * fn
        wd = wn * math.sqrt(1 - zeta**2)
        exact = 1.0 - np.exp(-zeta * wn * t) * (
            np.cos(wd * t) + zeta / math.sqrt(1 - zeta**2) * np.sin(wd * t)
        )
        assert np.max(np.abs(x - exact)) < 0.01

    def test_coarse_step_rejected(self):
        too_coarse = 1.0 / (10.0 * PARAMS.natural_frequency)
        with pytest.raises(ElectromechError, match="too coarse"):
            displacement_response(wave(np.zeros(100), too_coarse), PARAMS)

    def test_parameter_validation(self):
        with pytest.raises(ElectromechError):
            ElectromechParams(damping_ratio=0.0)


class TestRiseTime:
    def test_exponential_rise_time(self):
        tau = 1e-3
        t = np.arange(0, 10 * tau, 1e-6)
        v = 1000.0 * (1 - np.exp(-t / tau))
        rt = rise_time_10_90(wave(v, 1e-6))
        assert rt == pytest.approx(tau * math.log(9.0), rel=0.01)

    def test_converter_charges_slower_at_6hz(self):
        # the supply comparison at 6 Hz: the converter's internal resistance
        # stretches the load's 10-90% voltage rise well past the bench value
        from hvsim.devices import ConverterParams, DeaLoadParams, expand_dea_load
        from hvsim.electromech import _fig8_scenario
        from hvsim.presets import bench_matched_to_converter
        from hvsim.runner import run_scenario

        conv = ConverterParams()
        bench = bench_matched_to_converter(conv, expand_dea_load(DeaLoadParams()))
        rt = {}
        for name, supply in (("converter", conv), ("bench", bench)):
            run = run_scenario(_fig8_scenario(supply, 6.0))
            v = run.voltage("load_m")
            rt[name] = rise_time_10_90(v.slice_time(v.stop - 1.0 / 6.0, v.stop))
        assert rt["converter"] > 2.0 * rt["bench"]
