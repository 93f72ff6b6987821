"""Shared fixtures: preset runs are expensive, so they are session-scoped."""

import pytest

from hvsim.presets import load_preset
from hvsim.runner import run_scenario


def par(*resistances):
    """Parallel resistance (test-side oracle helper)."""
    return 1.0 / sum(1.0 / r for r in resistances)


@pytest.fixture(scope="session")
def preset_runs():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = run_scenario(load_preset(name))
        return cache[name]

    return get
