import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rdars.channels import iid_channel_set
from rdars.model import ModeSelection, SystemDims, random_phases

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# (criterion, passed, detail) lines gathered by the acceptance module
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_instance(seed, n_r=4, m=2, n=8, a=2, g_scale=1.0, power=1.0):
    """iid unit-variance channels, random phases and a random ``a``-selection."""
    rng = np.random.default_rng(seed)
    dims = SystemDims(n_r, m, n, a)
    ch = iid_channel_set(dims, rng, power=power, g_scale=g_scale)
    theta = random_phases(n, rng)
    sel = ModeSelection.from_indices(n, sorted(rng.choice(n, size=a, replace=False).tolist()))
    return dims, ch, theta, sel


@pytest.fixture
def small_instance():
    return random_instance(0)
