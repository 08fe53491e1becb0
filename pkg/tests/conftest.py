import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bmidas.design import MixedFreqPanel
from bmidas.gibbs import Hyperparams, Schedule
from bmidas.rng import make_rng
from bmidas.simulate import DgpConfig, ModelSpec, fit_panel, generate_dataset

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"

# illustration scenario: seed fixed before any run, shared by every test using it
ILLUSTRATION_SEED = 0
ILLUSTRATION_CHAIN_STREAM = 7
ILLUSTRATION_SCHEDULE = Schedule(S=50_000, burn_in=10_000, thin=10)

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}

# wall-clock seconds of each illustration fit, filled by the fixture
ILLUSTRATION_RUNTIME: dict[str, float] = {}


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def illustration_data():
    ds = generate_dataset(DgpConfig.illustration(), make_rng(ILLUSTRATION_SEED))
    T = DgpConfig.illustration().T
    full = ds.panel
    panel = MixedFreqPanel(y=full.y[:T], x=full.x, m=full.m, C=full.C, h=0.0, head=full.head)
    return ds, panel


@pytest.fixture(scope="session")
def illustration_fits(illustration_data):
    """AGL and AGL-SS fits with the full penalty path recorded."""
    _, panel = illustration_data
    fits = {}
    for model in ("agl", "agl_ss"):
        rng = make_rng(ILLUSTRATION_SEED, ILLUSTRATION_CHAIN_STREAM)
        start = time.perf_counter()
        fits[model] = fit_panel(panel, ModelSpec(model=model, p=3, r=2), Hyperparams(),
                                ILLUSTRATION_SCHEDULE, rng, trace_every=1)
        ILLUSTRATION_RUNTIME[model] = time.perf_counter() - start
    return fits


def omega_dispersion_ratio(omega_trace: np.ndarray) -> np.ndarray:
    """Per-group std over the last 10% of iterations divided by the std over the first 10%."""
    n = omega_trace.shape[0] // 10
    return omega_trace[-n:].std(axis=0) / omega_trace[:n].std(axis=0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
