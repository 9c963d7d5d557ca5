"""
Test fixtures for pytest.

The test configuration shrinks every size (K=2, M=2, three paths per link) so
that conic subproblems solve in well under a second.
"""

import os

os.environ.setdefault('MARISR_CONFIG', 'configs/test.py')

import numpy as np  # noqa: E402
import pytest  # noqa: E402
from marisr import app as test_app  # noqa: E402
from marisr.controllers.alternating import uncertainty_models  # noqa: E402
from marisr.models.channel import generate_channel_model  # noqa: E402
from marisr.models.geometry import initial_grid_placement  # noqa: E402
from marisr.models.rates import Design, ScenarioConfig  # noqa: E402
from marisr.models.run import RunConfig  # noqa: E402


@pytest.fixture(scope='session')
def app():
    """
    Return the marisr Flask application.
    """
    return test_app


@pytest.fixture
def generator():
    """
    Return a freshly seeded numpy Generator.
    """
    return np.random.default_rng(20240611)


@pytest.fixture
def run_config(app):
    """
    Return the RunConfig built from the test configuration.
    """
    return RunConfig.from_mapping(app.config)


@pytest.fixture
def client(app):
    """
    Return the app's conic solver client, skipping if no solver is installed.
    """
    if not app.solver_client.available_solvers:  # pragma: nocover
        pytest.skip('No configured conic solver is installed')

    return app.solver_client


@pytest.fixture
def channel_model(run_config):
    """
    Return a small, seeded ChannelModel for one PU.
    """
    return generate_channel_model(run_config, np.random.default_rng(1234))


@pytest.fixture
def positions(run_config):
    """
    Return the initial grid placement of the test configuration.
    """
    return initial_grid_placement(run_config.num_mas, run_config.region, run_config.min_spacing)


@pytest.fixture
def channels(channel_model, positions):
    """
    Return the per-PU ChannelSet list at the initial placement.
    """
    return channel_model.build(positions)


@pytest.fixture
def uncertainties(channels, run_config):
    """
    Return the UncertaintyModel list matching `channels`.
    """
    return uncertainty_models(channels, run_config)


@pytest.fixture
def psr_scenario():
    """
    Return a PSR ScenarioConfig with a 0 dB secondary target.
    """
    return ScenarioConfig('psr', noise_power=1e-12, gamma_pmin=1.0, gamma_cmin=1.0, symbol_span=50)


@pytest.fixture
def csr_scenario():
    """
    Return a CSR ScenarioConfig with a 0 dB secondary target over 50 symbols.
    """
    return ScenarioConfig('csr', noise_power=1e-12, gamma_pmin=1.0, gamma_cmin=1.0, symbol_span=50)


@pytest.fixture
def design(channels, positions, run_config):
    """
    Return a Design with a full-power matched filter and all-zero phase indices.
    """
    h_u = channels[0].h_u
    w = np.sqrt(run_config.p_max) * h_u / np.linalg.norm(h_u)

    return Design(
        w=w,
        phase_indices=np.zeros(run_config.num_ris_elements, dtype=int),
        positions=positions,
        phase_levels=run_config.phase_levels)
