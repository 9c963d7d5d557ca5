"""
Tests for the transmit beamforming controller.
"""

import numpy as np
import pytest
from marisr.controllers import scale_links
from marisr.controllers.alternating import uncertainty_models
from marisr.controllers.transmit import TransmitController, matched_filter
from marisr.models.channel import generate_channel_model
from marisr.models.geometry import initial_grid_placement
from marisr.models.rates import Design, multi_pu_qos_met, multi_pu_robust_rate
from unittest.mock import Mock, patch


def _links(channels, uncertainties, run_config):
    return scale_links(channels, uncertainties, p_max=run_config.p_max, noise_power=run_config.noise_power)


def test_matched_filter():
    """
    Should spend the full budget along the channel, or spread it on a zero channel.
    """
    h = np.array([3.0, 4.0j])

    w = matched_filter(h, 4.0)
    np.testing.assert_allclose(w, 2.0 * h / 5.0)

    zero = matched_filter(np.zeros(4, dtype=complex), 4.0)
    assert np.linalg.norm(zero) == pytest.approx(2.0)


@pytest.mark.parametrize('scenario', ['psr', 'csr'])
def test_build_subproblem(channels, uncertainties, design, run_config, scenario):
    """
    Should build one block per constraint family with a power constraint.
    """
    links = _links(channels, uncertainties, run_config)
    w0 = design.w / np.sqrt(run_config.p_max)
    builder = getattr(TransmitController, f'build_{scenario}_transmit_subproblem')

    problem = builder(links=links, psi=design.psi, w0=w0, snr_target=1.0)

    expected = {'psr': {'power', 'secondary-qos', 'direct', 'cascaded'},
                'csr': {'power', 'secondary-qos', 'combined'}}
    assert set(problem.families) == expected[scenario]
    assert problem.sense == 'max'
    assert problem.variables['w'].shape == (run_config.num_mas,)

    with pytest.raises(TransmitController.InvalidArgument):
        builder(links=links, psi=design.psi[:1], w0=w0, snr_target=1.0)
    with pytest.raises(TransmitController.InvalidArgument):
        builder(links=[], psi=design.psi, w0=w0, snr_target=1.0)


@pytest.mark.parametrize('scenario_name', ['psr', 'csr'])
def test_sca_transmit(client, channels, uncertainties, design, run_config, psr_scenario, csr_scenario,
                      scenario_name):
    """
    Should return a feasible beamformer within budget and a nondecreasing rate trace.
    """
    scenario = psr_scenario if scenario_name == 'psr' else csr_scenario
    start = multi_pu_robust_rate(channels, design, uncertainties, scenario)

    result, state = TransmitController.optimize(
        client=client, channels=channels, uncertainties=uncertainties, scenario=scenario, design=design,
        p_max=run_config.p_max, tolerance=1e-3, max_iterations=4)

    assert np.linalg.norm(result.w) ** 2 <= run_config.p_max * (1 + 1e-6)
    assert multi_pu_qos_met(channels, result, uncertainties, scenario)
    assert state.trace[0] == pytest.approx(start)
    assert all(b >= a - 1e-9 for a, b in zip(state.trace, state.trace[1:]))
    assert state.trace[-1] == pytest.approx(multi_pu_robust_rate(channels, result, uncertainties, scenario))
    assert 1 <= state.iteration <= 4
    np.testing.assert_array_equal(result.phase_indices, design.phase_indices)


def test_sca_transmit_infeasible(client, channels, uncertainties, design, run_config, psr_scenario):
    """
    An unreachable secondary target should raise Infeasible from the transmit stage.
    """
    scenario = psr_scenario._replace(gamma_pmin=1e14)

    with pytest.raises(TransmitController.Infeasible) as excinfo:
        TransmitController.sca_transmit_psr(
            client=client, channels=channels, uncertainties=uncertainties, scenario=scenario, design=design,
            p_max=run_config.p_max, max_iterations=2)

    assert excinfo.value.stage == 'transmit'


def test_sca_transmit_solver_failure_keeps_incumbent(channels, uncertainties, design, run_config, psr_scenario):
    """
    A solver failure after a feasible start should stop the loop on the incumbent.
    """
    with patch.object(
            TransmitController, 'solve_stage', side_effect=TransmitController.SolverFailure('boom')):
        result, state = TransmitController.sca_transmit_psr(
            client=None, channels=channels, uncertainties=uncertainties, scenario=psr_scenario,
            design=design, p_max=run_config.p_max)

    np.testing.assert_array_equal(result.w, design.w)
    assert len(state.trace) == 1
    assert not state.converged


def test_optimize_dispatch(psr_scenario, csr_scenario):
    """
    Should pick the loop matching the scenario.
    """
    with patch.object(TransmitController, 'sca_transmit_psr') as psr, \
            patch.object(TransmitController, 'sca_transmit_csr') as csr:
        TransmitController.optimize(scenario=psr_scenario)
        TransmitController.optimize(scenario=csr_scenario)

    psr.assert_called_once_with(scenario=psr_scenario)
    csr.assert_called_once_with(scenario=csr_scenario)


def test_sca_transmit_infeasible_keeps_incumbent(channels, uncertainties, design, run_config, psr_scenario):
    """
    An infeasible subproblem after a feasible iterate should stop the loop on the incumbent.
    """
    side_effect = [
        Mock(values={'w': design.w / np.sqrt(run_config.p_max)}),
        TransmitController.Infeasible(stage='transmit', family='direct')]

    with patch.object(TransmitController, 'solve_stage', side_effect=side_effect) as solve_stage:
        result, state = TransmitController.sca_transmit_psr(
            client=None, channels=channels, uncertainties=uncertainties, scenario=psr_scenario,
            design=design, p_max=run_config.p_max, tolerance=0.0)

    assert solve_stage.call_count == 2
    np.testing.assert_allclose(result.w, design.w)
    assert len(state.trace) == 2
    assert state.iteration == 2
    assert not state.converged


def test_sca_transmit_infeasible_without_incumbent(channels, uncertainties, design, run_config, psr_scenario):
    """
    An infeasible subproblem should propagate while no iterate meets the secondary target.
    """
    scenario = psr_scenario._replace(gamma_pmin=1e14)
    error = TransmitController.Infeasible(stage='transmit', family='secondary-qos')

    with patch.object(TransmitController, 'solve_stage', side_effect=error):
        with pytest.raises(TransmitController.Infeasible) as excinfo:
            TransmitController.sca_transmit_psr(
                client=None, channels=channels, uncertainties=uncertainties, scenario=scenario,
                design=design, p_max=run_config.p_max)

    assert excinfo.value is error


@pytest.fixture
def single_ma(run_config):
    """
    Return (channels, uncertainties, positions) of a one-antenna placement.
    """
    config = run_config.replace(num_mas=1)
    positions = initial_grid_placement(1, config.region, config.min_spacing)
    channels = generate_channel_model(config, np.random.default_rng(5)).build(positions)

    return channels, uncertainty_models(channels, config), positions


def _no_qos(scenario):
    return scenario._replace(gamma_pmin=0.0, gamma_cmin=0.0)


@pytest.mark.parametrize('scenario_name', ['psr', 'csr'])
def test_sca_transmit_single_antenna_closed_form(client, single_ma, run_config, psr_scenario, csr_scenario,
                                                  scenario_name):
    """
    With one antenna the robust rate only grows with |w|, so SCA should reach the full-power value.
    """
    channels, uncertainties, positions = single_ma
    scenario = _no_qos(psr_scenario if scenario_name == 'psr' else csr_scenario)
    p_max, sigma2 = run_config.p_max, scenario.noise_power
    ch, unc = channels[0], uncertainties[0]
    psi = np.ones(run_config.num_ris_elements, dtype=complex)
    g = np.vdot(psi, ch.h_bs[:, 0])
    h = ch.h_u[0]
    spread = unc.xi_bs * np.linalg.norm(psi)

    if scenario_name == 'psr':
        closed_form = np.log2(
            1 + p_max * max(abs(h) - unc.xi_u, 0) ** 2 / (p_max * (abs(g) + spread) ** 2 + sigma2))
    else:
        closed_form = sum(
            0.5 * np.log2(1 + p_max * max(abs(np.conj(h) + sign * g) - unc.xi_u - spread, 0) ** 2 / sigma2)
            for sign in (1, -1))

    start = Design(
        w=np.array([0.8 * np.sqrt(p_max) * np.exp(0.7j)]), phase_indices=np.zeros(len(psi), dtype=int),
        positions=positions, phase_levels=run_config.phase_levels)
    start_rate = multi_pu_robust_rate(channels, start, uncertainties, scenario)

    result, _ = TransmitController.optimize(
        client=client, channels=channels, uncertainties=uncertainties, scenario=scenario, design=start,
        p_max=p_max, tolerance=1e-9, max_iterations=20)
    rate = multi_pu_robust_rate(channels, result, uncertainties, scenario)

    assert abs(result.w[0]) ** 2 <= p_max * (1 + 1e-6)
    assert rate >= start_rate - 1e-9
    assert rate <= closed_form * (1 + 1e-6) + 1e-9
    assert rate == pytest.approx(closed_form, rel=1e-3)


def test_sca_transmit_zero_radius_matches_mmse(client, channels, design, run_config, psr_scenario):
    """
    Without channel errors the PSR rate should approach the generalized Rayleigh quotient optimum.
    """
    uncertainties = uncertainty_models(channels, run_config.replace(g_bs=0.0, g_u=0.0))
    scenario = _no_qos(psr_scenario)
    p_max, sigma2 = run_config.p_max, scenario.noise_power
    h = channels[0].h_u
    g = channels[0].h_bs.conj().T @ design.psi

    covariance = sigma2 * np.eye(len(h)) + p_max * np.outer(g, g.conj())
    optimum = np.log2(1 + p_max * np.real(np.vdot(h, np.linalg.solve(covariance, h))))

    result, _ = TransmitController.optimize(
        client=client, channels=channels, uncertainties=uncertainties, scenario=scenario, design=design,
        p_max=p_max, tolerance=1e-9, max_iterations=30)
    rate = multi_pu_robust_rate(channels, result, uncertainties, scenario)

    assert rate <= optimum * (1 + 1e-6)
    assert rate >= optimum * (1 - 2e-2)


def test_sca_transmit_one_pu_unwrapped(client, channels, uncertainties, design, run_config, psr_scenario):
    """
    With one PU the result should match the bare single-PU surrogate bit for bit.
    """
    kwargs = dict(
        client=client, channels=channels[:1], uncertainties=uncertainties[:1], scenario=psr_scenario,
        design=design, p_max=run_config.p_max, max_iterations=3)

    wrapped, wrapped_state = TransmitController.sca_transmit_psr(**kwargs)
    with patch('marisr.controllers.transmit.multi_pu_wrap',
               side_effect=lambda problem, builder, links: builder(problem, 0, links[0])):
        bare, bare_state = TransmitController.sca_transmit_psr(**kwargs)

    np.testing.assert_array_equal(wrapped.w, bare.w)
    assert wrapped_state.trace == bare_state.trace


@pytest.mark.parametrize('scenario_name', ['psr', 'csr'])
def test_sca_transmit_two_pus_bounded_by_one(client, run_config, positions, psr_scenario, csr_scenario,
                                             scenario_name):
    """
    Serving a second PU should never beat the optimum for the first PU alone.
    """
    config = run_config.replace(num_pus=2)
    channels = generate_channel_model(config, np.random.default_rng(1234)).build(positions)
    uncertainties = uncertainty_models(channels, config)
    scenario = _no_qos(psr_scenario if scenario_name == 'psr' else csr_scenario)
    design = Design(
        w=matched_filter(channels[0].h_u, config.p_max),
        phase_indices=np.zeros(config.num_ris_elements, dtype=int), positions=positions,
        phase_levels=config.phase_levels)
    kwargs = dict(client=client, scenario=scenario, design=design, p_max=config.p_max, max_iterations=10)

    single, _ = TransmitController.optimize(channels=channels[:1], uncertainties=uncertainties[:1], **kwargs)
    both, _ = TransmitController.optimize(channels=channels, uncertainties=uncertainties, **kwargs)

    single_rate = multi_pu_robust_rate(channels[:1], single, uncertainties[:1], scenario)
    both_rate = multi_pu_robust_rate(channels, both, uncertainties, scenario)

    assert len(channels) == 2
    assert both_rate <= single_rate * (1 + 1e-6)
    assert both_rate <= multi_pu_robust_rate(channels[:1], both, uncertainties[:1], scenario) + 1e-12


def test_csr_minus_branch_is_plus_branch_with_flipped_phases(channels, uncertainties, design, run_config,
                                                             generator):
    """
    The minus combining branch for psi should equal the plus branch for -psi.
    """
    links = _links(channels, uncertainties, run_config)
    w0 = design.w / np.sqrt(run_config.p_max)
    original = TransmitController.build_csr_transmit_subproblem(
        links=links, psi=design.psi, w0=w0, snr_target=1.0)
    flipped = TransmitController.build_csr_transmit_subproblem(
        links=links, psi=-design.psi, w0=w0, snr_target=1.0)

    def swap(name):
        return name.replace('plus', '@').replace('minus', 'plus').replace('@', 'minus')

    for name, var in original.variables.items():
        if var.is_complex():
            var.value = generator.standard_normal(var.shape) + 1j * generator.standard_normal(var.shape)
        else:
            var.value = generator.uniform(0.1, 1.0, size=var.shape)
        flipped.variables[swap(name)].value = var.value

    blocks = {block.name: block for block in flipped.lmis}
    for block in original.lmis:
        if block.family == 'combined':
            np.testing.assert_allclose(block.value, blocks[swap(block.name)].value, atol=1e-12)
