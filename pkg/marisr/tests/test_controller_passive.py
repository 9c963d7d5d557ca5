"""
Tests for the passive beamforming controller.
"""

import itertools
import numpy as np
import pytest
from marisr.controllers import scale_links
from marisr.controllers.passive import PassiveController, PhaseSelection, one_hot, recover_indices
from marisr.models.channel import generate_channel_model
from marisr.models.rates import Design, multi_pu_qos_met, multi_pu_robust_rate
from marisr.models.uncertainty import UncertaintyModel
from unittest.mock import Mock, patch


@pytest.fixture
def single_element(run_config, positions):
    """
    Return (channels, uncertainties, design) for a one-element RIS.
    """
    config = run_config.replace(num_ris_elements=1)
    channels = generate_channel_model(config, np.random.default_rng(99)).build(positions)
    uncertainties = [UncertaintyModel.from_channels(ch, g_bs=config.g_bs, g_u=config.g_u) for ch in channels]
    h_u = channels[0].h_u
    design = Design(
        w=np.sqrt(config.p_max) * h_u / np.linalg.norm(h_u), phase_indices=np.zeros(1, dtype=int),
        positions=positions, phase_levels=config.phase_levels)

    return channels, uncertainties, design


def test_one_hot_and_recover():
    """
    Should place one 1 per column and recover it, ties going to the lowest index.
    """
    selectors = one_hot([2, 0, 3], 4)

    assert selectors.shape == (4, 3)
    np.testing.assert_array_equal(selectors.sum(axis=0), 1)
    np.testing.assert_array_equal(recover_indices(selectors), [2, 0, 3])

    tied = np.array([[0.2, 0.5], [0.5, 0.5], [0.5, 0.0]])
    np.testing.assert_array_equal(recover_indices(tied), [1, 0])


def test_binary_gap():
    """
    Should report the largest distance from {0, 1}.
    """
    assert PhaseSelection(one_hot([1], 3), np.array([1])).binary_gap == 0.0
    assert PhaseSelection(np.array([[0.7], [0.3]]), np.array([0])).binary_gap == pytest.approx(0.3)
    assert PhaseSelection(np.zeros((0, 0)), np.array([])).binary_gap == 0.0


@pytest.mark.parametrize('scenario', ['psr', 'csr'])
def test_build_subproblem(channels, uncertainties, design, run_config, scenario):
    """
    Should add the selectors with their constraints and one block per family.
    """
    links = scale_links(channels, uncertainties, p_max=run_config.p_max, noise_power=run_config.noise_power)
    w = design.w / np.sqrt(run_config.p_max)
    selectors0 = one_hot(design.phase_indices, design.phase_levels)
    builder = getattr(PassiveController, f'build_{scenario}_passive_subproblem')

    problem = builder(links=links, w=w, selectors0=selectors0, snr_target=1.0, penalty=0.05)

    expected = {'psr': {'selection', 'secondary-qos', 'cascaded'},
                'csr': {'selection', 'secondary-qos', 'combined'}}
    assert set(problem.families) == expected[scenario]
    assert problem.variables['c'].shape == (design.phase_levels, run_config.num_ris_elements)

    with pytest.raises(PassiveController.InvalidArgument):
        builder(links=links, w=w[:1], selectors0=selectors0, snr_target=1.0, penalty=0.05)
    with pytest.raises(PassiveController.InvalidArgument):
        builder(links=links, w=w, selectors0=selectors0[:, :1], snr_target=1.0, penalty=0.05)


@pytest.mark.parametrize('scenario_name', ['psr', 'csr'])
def test_grid_search_single_element_is_exhaustive(single_element, psr_scenario, csr_scenario, scenario_name):
    """
    With one element the coordinate pass should match full enumeration.
    """
    channels, uncertainties, design = single_element
    scenario = psr_scenario if scenario_name == 'psr' else csr_scenario

    rates = [
        multi_pu_robust_rate(channels, design._replace(phase_indices=np.array([level])), uncertainties, scenario)
        for level in range(design.phase_levels)]

    best = PassiveController.grid_search(
        channels=channels, uncertainties=uncertainties, scenario=scenario, design=design)

    assert best.phase_indices[0] == int(np.argmax(rates))


def test_grid_search_small_enumeration(channels, uncertainties, design, psr_scenario):
    """
    The polished design should score no lower than where it started, with valid indices.
    """
    start = multi_pu_robust_rate(channels, design, uncertainties, psr_scenario)

    best = PassiveController.grid_search(
        channels=channels, uncertainties=uncertainties, scenario=psr_scenario, design=design)

    assert multi_pu_robust_rate(channels, best, uncertainties, psr_scenario) >= start
    assert np.all((best.phase_indices >= 0) & (best.phase_indices < design.phase_levels))

    every = max(
        multi_pu_robust_rate(channels, design._replace(phase_indices=np.array(combo)), uncertainties, psr_scenario)
        for combo in itertools.product(range(design.phase_levels), repeat=len(design.phase_indices)))
    assert multi_pu_robust_rate(channels, best, uncertainties, psr_scenario) <= every + 1e-12


def test_grid_search_no_feasible_grid(channels, uncertainties, design, psr_scenario):
    """
    Should raise when no grid phase meets the secondary target.
    """
    with pytest.raises(PassiveController.NoFeasibleGrid):
        PassiveController.grid_search(
            channels=channels, uncertainties=uncertainties, scenario=psr_scenario._replace(gamma_pmin=1e14),
            design=design)


@pytest.mark.parametrize('scenario_name', ['psr', 'csr'])
def test_sca_passive(client, channels, uncertainties, design, run_config, psr_scenario, csr_scenario,
                     scenario_name):
    """
    Should return grid-exact phases that meet QoS and never lower the robust rate.
    """
    scenario = psr_scenario if scenario_name == 'psr' else csr_scenario
    start = multi_pu_robust_rate(channels, design, uncertainties, scenario)

    result, selection, state = PassiveController.optimize(
        client=client, channels=channels, uncertainties=uncertainties, scenario=scenario, design=design,
        p_max=run_config.p_max, penalty=0.05, max_iterations=4)

    assert result.phase_indices.dtype.kind == 'i'
    assert np.all((result.phase_indices >= 0) & (result.phase_indices < design.phase_levels))
    np.testing.assert_array_equal(selection.indices, result.phase_indices)
    assert selection.selectors.shape == (design.phase_levels, run_config.num_ris_elements)
    assert np.all(selection.selectors >= 0) and np.all(selection.selectors <= 1)
    assert multi_pu_qos_met(channels, result, uncertainties, scenario)
    assert multi_pu_robust_rate(channels, result, uncertainties, scenario) >= start - 1e-9
    assert 1 <= state.iteration <= 4
    np.testing.assert_array_equal(result.w, design.w)


def test_sca_passive_keeps_incumbent(channels, uncertainties, design, run_config, psr_scenario):
    """
    A failed grid recovery should fall back to the feasible incumbent phases.
    """
    solution = Mock(objective=1.0, values={'c': one_hot(design.phase_indices, design.phase_levels)})

    with patch.object(PassiveController, 'solve_stage', return_value=solution), \
            patch.object(PassiveController, 'grid_search', side_effect=PassiveController.NoFeasibleGrid):
        result, selection, state = PassiveController.sca_passive_psr(
            client=None, channels=channels, uncertainties=uncertainties, scenario=psr_scenario, design=design,
            p_max=run_config.p_max)

    assert result is design
    assert state.trace == [1.0, 1.0]
    assert state.converged
    assert selection.binary_gap == 0.0


def test_sca_passive_raises_without_incumbent(channels, uncertainties, design, run_config, psr_scenario):
    """
    Should re-raise NoFeasibleGrid when the incumbent fails QoS too.
    """
    solution = Mock(objective=1.0, values={'c': one_hot(design.phase_indices, design.phase_levels)})
    scenario = psr_scenario._replace(gamma_pmin=1e14)

    with patch.object(PassiveController, 'solve_stage', return_value=solution), \
            pytest.raises(PassiveController.NoFeasibleGrid):
        PassiveController.sca_passive_psr(
            client=None, channels=channels, uncertainties=uncertainties, scenario=scenario, design=design,
            p_max=run_config.p_max)


def test_sca_passive_infeasible_keeps_incumbent(channels, uncertainties, design, run_config, psr_scenario):
    """
    An infeasible subproblem after a solved iterate should stop the loop and keep QoS.
    """
    solution = Mock(objective=1.0, values={'c': one_hot(design.phase_indices, design.phase_levels)})
    side_effect = [solution, PassiveController.Infeasible(stage='passive', family='combined')]
    start = multi_pu_robust_rate(channels, design, uncertainties, psr_scenario)

    with patch.object(PassiveController, 'solve_stage', side_effect=side_effect) as solve_stage:
        result, _, state = PassiveController.sca_passive_psr(
            client=None, channels=channels, uncertainties=uncertainties, scenario=psr_scenario, design=design,
            p_max=run_config.p_max, tolerance=0.0)

    assert solve_stage.call_count == 2
    assert state.trace == [1.0]
    assert state.iteration == 2
    assert not state.converged
    assert multi_pu_qos_met(channels, result, uncertainties, psr_scenario)
    assert multi_pu_robust_rate(channels, result, uncertainties, psr_scenario) >= start - 1e-9


def test_sca_passive_first_infeasible(channels, uncertainties, design, run_config, psr_scenario):
    """
    A first infeasible subproblem should keep a feasible incumbent and propagate otherwise.
    """
    error = PassiveController.Infeasible(stage='passive', family='secondary-qos')
    kwargs = dict(
        client=None, channels=channels, uncertainties=uncertainties, design=design, p_max=run_config.p_max)

    with patch.object(PassiveController, 'solve_stage', side_effect=error):
        result, _, state = PassiveController.sca_passive_psr(scenario=psr_scenario, **kwargs)

        with pytest.raises(PassiveController.Infeasible) as excinfo:
            PassiveController.sca_passive_psr(scenario=psr_scenario._replace(gamma_pmin=1e14), **kwargs)

    assert state.trace == []
    assert multi_pu_qos_met(channels, result, uncertainties, psr_scenario)
    assert excinfo.value is error


@pytest.mark.parametrize('scenario_name', ['psr', 'csr'])
def test_sca_passive_single_element_enumeration(client, single_element, run_config, psr_scenario, csr_scenario,
                                                scenario_name):
    """
    With one element the full passive stage should land on the best of all grid phases.
    """
    channels, uncertainties, design = single_element
    scenario = (psr_scenario if scenario_name == 'psr' else csr_scenario)._replace(gamma_pmin=0.0, gamma_cmin=0.0)

    rates = [
        multi_pu_robust_rate(channels, design._replace(phase_indices=np.array([level])), uncertainties, scenario)
        for level in range(design.phase_levels)]

    result, _, _ = PassiveController.optimize(
        client=client, channels=channels, uncertainties=uncertainties, scenario=scenario, design=design,
        p_max=run_config.p_max, max_iterations=4)

    assert result.phase_indices[0] == int(np.argmax(rates))
    assert multi_pu_robust_rate(channels, result, uncertainties, scenario) == pytest.approx(max(rates))
