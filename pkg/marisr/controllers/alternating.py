"""
Alternating optimization driver and a posteriori robustness verification.

Attributes:
    RunStreams: namedtuple of the four numpy Generators every run derives
        from its seed (channel draws, initial design, swarm, verification).
    ROBUSTNESS_SLACK: Largest amount a sampled rate may fall below the
        reported robust bound before verification fails.
    logger: Logger instance scoped to the current module name.
"""

import logging
import numpy as np
import time
from collections import namedtuple
from marisr.controllers import BaseController, relative_change
from marisr.controllers.passive import PassiveController
from marisr.controllers.swarm import SwarmConfig, SwarmController, position_evaluator
from marisr.controllers.transmit import TransmitController, matched_filter
from marisr.models.channel import generate_channel_model
from marisr.models.geometry import initial_grid_placement
from marisr.models.rates import (
    Design, multi_pu_robust_rate, multi_pu_secondary_snr, primary_rate, secondary_snr)
from marisr.models.run import RobustnessReport, RunResult, StageRecord
from marisr.models.uncertainty import (
    UncertaintyModel, adversarial_perturbations, sample_perturbation)
from marisr.utils import linear_to_db

RunStreams = namedtuple('RunStreams', ['channel', 'design', 'swarm', 'verify'])
ROBUSTNESS_SLACK = 1e-6

logger = logging.getLogger(__name__)


def run_streams(seed):
    """
    Spawn the independent generators of one run from its seed.
    """
    return RunStreams(*(np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)))


def uncertainty_models(channels, config):
    """
    One UncertaintyModel per PU, with radii derived from the estimated channels.
    """
    return [UncertaintyModel.from_channels(ch, g_bs=config.g_bs, g_u=config.g_u) for ch in channels]


def initial_phase_indices(channels, w, *, scenario, scheme, levels, generator):
    """
    Starting RIS phase indices.

    CSR (except the random-phase scheme) aligns every reflected term with the
    direct link of the first PU: θ_m = arg((Ĥ_bs w)_m) - arg(ĥ_u^H w), rounded
    to the nearest grid phase. Everything else draws uniform grid indices.
    """
    num_elements = channels[0].h_bs.shape[0]

    if scenario == 'psr' or scheme == 'random-psi':
        return generator.integers(0, levels, size=num_elements)

    cascade = channels[0].h_bs @ w
    theta = np.angle(cascade) - np.angle(np.vdot(channels[0].h_u, w))

    return np.mod(np.round(theta * levels / (2 * np.pi)), levels).astype(int)


class AlternatingController(BaseController):
    """
    Alternating optimization over beamformer, RIS phases and MA positions.
    """

    @classmethod
    def _stage(cls, stages, iteration, stage, started, trace, note=''):
        runtime = time.perf_counter() - started
        stages.append(StageRecord(
            iteration=iteration, stage=stage, trace=[float(v) for v in trace], runtime_s=runtime, note=note))
        logger.debug(f'AO iteration {iteration}: {stage} stage took {runtime:.2f}s')

    @classmethod
    def alternating_optimize(cls, config, *, client, seed, sweep_value=None):
        """
        Run one scheme on one channel realization.

        Every AO iteration runs transmit SCA, then passive SCA (skipped by
        'random-psi', whose phases are drawn once), then the position search
        (skipped by 'fpa'; plain PSO for 'proposed-pso'). The loop stops when
        the robust rate changes by less than config.ao_tolerance (relative)
        or after config.ao_max_iterations iterations.

        Args:
            config: RunConfig instance.
            client: ConicSolverClient instance.
            seed: Seed of the channel realization and every random draw.
            sweep_value: Sweep axis value, recorded on the result.

        Returns:
            RunResult instance. Its ao_trace holds the robust rate after each
            AO iteration.

        Raises:
            Infeasible: A subproblem was infeasible, or the position search
                could not keep the secondary QoS target; `iteration` is set.
            NoFeasibleGrid: No grid phases met the secondary QoS target.
            SpacingInfeasible: The position search kept violating the spacing
                constraint.
        """
        started = time.perf_counter()
        streams = run_streams(seed)
        scenario = config.scenario_config
        region = config.region

        channel_model = generate_channel_model(config, streams.channel)
        positions = initial_grid_placement(config.num_mas, region, config.min_spacing)
        channels = channel_model.build(positions)
        uncertainties = uncertainty_models(channels, config)

        w = matched_filter(channels[0].h_u, config.p_max)
        design = Design(
            w=w,
            phase_indices=initial_phase_indices(
                channels, w, scenario=config.scenario, scheme=config.scheme, levels=config.phase_levels,
                generator=streams.design),
            positions=positions,
            phase_levels=config.phase_levels)

        swarm_config = SwarmConfig.from_run_config(config)
        sca = {'p_max': config.p_max, 'tolerance': config.sca_tolerance,
               'max_iterations': config.sca_max_iterations}

        logger.info(
            f'Starting {config.scenario}/{config.scheme} run, seed {seed}, '
            f'K={config.num_mas}, M={config.num_ris_elements}, {config.num_pus} PU(s)')

        ao_trace = []
        stages = []
        converged = False

        for iteration in range(1, config.ao_max_iterations + 1):
            try:
                stage_started = time.perf_counter()
                design, state = TransmitController.optimize(
                    client=client, channels=channels, uncertainties=uncertainties, scenario=scenario,
                    design=design, **sca)
                cls._stage(stages, iteration, 'transmit', stage_started, state.trace)

                if config.scheme != 'random-psi':
                    stage_started = time.perf_counter()
                    design, selection, state = PassiveController.optimize(
                        client=client, channels=channels, uncertainties=uncertainties, scenario=scenario,
                        design=design, penalty=config.passive_binary_penalty, **sca)
                    cls._stage(
                        stages, iteration, 'passive', stage_started, state.trace,
                        note=f'binary gap {selection.binary_gap:.3e}')

                if config.scheme != 'fpa':
                    stage_started = time.perf_counter()
                    evaluate = position_evaluator(
                        design, channel_model=channel_model, scenario=scenario, g_bs=config.g_bs,
                        g_u=config.g_u, min_spacing=config.min_spacing)
                    swarm = SwarmController.sa_pso(
                        evaluate, design.positions, region=region, config=swarm_config,
                        generator=streams.swarm)
                    design = design._replace(positions=swarm.positions)
                    channels = channel_model.build(design.positions)
                    uncertainties = uncertainty_models(channels, config)
                    cls._stage(
                        stages, iteration, 'swarm', stage_started, swarm.trace,
                        note=f'{swarm.accepted_worse} SA acceptance(s), penalty {swarm.penalty:g}')
            except cls.Infeasible as exc:
                raise cls.Infeasible(stage=exc.stage, family=exc.family, iteration=iteration) from exc

            rate = multi_pu_robust_rate(channels, design, uncertainties, scenario)
            ao_trace.append(rate)
            logger.info(f'AO iteration {iteration}: robust rate {rate:.6f} bps/Hz')

            if len(ao_trace) > 1 and relative_change(rate, ao_trace[-2]) < config.ao_tolerance:
                converged = True
                break
        else:
            logger.warning(
                f'AO reached the iteration cap ({config.ao_max_iterations}) without converging')

        snr_db = linear_to_db(multi_pu_secondary_snr(channels, design, uncertainties, scenario))
        runtime = time.perf_counter() - started
        logger.info(
            f'Finished {config.scenario}/{config.scheme} run, seed {seed}: {ao_trace[-1]:.6f} bps/Hz '
            f'after {len(ao_trace)} AO iteration(s) in {runtime:.1f}s')

        return RunResult(
            config=config, seed=seed, ao_trace=ao_trace, design=design, stages=stages, runtime_s=runtime,
            converged=converged, secondary_snr_db=snr_db, sweep_value=sweep_value)

    @classmethod
    def run(cls, config, *, client, seed, sweep_value=None):
        """
        alternating_optimize(), retried once with relaxed QoS thresholds when
        config.retry_relaxed is set and the first attempt is infeasible.
        """
        try:
            return cls.alternating_optimize(config, client=client, seed=seed, sweep_value=sweep_value)
        except (cls.Infeasible, cls.NoFeasibleGrid) as exc:
            if not config.retry_relaxed:
                raise
            logger.warning(f'Seed {seed}: {exc}; retrying with relaxed QoS thresholds')

        result = cls.alternating_optimize(config.relaxed(), client=client, seed=seed, sweep_value=sweep_value)
        result.relaxed = True

        return result


def verify_robustness(result, n_samples=None, *, boundary_fraction=None):
    """
    Check a finished run against sampled and adversarial channel errors.

    The channel model is regenerated from the result's config and seed. Each
    sample draws one perturbation per PU; its rate is the weakest PU's
    primary rate and it violates QoS if any PU's secondary SNR falls below
    the threshold. The closed-form extremal perturbations of every PU are
    checked as well.

    Args:
        result: RunResult instance.
        n_samples: Number of random samples (defaults to config.verify_samples).
        boundary_fraction: Share of samples placed on the ball surfaces
            (defaults to config.verify_boundary_fraction).

    Returns:
        RobustnessReport instance.
    """
    config = result.config
    n_samples = config.verify_samples if n_samples is None else n_samples
    if boundary_fraction is None:
        boundary_fraction = config.verify_boundary_fraction

    streams = run_streams(result.seed)
    channel_model = generate_channel_model(config, streams.channel)
    design = result.design
    channels = channel_model.build(design.positions)
    uncertainties = uncertainty_models(channels, config)
    scenario = config.scenario_config

    bound = multi_pu_robust_rate(channels, design, uncertainties, scenario)
    threshold = scenario.gamma_pmin if scenario.scenario == 'psr' else scenario.gamma_cmin
    floor = threshold * (1 - 1e-6)

    def check(perturbations):
        rates = [primary_rate(ch, design, scenario, pt) for ch, pt in zip(channels, perturbations)]
        snrs = [secondary_snr(ch, design, scenario, pt) for ch, pt in zip(channels, perturbations)]
        return min(rates), any(snr < floor for snr in snrs)

    outcomes = []
    for _ in range(n_samples):
        outcomes.append(check([
            sample_perturbation(unc, streams.verify, boundary_fraction=boundary_fraction)
            for unc in uncertainties]))

    for index, (ch, unc) in enumerate(zip(channels, uncertainties)):
        for extremal in adversarial_perturbations(ch, design.psi, design.w, unc, scenario=scenario.scenario):
            perturbations = [u.zero() for u in uncertainties]
            perturbations[index] = extremal
            outcomes.append(check(perturbations))

    min_rate = min(rate for rate, _ in outcomes)
    violations = sum(1 for _, violated in outcomes if violated)
    passed = violations == 0 and min_rate >= bound - ROBUSTNESS_SLACK

    log = logger.info if passed else logger.warning
    log(
        f'Robustness check of seed {result.seed}: {len(outcomes)} samples, min rate {min_rate:.6f} '
        f'vs bound {bound:.6f}, {violations} violation(s)')

    return RobustnessReport(
        samples=len(outcomes), reported_bound=bound, min_sampled_rate=min_rate, violations=violations,
        passed=passed)
