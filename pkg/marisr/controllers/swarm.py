"""
SA-PSO search over MA positions.

A particle is a full placement of the K antennas (a K x 3 array). The search
maximizes a penalized fitness: the robust rate at the particle's positions,
with the beamformer and RIS phases frozen, minus a penalty for every pair of
antennas closer than the minimum spacing and one more if the frozen design
stops meeting the secondary QoS target there.

Attributes:
    SwarmResult: namedtuple describing the outcome of one sa_pso() call.
    logger: Logger instance scoped to the current module name.
"""

import logging
import math
import numpy as np
from collections import namedtuple
from scipy.spatial.distance import pdist
from marisr.controllers import BaseController
from marisr.models.rates import multi_pu_qos_met, multi_pu_robust_rate
from marisr.models.uncertainty import UncertaintyModel

SwarmResult = namedtuple('SwarmResult', [
    'positions', 'fitness', 'violations', 'trace', 'penalty', 'accepted_worse'])

logger = logging.getLogger(__name__)


class Violations(namedtuple('Violations', ['spacing', 'qos'], defaults=(0, 0))):
    """
    Penalized constraint violations at one placement.

    Attributes:
        spacing: Number of antenna pairs closer than the minimum spacing.
        qos: 1 if the frozen design misses the worst-case secondary QoS
            target at the placement, else 0.
    """

    __slots__ = ()

    @property
    def total(self):
        return self.spacing + self.qos


class Particle:
    """
    One candidate placement with its velocity, personal best and generator.
    """

    def __init__(self, *, position, velocity, fitness, generator):
        """
        Constructor.

        Args:
            position: Array of shape (K, 3).
            velocity: Array of shape (K, 3).
            fitness: Fitness at `position`; it also seeds the personal best.
            generator: numpy Generator owned by this particle.
        """
        self.position = np.array(position, dtype=float)
        self.velocity = np.array(velocity, dtype=float)
        self.fitness = fitness
        self.best_position = self.position.copy()
        self.best_fitness = fitness
        self.generator = generator

    def __repr__(self):
        return f'<Particle fitness={self.fitness:.6f} best={self.best_fitness:.6f}>'

    def remember(self):
        """
        Update the personal best with the current position if it is better.
        """
        if self.fitness > self.best_fitness:
            self.best_position = self.position.copy()
            self.best_fitness = self.fitness


class SwarmConfig(namedtuple('SwarmConfig', [
        'particles', 'iterations', 'inertia', 'c1', 'c2', 'penalty', 'initial_temperature',
        'velocity_fraction', 'annealing'])):
    """
    SA-PSO constants. With annealing False the search is plain PSO.
    """

    __slots__ = ()

    def __new__(cls, particles, iterations, inertia, c1, c2, penalty, initial_temperature=1.0,
                velocity_fraction=0.1, annealing=True):
        if particles < 1 or iterations < 1:
            raise ValueError('At least one particle and one iteration are required')
        if inertia <= 0 or c1 <= 0 or c2 <= 0:
            raise ValueError('Inertia and step factors must be positive')
        if penalty < 0 or initial_temperature < 0 or velocity_fraction < 0:
            raise ValueError('Penalty, temperature and velocity fraction must be nonnegative')

        return super().__new__(
            cls, int(particles), int(iterations), inertia, c1, c2, penalty, initial_temperature,
            velocity_fraction, bool(annealing))

    @classmethod
    def from_run_config(cls, config):
        """
        Build a SwarmConfig from a RunConfig; only 'proposed-sapso' anneals.
        """
        return cls(
            particles=config.swarm_particles,
            iterations=config.swarm_iterations,
            inertia=config.swarm_inertia,
            c1=config.swarm_c1,
            c2=config.swarm_c2,
            penalty=config.swarm_penalty,
            initial_temperature=config.swarm_initial_temperature,
            velocity_fraction=config.swarm_velocity_fraction,
            annealing=config.scheme == 'proposed-sapso')


def violation_set_size(positions, min_spacing):
    """
    Number of antenna pairs (k < o) closer than `min_spacing`.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    if positions.shape[0] < 2:
        return 0

    return int(np.count_nonzero(pdist(positions) < min_spacing))


def position_evaluator(design, *, channel_model, scenario, g_bs, g_u, min_spacing):
    """
    Build the (rate, violations) evaluator the swarm maximizes.

    The beamformer and RIS phases of `design` stay frozen. Channels and
    uncertainty radii are rebuilt at every evaluated placement.

    Args:
        design: Current Design instance.
        channel_model: ChannelModel able to rebuild every PU's channels.
        scenario: ScenarioConfig instance.
        g_bs: Cascaded uncertainty ratio.
        g_u: Direct uncertainty ratio.
        min_spacing: Minimum pairwise antenna distance.

    Returns:
        Callable positions -> (robust rate, Violations).
    """
    def evaluate(positions):
        channels = channel_model.build(positions)
        uncertainties = [UncertaintyModel.from_channels(ch, g_bs=g_bs, g_u=g_u) for ch in channels]
        candidate = design._replace(positions=np.asarray(positions, dtype=float))

        violations = Violations(
            spacing=violation_set_size(positions, min_spacing),
            qos=int(not multi_pu_qos_met(channels, candidate, uncertainties, scenario)))

        return multi_pu_robust_rate(channels, candidate, uncertainties, scenario), violations

    return evaluate


def fitness(design, positions, *, channel_model, scenario, g_bs, g_u, min_spacing, penalty):
    """
    Robust rate at `positions` minus `penalty` per violation.
    """
    evaluate = position_evaluator(
        design, channel_model=channel_model, scenario=scenario, g_bs=g_bs, g_u=g_u,
        min_spacing=min_spacing)
    rate, violations = evaluate(positions)

    return rate - penalty * violations.total


def update_velocity_position(particle, global_best, *, config, region, generator):
    """
    One velocity and position update, clamped to the movement region.

    v <- w v + c1 r2 (personal best - p) + c2 r3 (global best - p), then
    p <- p + v. The velocity is kept within one region side per axis.

    Args:
        particle: Particle instance, updated in place.
        global_best: Array of shape (K, 3).
        config: SwarmConfig instance.
        region: MovementRegion instance.
        generator: Source of the scalar draws r2 and r3.

    Returns:
        The same particle.
    """
    r2, r3 = generator.uniform(size=2)
    sides = region.side_lengths

    velocity = (
        config.inertia * particle.velocity
        + config.c1 * r2 * (particle.best_position - particle.position)
        + config.c2 * r3 * (np.asarray(global_best) - particle.position))
    particle.velocity = np.clip(velocity, -sides, sides)
    particle.position = region.clamp(particle.position + particle.velocity)

    return particle


def temperature_step(temperature, iteration, iterations):
    """
    Linear cooling: T' = (Q - q) / Q * T.
    """
    return (iterations - iteration) / iterations * temperature


def sa_accept(incumbent, candidate, temperature, generator):
    """
    Metropolis acceptance of `candidate` against `incumbent` (fitness values).

    Better or equal candidates are always accepted. Worse ones are accepted
    with probability exp((candidate - incumbent) / T); at T <= 0 they never are.
    """
    if candidate >= incumbent:
        return True
    if temperature <= 0:
        return False

    return bool(generator.uniform() < math.exp((candidate - incumbent) / temperature))


class SwarmController(BaseController):
    """
    Position optimization controller.

    Attributes:
        STAGE: Stage name used in errors and stage records.
        PENALTY_GROWTH: Factor applied to the penalty for the single retry.
    """

    STAGE = 'swarm'
    PENALTY_GROWTH = 2.0

    @classmethod
    def _search(cls, evaluate, initial_positions, *, region, config, penalty, generator):
        def score(positions):
            rate, violations = evaluate(positions)
            return rate - penalty * violations.total, violations

        annealer, *streams = generator.spawn(config.particles + 1)
        initial_positions = region.clamp(initial_positions)
        shape = initial_positions.shape
        sides = region.side_lengths

        particles = []
        for index, stream in enumerate(streams):
            if index == 0:
                position = initial_positions
            else:
                position = stream.uniform(region.lower, region.upper, size=shape)
            velocity = stream.uniform(-1, 1, size=shape) * config.velocity_fraction * sides
            particles.append(Particle(
                position=position, velocity=velocity, fitness=score(position)[0], generator=stream))

        leader = max(particles, key=lambda p: p.fitness)
        global_best, global_fitness = leader.position.copy(), leader.fitness
        best_position, best_fitness = global_best.copy(), global_fitness
        best_violations = score(best_position)[1]

        temperature = config.initial_temperature
        trace = [best_fitness]
        accepted_worse = 0

        for iteration in range(1, config.iterations + 1):
            violations = {}
            for index, particle in enumerate(particles):
                update_velocity_position(
                    particle, global_best, config=config, region=region, generator=particle.generator)
                particle.fitness, violations[index] = score(particle.position)
                particle.remember()

            ranked = sorted(range(len(particles)), key=lambda i: particles[i].fitness, reverse=True)
            candidate = particles[ranked[0]]

            if candidate.fitness >= global_fitness:
                global_best, global_fitness = candidate.position.copy(), candidate.fitness
            elif config.annealing and sa_accept(global_fitness, candidate.fitness, temperature, annealer):
                pick = particles[ranked[annealer.integers(0, max(1, len(ranked) // 2))]]
                global_best, global_fitness = pick.position.copy(), pick.fitness
                accepted_worse += 1
                logger.debug(
                    f'SA accepted a worse global best at iteration {iteration}: {global_fitness:.6f} '
                    f'(T={temperature:.4f})')

            if candidate.fitness > best_fitness:
                best_position, best_fitness = candidate.position.copy(), candidate.fitness
                best_violations = violations[ranked[0]]

            temperature = temperature_step(temperature, iteration, config.iterations)
            trace.append(best_fitness)

        logger.debug(
            f'Swarm finished {config.iterations} iterations: best fitness {best_fitness:.6f}, '
            f'{best_violations.spacing} spacing violation(s), QoS miss {best_violations.qos}, '
            f'{accepted_worse} SA acceptance(s)')

        return SwarmResult(
            positions=best_position, fitness=best_fitness, violations=best_violations, trace=trace,
            penalty=penalty, accepted_worse=accepted_worse)

    @classmethod
    def sa_pso(cls, evaluate, initial_positions, *, region, config, generator):
        """
        Search MA placements with SA-PSO (or plain PSO when config.annealing is False).

        Particle 0 starts at `initial_positions`, so the best-ever record starts
        at the incumbent. The global best that steers the swarm may move to a
        worse candidate under SA acceptance; the returned placement is always
        the best one ever evaluated.

        Args:
            evaluate: Callable positions -> (rate, Violations), see
                position_evaluator().
            initial_positions: Incumbent placement, shape (K, 3).
            region: MovementRegion instance.
            config: SwarmConfig instance.
            generator: numpy Generator; every particle and the annealer get
                their own child generator spawned from it.

        Returns:
            SwarmResult instance. Its trace holds the best-ever fitness after
            initialization and after every iteration.

        Raises:
            SpacingInfeasible: Spacing violations remained even after a retry
                with the penalty doubled.
            Infeasible: The spacing was met but the frozen design still missed
                the secondary QoS target after the retry.
        """
        initial_positions = np.asarray(initial_positions, dtype=float)
        if initial_positions.ndim != 2 or initial_positions.shape[1] != 3:
            raise cls.InvalidArgument(f'Positions must be (K, 3), got {initial_positions.shape}')

        penalty = config.penalty
        result = cls._search(
            evaluate, initial_positions, region=region, config=config, penalty=penalty, generator=generator)

        if result.violations.total:
            penalty *= cls.PENALTY_GROWTH
            logger.warning(
                f'Best placement has {result.violations.spacing} spacing violation(s) and QoS miss '
                f'{result.violations.qos}; retrying with penalty {penalty:g}')
            result = cls._search(
                evaluate, result.positions, region=region, config=config, penalty=penalty,
                generator=generator)

        if result.violations.spacing:
            raise cls.SpacingInfeasible(
                f'No placement without spacing violations found '
                f'({result.violations.spacing} remain at penalty {penalty:g})')
        if result.violations.qos:
            raise cls.Infeasible(stage=cls.STAGE, family='secondary-qos')

        return result
