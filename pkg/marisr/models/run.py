"""
Run configuration and run results.

Attributes:
    SCHEMES: The recognized optimization schemes.
    SWEEP_AXES: Mapping of sweep axis names to the RunConfig fields they set.
    StageRecord: namedtuple describing one stage of one AO iteration.
    RobustnessReport: namedtuple produced by robustness verification.
"""

import dataclasses
import json
import math
from collections import namedtuple
from marisr.models import StorageMixin
from marisr.models.geometry import MovementRegion
from marisr.models.rates import SCENARIOS, Design, ScenarioConfig
from marisr.utils import db_to_linear, dbm_to_watts

SCHEMES = ('proposed-sapso', 'proposed-pso', 'fpa', 'random-psi')
SWEEP_AXES = {
    'none': (),
    'p_max_dbm': ('p_max_dbm',),
    'g_u': ('g_u',),
    'g_bs': ('g_bs',),
    'num_mas': ('num_mas',),
    'num_pus': ('num_pus',),
    'gamma_db': ('gamma_pmin_db', 'gamma_cmin_db')}

StageRecord = namedtuple('StageRecord', ['iteration', 'stage', 'trace', 'runtime_s', 'note'])
RobustnessReport = namedtuple('RobustnessReport', [
    'samples', 'reported_bound', 'min_sampled_rate', 'violations', 'passed'])


class InvalidConfig(ValueError):
    """
    Indicates a configuration value that cannot be used.
    """
    pass


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    Everything one optimization run needs, in base units.

    Field names are the lower-cased configuration keys of marisr.configs.base.
    """

    scenario: str
    scheme: str
    seeds: tuple
    output_dir: str
    workers: int
    retry_relaxed: bool
    num_mas: int
    num_ris_elements: int
    wavelength: float
    region_side: float
    region_center: tuple
    ris_position: tuple
    ris_element_spacing: float
    pu_positions: tuple
    num_pus: int
    min_spacing: float
    num_paths: int
    pathloss_reference_db: float
    pathloss_exponent: float
    angle_shift: float
    p_max_dbm: float
    noise_power: float
    gamma_pmin_db: float
    gamma_cmin_db: float
    symbol_span: int
    g_bs: float
    g_u: float
    phase_levels: int
    swarm_particles: int
    swarm_iterations: int
    swarm_inertia: float
    swarm_c1: float
    swarm_c2: float
    swarm_penalty: float
    swarm_initial_temperature: float
    swarm_velocity_fraction: float
    sca_tolerance: float
    sca_max_iterations: int
    ao_tolerance: float
    ao_max_iterations: int
    passive_binary_penalty: float
    verify_samples: int
    verify_boundary_fraction: float
    sweep_name: str
    sweep_values: tuple

    def __post_init__(self):
        self.validate()

    @classmethod
    def keys(cls):
        """
        The upper-cased configuration keys this class reads.
        """
        return [field.name.upper() for field in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, mapping, **overrides):
        """
        Build a RunConfig from a flat configuration mapping (e.g. app.config).

        Args:
            mapping: Any mapping holding every key in RunConfig.keys().
            overrides: Field values that take precedence over `mapping`. None
                values are ignored, so unset CLI options can be passed through.

        Returns:
            New, validated RunConfig instance.

        Raises:
            InvalidConfig: A key is missing or a value is unusable.
        """
        values = {}
        for field in dataclasses.fields(cls):
            key = field.name.upper()
            if key not in mapping:
                raise InvalidConfig(f'Missing configuration key {key}')
            values[field.name] = _freeze(mapping[key])

        for name, value in overrides.items():
            if value is not None:
                values[name] = _freeze(value)

        try:
            return cls(**values)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc

    def to_mapping(self):
        """
        JSON-ready flat mapping with upper-cased keys.
        """
        return {
            field.name.upper(): _thaw(getattr(self, field.name))
            for field in dataclasses.fields(self)}

    def validate(self):
        """
        Check every field; raise InvalidConfig on the first problem found.
        """
        if self.scenario not in SCENARIOS:
            raise InvalidConfig(f'Unknown scenario {self.scenario!r}')
        if self.scheme not in SCHEMES:
            raise InvalidConfig(f'Unknown scheme {self.scheme!r}')
        if self.sweep_name not in SWEEP_AXES:
            raise InvalidConfig(f'Unknown sweep axis {self.sweep_name!r}')

        positive = (
            'num_mas', 'num_ris_elements', 'wavelength', 'num_paths', 'noise_power', 'symbol_span',
            'phase_levels', 'swarm_particles', 'swarm_iterations', 'swarm_inertia', 'swarm_c1',
            'swarm_c2', 'swarm_penalty', 'sca_tolerance', 'sca_max_iterations', 'ao_tolerance',
            'ao_max_iterations', 'workers', 'num_pus', 'pathloss_exponent')
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise InvalidConfig(f'{name} must be positive, got {value!r}')

        nonnegative = (
            'region_side', 'ris_element_spacing', 'min_spacing', 'swarm_initial_temperature',
            'swarm_velocity_fraction', 'passive_binary_penalty', 'verify_samples')
        for name in nonnegative:
            if getattr(self, name) < 0:
                raise InvalidConfig(f'{name} must be nonnegative')

        for name in ('g_bs', 'g_u'):
            if not 0 <= getattr(self, name) < 1:
                raise InvalidConfig(f'{name} must lie in [0, 1)')
        if not 0 <= self.verify_boundary_fraction <= 1:
            raise InvalidConfig('verify_boundary_fraction must lie in [0, 1]')
        if self.num_pus > len(self.pu_positions):
            raise InvalidConfig(f'num_pus={self.num_pus} but only {len(self.pu_positions)} PU positions given')
        for point in (self.region_center, self.ris_position, *self.pu_positions):
            if len(point) != 3:
                raise InvalidConfig(f'Positions need three coordinates, got {point!r}')
        if not self.seeds:
            raise InvalidConfig('At least one seed is required')

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_sweep_value(self, value):
        """
        Return a copy with the sweep axis set to `value`.
        """
        fields = SWEEP_AXES[self.sweep_name]
        integral = self.sweep_name in ('num_mas', 'num_pus')
        if integral and float(value) != int(value):
            raise InvalidConfig(f'{self.sweep_name} takes integer values, got {value!r}')

        cast = int(value) if integral else float(value)
        return self.replace(**{name: cast for name in fields})

    def relaxed(self, factor=0.5):
        """
        Return a copy with both QoS thresholds scaled by `factor` (linear).
        """
        shift = 10 * math.log10(factor)

        return self.replace(
            gamma_pmin_db=self.gamma_pmin_db + shift, gamma_cmin_db=self.gamma_cmin_db + shift)

    @property
    def p_max(self):
        """
        Transmit power budget in watts.
        """
        return dbm_to_watts(self.p_max_dbm)

    @property
    def region(self):
        return MovementRegion.centered(self.region_side)

    @property
    def active_pu_positions(self):
        return self.pu_positions[:self.num_pus]

    @property
    def scenario_config(self):
        return ScenarioConfig(
            scenario=self.scenario,
            noise_power=self.noise_power,
            gamma_pmin=db_to_linear(self.gamma_pmin_db),
            gamma_cmin=db_to_linear(self.gamma_cmin_db),
            symbol_span=self.symbol_span)


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)

    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]

    return value


class RunResult(StorageMixin):
    """
    Outcome of one alternating-optimization run.

    Attributes:
        config: RunConfig the run used (after any relaxation).
        seed: Seed the channel model and every generator were derived from.
        ao_trace: Robust rate after each AO iteration.
        design: Final Design instance.
        stages: List of StageRecord instances.
        runtime_s: Wall-clock seconds for the whole run.
        converged: False when the AO iteration cap was reached.
        secondary_snr_db: Worst-case secondary SNR of the final design (min over
            PUs), in dB.
        robustness: RobustnessReport, once verified.
        relaxed: True when the run was retried with relaxed QoS thresholds.
        sweep_value: The sweep axis value of this run, or None.
    """

    def __init__(self, *, config, seed, ao_trace, design, stages, runtime_s, converged,
                 secondary_snr_db, robustness=None, relaxed=False, sweep_value=None):
        self.config = config
        self.seed = seed
        self.ao_trace = list(ao_trace)
        self.design = design
        self.stages = list(stages)
        self.runtime_s = runtime_s
        self.converged = converged
        self.secondary_snr_db = secondary_snr_db
        self.robustness = robustness
        self.relaxed = relaxed
        self.sweep_value = sweep_value

    @property
    def rate(self):
        """
        Final robust lower-bound rate in bits/s/Hz.
        """
        return self.ao_trace[-1]

    @property
    def ao_iters(self):
        return len(self.ao_trace)

    @property
    def storage_name(self):
        value = 'na' if self.sweep_value is None else f'{self.sweep_value:g}'

        return f'{self.config.scenario}-{self.config.scheme}-{self.config.sweep_name}-{value}-{self.seed}'

    def to_dict(self):
        """
        JSON-ready representation.
        """
        return {
            'config': self.config.to_mapping(),
            'seed': self.seed,
            'sweep_value': self.sweep_value,
            'ao_trace': self.ao_trace,
            'design': self.design.to_dict(),
            'stages': [stage._asdict() for stage in self.stages],
            'runtime_s': self.runtime_s,
            'converged': self.converged,
            'secondary_snr_db': self.secondary_snr_db,
            'relaxed': self.relaxed,
            'robustness': None if self.robustness is None else self.robustness._asdict()}

    @classmethod
    def from_dict(cls, data):
        robustness = data.get('robustness')

        return cls(
            config=RunConfig.from_mapping(data['config']),
            seed=data['seed'],
            ao_trace=data['ao_trace'],
            design=Design.from_dict(data['design']),
            stages=[StageRecord(**stage) for stage in data['stages']],
            runtime_s=data['runtime_s'],
            converged=data['converged'],
            secondary_snr_db=data['secondary_snr_db'],
            robustness=None if robustness is None else RobustnessReport(**robustness),
            relaxed=data.get('relaxed', False),
            sweep_value=data.get('sweep_value'))

    @classmethod
    def load(cls, path):
        """
        Read a RunResult back from a JSON trace file.
        """
        with open(path, 'r') as fh:
            return cls.from_dict(json.load(fh))
