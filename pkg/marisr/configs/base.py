"""
marisr base configuration file.

This file defines every configuration value that is of interest to the
application, set to the system-model defaults of the reference scenario. An
environment-specific file (named by `MARISR_CONFIG`) or a run configuration
file given with `--config` may override any of them; keys that do not appear
here are rejected by the run configuration loader.

Attributes:
    wavelength: Carrier wavelength in meters. Several geometric defaults are
        expressed as multiples of it.
"""

import logging
import math

wavelength = 0.1

"""
Used by multiple modules
"""
TESTING = False

"""
marisr app-specific
"""
APP_LOG_FORMATTER = logging.Formatter('[%(asctime)s] %(name)s %(levelname)s: %(message)s')
APP_LOG_LEVEL = logging.INFO

"""
Run selection
"""
SCENARIO = 'psr'
SCHEME = 'proposed-sapso'
SEEDS = list(range(1, 11))
OUTPUT_DIR = 'results'
WORKERS = 1
RETRY_RELAXED = False

"""
Geometry and propagation
"""
NUM_MAS = 4
NUM_RIS_ELEMENTS = 8
WAVELENGTH = wavelength
REGION_SIDE = 3 * wavelength
REGION_CENTER = [3.0, 0.0, 0.0]
RIS_POSITION = [0.0, 30.0, 40.0]
RIS_ELEMENT_SPACING = 0.5 * wavelength
PU_POSITIONS = [[0.0, 60.0, 0.0], [0.0, 80.0, 0.0]]
NUM_PUS = 1
MIN_SPACING = 0.5 * wavelength
NUM_PATHS = 9
PATHLOSS_REFERENCE_DB = -10.0
PATHLOSS_EXPONENT = 1.3
ANGLE_SHIFT = math.pi / 2

"""
Link budget and QoS
"""
P_MAX_DBM = 38.0
NOISE_POWER = 1e-12
GAMMA_PMIN_DB = 0.0
GAMMA_CMIN_DB = 0.0
SYMBOL_SPAN = 50
G_BS = 0.05
G_U = 0.1
PHASE_LEVELS = 8

"""
SA-PSO
"""
SWARM_PARTICLES = 150
SWARM_ITERATIONS = 150
SWARM_INERTIA = 1.2
SWARM_C1 = 1.4
SWARM_C2 = 1.4
SWARM_PENALTY = 50.0
SWARM_INITIAL_TEMPERATURE = 1.0
SWARM_VELOCITY_FRACTION = 0.1

"""
SCA and alternating optimization
"""
SCA_TOLERANCE = 1e-3
SCA_MAX_ITERATIONS = 30
AO_TOLERANCE = 1e-2
AO_MAX_ITERATIONS = 25
PASSIVE_BINARY_PENALTY = 0.05

"""
Conic solver
"""
CONIC_SOLVERS = ['CLARABEL', 'SCS']
CONIC_FEASIBILITY_TOL = 1e-6
CONIC_SOLVER_OPTIONS = {
    'CLARABEL': {'tol_feas': 1e-8, 'tol_gap_abs': 1e-8, 'tol_gap_rel': 1e-8, 'max_iter': 500},
    'SCS': {'eps_abs': 1e-7, 'eps_rel': 1e-7, 'max_iters': 200000}}

"""
Robustness verification
"""
VERIFY_SAMPLES = 1000
VERIFY_BOUNDARY_FRACTION = 0.5

"""
Sweeps
"""
SWEEP_NAME = 'none'
SWEEP_VALUES = []
