"""
marisr test configuration file.

These values are used when the application is run via `marisr test`. It
inherits all values defined in base.py.
"""

TESTING = True

SEEDS = [7]
NUM_MAS = 2
NUM_RIS_ELEMENTS = 2
NUM_PATHS = 3
SWARM_PARTICLES = 6
SWARM_ITERATIONS = 5
SCA_MAX_ITERATIONS = 4
AO_MAX_ITERATIONS = 2
VERIFY_SAMPLES = 100

THIS_IS_A_TEST_FIXTURE = 'PASSED'
