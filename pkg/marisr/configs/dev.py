"""
marisr development configuration file.

These values are used for quick desk runs (`MARISR_CONFIG=configs/dev.py`). It
inherits all values defined in base.py.
"""

import logging

APP_LOG_LEVEL = logging.DEBUG

SEEDS = [1, 2, 3]
OUTPUT_DIR = 'results-dev'
SWARM_PARTICLES = 30
SWARM_ITERATIONS = 30
VERIFY_SAMPLES = 200
