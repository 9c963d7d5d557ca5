"""
Useful utilities and other odds-and-ends.

Attributes:
    FLATTEN_SEPARATOR: The character(s) to insert between key levels of a dict
        that has been run through flatten_dict().
"""

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

FLATTEN_SEPARATOR = '_'


class RunConfigFileError(ValueError):
    """
    Indicates a run configuration file could not be used.
    """
    pass


def flatten_dict(src_dict, *, _prefix=''):
    """
    Flatten a nested dict by joining key levels and upper-casing the result.

    Given a source dictionary:

        {
            'scenario': 'csr',
            'swarm': {'particles': 30, 'iterations': 40},
            'sweep': {'name': 'g_u', 'values': [0.03, 0.06]}
        }

    ...this generates a flattened copy:

        {
            'SCENARIO': 'csr',
            'SWARM_PARTICLES': 30,
            'SWARM_ITERATIONS': 40,
            'SWEEP_NAME': 'g_u',
            'SWEEP_VALUES': [0.03, 0.06]
        }

    The underscore could be any character (or characters) defined through the
    FLATTEN_SEPARATOR attribute. Lists are kept as-is; they are values, not
    key levels.

    Args:
        src_dict: The input dict to process.
        _prefix: Maintains the ancestor component(s) of the key during
            recursion. Not really intended for public use.

    Returns:
        New dict with the keyspace flattened.
    """
    dest_dict = {}

    for key, value in src_dict.items():
        if isinstance(value, dict):
            dest_dict.update(flatten_dict(value, _prefix=f'{_prefix}{key}{FLATTEN_SEPARATOR}'))
        else:
            dest_dict[f'{_prefix}{key}'.upper()] = value

    return dest_dict


def load_run_config(path, *, known_keys):
    """
    Read a TOML run configuration file into a flat, upper-cased mapping.

    Args:
        path: Filename of the TOML document.
        known_keys: Collection of every key the application understands. Any
            flattened key outside of it is treated as a typo.

    Returns:
        Dict suitable for passing to flask.Config.from_mapping().

    Raises:
        RunConfigFileError: The file could not be parsed or held unknown keys.
    """
    try:
        with open(path, 'rb') as fh:
            document = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise RunConfigFileError(f'Could not read run config {path}: {exc}') from exc

    mapping = flatten_dict(document)

    unknown = sorted(set(mapping) - set(known_keys))
    if unknown:
        raise RunConfigFileError(f'Unknown keys in {path}: {", ".join(unknown)}')

    return mapping


def db_to_linear(value_db):
    """
    Convert a power ratio in dB to a linear ratio.
    """
    return 10 ** (value_db / 10)


def linear_to_db(value):
    """
    Convert a linear power ratio to dB. Zero maps to negative infinity.
    """
    if value <= 0:
        return -math.inf

    return 10 * math.log10(value)


def dbm_to_watts(value_dbm):
    """
    Convert a power level in dBm to watts (38 dBm is roughly 6.3096 W).
    """
    return db_to_linear(value_dbm - 30)
