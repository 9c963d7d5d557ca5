"""
Far-field geometry: positions, movement regions and field responses.

Every coordinate is in meters. Antenna positions are expressed in the local
frame of their node (the movement-region center for the PT, the reference point
for the RIS); large-scale distances use node reference positions only.

Attributes:
    Position3: namedtuple of Cartesian coordinates.
    PathAngles: namedtuple of per-path elevation/azimuth arrays, in radians, for
        both ends of a link.
    logger: Logger instance scoped to the current module name.
"""

import logging
import math
import numpy as np
from collections import namedtuple

Position3 = namedtuple('Position3', ['x', 'y', 'z'])
PathAngles = namedtuple('PathAngles', [
    'transmit_elevation', 'transmit_azimuth', 'receive_elevation', 'receive_azimuth'])

logger = logging.getLogger(__name__)


class GeometryError(ValueError):
    """
    Base exception class for any geometric input that cannot be used.
    """
    pass


class DimensionMismatch(GeometryError):
    """
    Indicates arrays whose shapes do not agree with each other.
    """
    pass


class MovementRegion(namedtuple('MovementRegion', ['x_min', 'x_max', 'y_min', 'y_max', 'z_min', 'z_max'])):
    """
    Axis-aligned box limiting where the MAs may be placed.
    """

    __slots__ = ()

    def __new__(cls, x_min, x_max, y_min, y_max, z_min, z_max):
        bounds = (x_min, x_max, y_min, y_max, z_min, z_max)
        if not all(math.isfinite(b) for b in bounds):
            raise GeometryError('Region bounds must be finite')
        if x_min > x_max or y_min > y_max or z_min > z_max:
            raise GeometryError(f'Region bounds are inverted: {bounds}')

        return super().__new__(cls, *(float(b) for b in bounds))

    @classmethod
    def centered(cls, side, *, height=0.0):
        """
        Build the square [-side/2, side/2] x [-side/2, side/2] at a fixed height.

        Args:
            side: Side length of the square.
            height: Fixed z coordinate of every MA.

        Returns:
            New MovementRegion instance.
        """
        if side < 0:
            raise GeometryError('Region side must be nonnegative')

        half = side / 2
        return cls(-half, half, -half, half, height, height)

    @property
    def lower(self):
        """
        Lower corner as a length-3 array.
        """
        return np.array([self.x_min, self.y_min, self.z_min])

    @property
    def upper(self):
        """
        Upper corner as a length-3 array.
        """
        return np.array([self.x_max, self.y_max, self.z_max])

    @property
    def side_lengths(self):
        """
        Extent of the region along x, y and z.
        """
        return self.upper - self.lower

    def contains(self, positions):
        """
        Are all of the (K, 3) `positions` inside the region?
        """
        positions = np.asarray(positions, dtype=float)

        return bool(np.all(positions >= self.lower) and np.all(positions <= self.upper))

    def clamp(self, positions):
        """
        Clamp every coordinate of `positions` to the region bounds.
        """
        return np.clip(np.asarray(positions, dtype=float), self.lower, self.upper)


def propagation_difference(p, elevation, azimuth):
    """
    Signal propagation difference of a point relative to its node origin.

    Args:
        p: Position3 (or any x, y, z triple).
        elevation: Elevation angle in radians. Arrays broadcast.
        azimuth: Azimuth angle in radians. Arrays broadcast.

    Returns:
        x cos(el) cos(az) + y cos(el) sin(az) + z sin(el), in meters.
    """
    x, y, z = p

    return (
        x * np.cos(elevation) * np.cos(azimuth)
        + y * np.cos(elevation) * np.sin(azimuth)
        + z * np.sin(elevation))


def field_response_matrix(positions, elevations, azimuths, wavelength):
    """
    Field-response matrix of several antennas over a common set of paths.

    Args:
        positions: Array of shape (N, 3) of local antenna coordinates.
        elevations: Per-path elevation angles, shape (L,).
        azimuths: Per-path azimuth angles, shape (L,).
        wavelength: Carrier wavelength.

    Returns:
        Complex array of shape (L, N); column n is the field-response vector of
        antenna n.
    """
    if wavelength <= 0:
        raise GeometryError('Wavelength must be positive')

    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    elevations = np.asarray(elevations, dtype=float)
    azimuths = np.asarray(azimuths, dtype=float)

    if positions.shape[1] != 3:
        raise DimensionMismatch(f'Positions must be (N, 3), got {positions.shape}')
    if elevations.shape != azimuths.shape:
        raise DimensionMismatch('Elevation and azimuth lists differ in length')

    directions = np.stack([
        np.cos(elevations) * np.cos(azimuths),
        np.cos(elevations) * np.sin(azimuths),
        np.sin(elevations)], axis=1)
    rho = directions @ positions.T

    return np.exp(1j * 2 * np.pi / wavelength * rho)


def field_response_vector(p, elevations, azimuths, wavelength):
    """
    Field-response vector of one antenna, one unit-modulus entry per path.
    """
    return field_response_matrix([tuple(p)], elevations, azimuths, wavelength)[:, 0]


def pathloss_variance(distance, reference_gain, exponent, num_paths):
    """
    Variance of each complex path gain on a link.

    Args:
        distance: Link distance between node reference positions.
        reference_gain: Linear path loss at the 1 m reference distance.
        exponent: Path-loss exponent.
        num_paths: Number of paths sharing the power.

    Returns:
        reference_gain * distance**(-exponent) / num_paths.

    Raises:
        GeometryError: The distance is not positive.
    """
    if distance <= 0:
        raise GeometryError(f'Distance must be positive, got {distance}')

    return reference_gain * distance ** (-exponent) / num_paths


def ris_element_positions(num_elements, spacing):
    """
    Local coordinates of a uniform linear RIS along x, centered on its origin.
    """
    offsets = (np.arange(num_elements) - (num_elements - 1) / 2) * spacing

    return np.column_stack([offsets, np.zeros(num_elements), np.zeros(num_elements)])


def initial_grid_placement(num_mas, region, min_spacing):
    """
    Deterministic placement of the MAs on a uniform grid over the region.

    The region is split into a near-square grid of cells and the antennas are
    put at cell centers, row by row. Both the MA and the fixed-position schemes
    start from this placement.

    Args:
        num_mas: Number of antennas K.
        region: MovementRegion instance.
        min_spacing: Minimum pairwise distance d_min.

    Returns:
        Array of shape (K, 3).

    Raises:
        GeometryError: The grid spacing would fall below `min_spacing`.
    """
    if num_mas < 1:
        raise GeometryError('At least one MA is required')

    columns = math.ceil(math.sqrt(num_mas))
    rows = math.ceil(num_mas / columns)
    width, depth, _ = region.side_lengths

    dx = width / columns
    dy = depth / rows
    if (columns > 1 and dx < min_spacing) or (rows > 1 and dy < min_spacing):
        raise GeometryError(
            f'Cannot place {num_mas} MAs {min_spacing} m apart in a '
            f'{width} x {depth} m region')

    positions = np.empty((num_mas, 3))
    for k in range(num_mas):
        row, column = divmod(k, columns)
        positions[k] = (
            region.x_min + (column + 0.5) * dx,
            region.y_min + (row + 0.5) * dy,
            region.z_min)

    logger.debug(f'Initial grid placement {rows}x{columns} for K={num_mas}')

    return positions
