"""
Field-response channel synthesis.

Attributes:
    PathResponse: namedtuple holding the diagonal complex gains of one link's
        path-response matrix, plus labels for its two ends.
    Link: namedtuple pairing a link's PathAngles with its PathResponse.
    ChannelSet: namedtuple with the channels seen by one PU:
        h_r: H_r^H, shape (M, K), PT to RIS.
        h_u: shape (K,), PT to PU; the channel row is h_u^H.
        h_s: shape (M,), RIS to PU; the channel row is h_s^H.
        h_bs: cascaded channel diag(h_s^H) H_r^H, shape (M, K).
    logger: Logger instance scoped to the current module name.
"""

import logging
import numpy as np
from collections import namedtuple
from marisr.models.geometry import (
    DimensionMismatch, PathAngles, field_response_matrix, pathloss_variance,
    ris_element_positions)
from marisr.utils import db_to_linear

PathResponse = namedtuple('PathResponse', ['gains', 'source', 'destination'])
Link = namedtuple('Link', ['angles', 'response'])
ChannelSet = namedtuple('ChannelSet', ['h_r', 'h_u', 'h_s', 'h_bs'])

logger = logging.getLogger(__name__)


def path_response_matrix(response):
    """
    Return the L x L diagonal path-response matrix of a PathResponse.
    """
    return np.diag(response.gains)


def _check_link(link, name):
    num_paths = len(link.response.gains)

    for field, angles in link.angles._asdict().items():
        if len(angles) != num_paths:
            raise DimensionMismatch(
                f'{name}: {field} has {len(angles)} paths but the response has {num_paths}')


def build_channels(ma_positions, *, wavelength, ris_elements, ris_link, direct_link, reflect_link):
    """
    Build every channel seen by one PU for a given MA placement.

    Only the phases depend on the MA positions; amplitudes and angles are held
    in the links and do not change when the antennas move.

    Args:
        ma_positions: Array of shape (K, 3), local to the movement region.
        wavelength: Carrier wavelength.
        ris_elements: Array of shape (M, 3), local to the RIS.
        ris_link: Link from the PT to the RIS.
        direct_link: Link from the PT to the PU.
        reflect_link: Link from the RIS to the PU.

    Returns:
        ChannelSet instance.

    Raises:
        DimensionMismatch: Path counts disagree with response matrices.
    """
    for name, link in (('ris', ris_link), ('direct', direct_link), ('reflect', reflect_link)):
        _check_link(link, name)

    origin = np.zeros((1, 3))

    g_r = field_response_matrix(
        ma_positions, ris_link.angles.transmit_elevation, ris_link.angles.transmit_azimuth, wavelength)
    f_r = field_response_matrix(
        ris_elements, ris_link.angles.receive_elevation, ris_link.angles.receive_azimuth, wavelength)
    h_r = f_r.conj().T @ path_response_matrix(ris_link.response) @ g_r

    g_u = field_response_matrix(
        ma_positions, direct_link.angles.transmit_elevation, direct_link.angles.transmit_azimuth, wavelength)
    f_u = field_response_matrix(
        origin, direct_link.angles.receive_elevation, direct_link.angles.receive_azimuth, wavelength)
    h_u_row = f_u.conj().T @ path_response_matrix(direct_link.response) @ g_u

    g_s = field_response_matrix(
        ris_elements, reflect_link.angles.transmit_elevation, reflect_link.angles.transmit_azimuth, wavelength)
    f_s = field_response_matrix(
        origin, reflect_link.angles.receive_elevation, reflect_link.angles.receive_azimuth, wavelength)
    h_s_row = f_s.conj().T @ path_response_matrix(reflect_link.response) @ g_s

    h_u = h_u_row[0].conj()
    h_s = h_s_row[0].conj()
    h_bs = h_s_row[0][:, np.newaxis] * h_r

    return ChannelSet(h_r=h_r, h_u=h_u, h_s=h_s, h_bs=h_bs)


class ChannelModel:
    """
    The fixed large-scale part of every link, able to rebuild channels.

    One PT-to-RIS link is shared by all PUs; each PU has its own direct and
    reflected links.
    """

    def __init__(self, *, wavelength, ris_elements, ris_link, pu_links):
        """
        Constructor.

        Args:
            wavelength: Carrier wavelength.
            ris_elements: Array of shape (M, 3) of local RIS element positions.
            ris_link: Link from the PT to the RIS.
            pu_links: List of (direct Link, reflect Link) pairs, one per PU.
        """
        self.wavelength = wavelength
        self.ris_elements = np.asarray(ris_elements, dtype=float)
        self.ris_link = ris_link
        self.pu_links = list(pu_links)

    @property
    def num_elements(self):
        return self.ris_elements.shape[0]

    @property
    def num_pus(self):
        return len(self.pu_links)

    def build(self, positions):
        """
        Rebuild every PU's ChannelSet at the given MA positions.

        Args:
            positions: Array of shape (K, 3).

        Returns:
            List of ChannelSet instances, one per PU.
        """
        return [
            build_channels(
                positions, wavelength=self.wavelength, ris_elements=self.ris_elements,
                ris_link=self.ris_link, direct_link=direct, reflect_link=reflect)
            for direct, reflect in self.pu_links]

    def __call__(self, positions):
        return self.build(positions)


def _draw_link(generator, *, num_paths, angle_shift, variance, source, destination):
    angles = PathAngles(*(
        generator.uniform(-np.pi / 2, np.pi / 2, size=num_paths) + angle_shift
        for _ in PathAngles._fields))
    gains = np.sqrt(variance / 2) * (
        generator.standard_normal(num_paths) + 1j * generator.standard_normal(num_paths))

    return Link(angles=angles, response=PathResponse(gains=gains, source=source, destination=destination))


def generate_channel_model(config, generator):
    """
    Draw angles and path gains for every link of a run.

    Draw order is fixed (PT-RIS link, then each PU's direct and reflected
    links in PU order), so adding a PU never changes the links of earlier ones.

    Args:
        config: RunConfig instance.
        generator: numpy Generator owned by the caller.

    Returns:
        ChannelModel instance.
    """
    center = np.asarray(config.region_center, dtype=float)
    ris = np.asarray(config.ris_position, dtype=float)
    reference_gain = db_to_linear(config.pathloss_reference_db)

    def variance(a, b):
        return pathloss_variance(
            np.linalg.norm(a - b), reference_gain, config.pathloss_exponent, config.num_paths)

    common = {'num_paths': config.num_paths, 'angle_shift': config.angle_shift}

    ris_link = _draw_link(
        generator, variance=variance(center, ris), source='pt', destination='ris', **common)

    pu_links = []
    for index, pu in enumerate(config.active_pu_positions):
        pu = np.asarray(pu, dtype=float)
        direct = _draw_link(
            generator, variance=variance(center, pu), source='pt', destination=f'pu{index}', **common)
        reflect = _draw_link(
            generator, variance=variance(ris, pu), source='ris', destination=f'pu{index}', **common)
        pu_links.append((direct, reflect))

    logger.debug(f'Generated channel model with {len(pu_links)} PU(s), {config.num_paths} paths per link')

    return ChannelModel(
        wavelength=config.wavelength,
        ris_elements=ris_element_positions(config.num_ris_elements, config.ris_element_spacing),
        ris_link=ris_link,
        pu_links=pu_links)
