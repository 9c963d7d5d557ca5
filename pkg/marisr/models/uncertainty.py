"""
Bounded CSI uncertainty: radii, perturbation sampling and worst cases.

The estimated channels are the ones in a ChannelSet. The true channels are
ĥ_u + Δh_u and Ĥ_bs + ΔH_bs with ‖Δh_u‖ ≤ ξ_u and ‖ΔH_bs‖_F ≤ ξ_bs. All of the
worst-case evaluators below are tight closed forms over those balls.

Attributes:
    Perturbation: namedtuple of (delta_h_bs, delta_h_u) with shapes (M, K) and
        (K,). The true direct channel row is (ĥ_u + Δh_u)^H.
    logger: Logger instance scoped to the current module name.
"""

import logging
import numpy as np
from collections import namedtuple

Perturbation = namedtuple('Perturbation', ['delta_h_bs', 'delta_h_u'])

logger = logging.getLogger(__name__)


class UncertaintyModel(namedtuple('UncertaintyModel', ['g_bs', 'g_u', 'xi_bs', 'xi_u', 'num_elements', 'num_mas'])):
    """
    Uncertainty ratios and the radii derived from them.
    """

    __slots__ = ()

    def __new__(cls, g_bs, g_u, xi_bs, xi_u, num_elements, num_mas):
        if not (0 <= g_bs < 1 and 0 <= g_u < 1):
            raise ValueError(f'Uncertainty ratios must lie in [0, 1), got {g_bs}, {g_u}')
        if xi_bs < 0 or xi_u < 0:
            raise ValueError('Uncertainty radii must be nonnegative')

        return super().__new__(cls, g_bs, g_u, float(xi_bs), float(xi_u), num_elements, num_mas)

    @classmethod
    def from_channels(cls, channels, *, g_bs, g_u):
        """
        Derive ξ_bs = g_bs‖Ĥ_bs‖_F and ξ_u = g_u‖ĥ_u‖ from a ChannelSet.
        """
        num_elements, num_mas = channels.h_bs.shape
        model = cls(
            g_bs=g_bs, g_u=g_u,
            xi_bs=g_bs * np.linalg.norm(channels.h_bs, 'fro'),
            xi_u=g_u * np.linalg.norm(channels.h_u),
            num_elements=num_elements, num_mas=num_mas)
        logger.debug(f'Uncertainty radii xi_bs={model.xi_bs:.3e}, xi_u={model.xi_u:.3e}')

        return model

    def zero(self):
        """
        The perturbation that leaves both channels at their estimates.
        """
        return Perturbation(
            delta_h_bs=np.zeros((self.num_elements, self.num_mas), dtype=complex),
            delta_h_u=np.zeros(self.num_mas, dtype=complex))


def _ball_sample(generator, radius, shape, *, boundary):
    direction = generator.standard_normal(shape) + 1j * generator.standard_normal(shape)
    norm = np.linalg.norm(direction)
    if radius == 0 or norm == 0:
        return np.zeros(shape, dtype=complex)

    # Uniform in the ball of real dimension 2n
    scale = radius if boundary else radius * generator.uniform() ** (1 / (2 * direction.size))

    return direction / norm * scale


def sample_perturbation(model, generator, *, boundary_fraction=0.5):
    """
    Draw one perturbation inside both uncertainty balls.

    Args:
        model: UncertaintyModel instance.
        generator: numpy Generator owned by the caller.
        boundary_fraction: Probability that the draw is placed on the spheres
            (where worst cases live) instead of uniformly inside the balls.

    Returns:
        Perturbation instance.
    """
    boundary = generator.uniform() < boundary_fraction

    return Perturbation(
        delta_h_bs=_ball_sample(
            generator, model.xi_bs, (model.num_elements, model.num_mas), boundary=boundary),
        delta_h_u=_ball_sample(generator, model.xi_u, (model.num_mas,), boundary=boundary))


def worst_case_direct_amplitude(h_u, w, xi_u, *, sense):
    """
    Extremum of |(ĥ_u + Δh_u)^H w| over ‖Δh_u‖ ≤ ξ_u.

    Args:
        h_u: Estimated direct channel, shape (K,).
        w: Transmit beamformer, shape (K,).
        xi_u: Radius of the direct ball.
        sense: 'min' or 'max'.

    Returns:
        |ĥ_u^H w| - ξ_u‖w‖ clamped at zero for 'min', |ĥ_u^H w| + ξ_u‖w‖ for 'max'.
    """
    nominal = abs(np.vdot(h_u, w))
    spread = xi_u * np.linalg.norm(w)

    return _extremum(nominal, spread, sense)


def worst_case_cascaded_amplitude(h_bs, psi, w, xi_bs, *, sense):
    """
    Extremum of |ψ^H (Ĥ_bs + ΔH_bs) w| over ‖ΔH_bs‖_F ≤ ξ_bs.

    The bound |ψ^H ΔH w| ≤ ‖ΔH‖_F‖ψ‖‖w‖ is attained by ΔH proportional to ψw^H.
    """
    nominal = abs(np.vdot(psi, h_bs @ w))
    spread = xi_bs * np.linalg.norm(psi) * np.linalg.norm(w)

    return _extremum(nominal, spread, sense)


def worst_case_combined_amplitude(h_u, h_bs, psi, w, xi_u, xi_bs, *, sign):
    """
    Minimum of |((ĥ_u + Δh_u)^H ± ψ^H (Ĥ_bs + ΔH_bs)) w| over both balls.

    Args:
        sign: +1 or -1, selecting the combining branch.

    Returns:
        max(|(ĥ_u^H ± ψ^H Ĥ_bs) w| - ξ_u‖w‖ - ξ_bs‖ψ‖‖w‖, 0).
    """
    if sign not in (1, -1):
        raise ValueError(f'sign must be +1 or -1, got {sign}')

    nominal = abs(np.vdot(h_u, w) + sign * np.vdot(psi, h_bs @ w))
    w_norm = np.linalg.norm(w)
    spread = xi_u * w_norm + xi_bs * np.linalg.norm(psi) * w_norm

    return _extremum(nominal, spread, 'min')


def _extremum(nominal, spread, sense):
    if sense == 'min':
        return max(nominal - spread, 0.0)
    if sense == 'max':
        return nominal + spread

    raise ValueError(f'sense must be "min" or "max", got {sense!r}')


def _phase(value):
    return value / abs(value) if abs(value) > 0 else 1.0


def _direct_extremal(h_u, w, xi_u, *, push):
    # push=-1 moves the amplitude toward zero, +1 away from it
    w_norm = np.linalg.norm(w)
    if w_norm == 0:
        return np.zeros_like(h_u, dtype=complex)

    nominal = np.vdot(h_u, w)
    radius = xi_u if push > 0 else min(xi_u, abs(nominal) / w_norm)

    # Δh^H w = push·radius·‖w‖·phase(nominal)
    return push * radius * np.conj(_phase(nominal)) * w / w_norm


def _cascaded_extremal(h_bs, psi, w, xi_bs, *, push, phase_ref=None, limit=None):
    w_norm, psi_norm = np.linalg.norm(w), np.linalg.norm(psi)
    if w_norm == 0 or psi_norm == 0:
        return np.zeros_like(h_bs, dtype=complex)

    nominal = np.vdot(psi, h_bs @ w) if phase_ref is None else phase_ref
    radius = xi_bs if limit is None else min(xi_bs, limit)

    # ψ^H ΔH w = push·radius·‖ψ‖‖w‖·phase(nominal)
    return push * radius * _phase(nominal) * np.outer(psi, w.conj()) / (psi_norm * w_norm)


def adversarial_perturbations(channels, psi, w, model, *, scenario):
    """
    Closed-form extremal perturbations for a design.

    For PSR the first entry attains the robust rate bound exactly (direct
    amplitude at its minimum, interference at its maximum) and the second
    attains the secondary SNR worst case. For CSR the two entries attain the
    per-branch minima of the combined amplitudes.

    Args:
        channels: ChannelSet instance.
        psi: Phase vector, shape (M,).
        w: Transmit beamformer, shape (K,).
        model: UncertaintyModel for `channels`.
        scenario: 'psr' or 'csr'.

    Returns:
        List of Perturbation instances.
    """
    h_u, h_bs = channels.h_u, channels.h_bs

    if scenario == 'psr':
        nominal_cascaded = abs(np.vdot(psi, h_bs @ w))
        spread = np.linalg.norm(psi) * np.linalg.norm(w)
        floor = nominal_cascaded / spread if spread > 0 else 0.0
        return [
            Perturbation(
                delta_h_bs=_cascaded_extremal(h_bs, psi, w, model.xi_bs, push=1),
                delta_h_u=_direct_extremal(h_u, w, model.xi_u, push=-1)),
            Perturbation(
                delta_h_bs=_cascaded_extremal(h_bs, psi, w, model.xi_bs, push=-1, limit=floor),
                delta_h_u=np.zeros_like(h_u, dtype=complex))]

    perturbations = []
    w_norm, psi_norm = np.linalg.norm(w), np.linalg.norm(psi)
    for sign in (1, -1):
        nominal = np.vdot(h_u, w) + sign * np.vdot(psi, h_bs @ w)
        spread = model.xi_u * w_norm + model.xi_bs * psi_norm * w_norm
        shrink = min(1.0, abs(nominal) / spread) if spread > 0 else 1.0

        delta_h_u = np.zeros_like(h_u, dtype=complex)
        if w_norm > 0:
            delta_h_u = -shrink * model.xi_u * np.conj(_phase(nominal)) * w / w_norm
        delta_h_bs = sign * _cascaded_extremal(
            h_bs, psi, w, shrink * model.xi_bs, push=-1, phase_ref=nominal)
        perturbations.append(Perturbation(delta_h_bs=delta_h_bs, delta_h_u=delta_h_u))

    return perturbations
