"""
Primary and secondary rate expressions for the PSR and CSR scenarios.

Every rate function accepts an optional Perturbation so the same formulas serve
nominal, sampled and adversarial evaluations. Thresholds are linear; dB only
appears at the configuration boundary.

Attributes:
    SCENARIOS: The recognized scenario tags.
"""

import numpy as np
from collections import namedtuple
from marisr.models.uncertainty import (
    worst_case_cascaded_amplitude, worst_case_combined_amplitude,
    worst_case_direct_amplitude)

SCENARIOS = ('psr', 'csr')


class ScenarioConfig(namedtuple('ScenarioConfig', [
        'scenario', 'noise_power', 'gamma_pmin', 'gamma_cmin', 'symbol_span'])):
    """
    Scenario tag, noise power, linear QoS thresholds and the CSR symbol span L.
    """

    __slots__ = ()

    def __new__(cls, scenario, noise_power, gamma_pmin, gamma_cmin, symbol_span=1):
        if scenario not in SCENARIOS:
            raise ValueError(f'Unknown scenario {scenario!r}')
        if noise_power <= 0:
            raise ValueError('Noise power must be positive')
        if gamma_pmin < 0 or gamma_cmin < 0:
            raise ValueError('SNR thresholds must be nonnegative')
        if symbol_span < 1:
            raise ValueError('Symbol span must be at least 1')

        return super().__new__(cls, scenario, noise_power, gamma_pmin, gamma_cmin, symbol_span)

    @property
    def secondary_threshold(self):
        """
        Threshold on |ψ^H H_bs w|²/σ² implied by the scenario's QoS constraint.
        """
        if self.scenario == 'psr':
            return self.gamma_pmin

        return self.gamma_cmin / self.symbol_span


class Design(namedtuple('Design', ['w', 'phase_indices', 'positions', 'phase_levels'])):
    """
    Transmit beamformer, RIS phase indices and MA positions.

    Attributes:
        w: Complex array of shape (K,).
        phase_indices: Integer array of shape (M,), each in [0, phase_levels).
        positions: Array of shape (K, 3).
        phase_levels: Size κ̄ of the discrete phase grid.
    """

    __slots__ = ()

    @property
    def psi(self):
        """
        Unit-modulus phase vector ψ_m = exp(j 2π i_m / κ̄).
        """
        return phase_grid(self.phase_levels)[np.asarray(self.phase_indices, dtype=int)]

    def to_dict(self):
        """
        JSON-ready representation.
        """
        return {
            'w_real': np.real(self.w).tolist(),
            'w_imag': np.imag(self.w).tolist(),
            'phase_indices': [int(i) for i in self.phase_indices],
            'positions': np.asarray(self.positions).tolist(),
            'phase_levels': int(self.phase_levels)}

    @classmethod
    def from_dict(cls, data):
        return cls(
            w=np.asarray(data['w_real']) + 1j * np.asarray(data['w_imag']),
            phase_indices=np.asarray(data['phase_indices'], dtype=int),
            positions=np.asarray(data['positions'], dtype=float),
            phase_levels=int(data['phase_levels']))


def phase_grid(levels):
    """
    The κ̄-point grid {exp(j 2π i / κ̄) : i = 0 .. κ̄-1}.
    """
    return np.exp(1j * 2 * np.pi * np.arange(levels) / levels)


def _perturbed(channels, perturbation):
    if perturbation is None:
        return channels.h_u, channels.h_bs

    return channels.h_u + perturbation.delta_h_u, channels.h_bs + perturbation.delta_h_bs


def _cascaded(channels, design, perturbation):
    _, h_bs = _perturbed(channels, perturbation)

    return np.vdot(design.psi, h_bs @ design.w)


def psr_primary_sinr(channels, design, scenario, perturbation=None):
    """
    SINR of the primary signal when the secondary signal is interference.
    """
    h_u, _ = _perturbed(channels, perturbation)
    signal = abs(np.vdot(h_u, design.w)) ** 2
    interference = abs(_cascaded(channels, design, perturbation)) ** 2

    return signal / (interference + scenario.noise_power)


def psr_robust_rate_lower_bound(channels, design, uncertainty, scenario):
    """
    log2(1 + min direct amplitude² / (max cascaded amplitude² + σ²)).
    """
    direct = worst_case_direct_amplitude(channels.h_u, design.w, uncertainty.xi_u, sense='min')
    cascaded = worst_case_cascaded_amplitude(
        channels.h_bs, design.psi, design.w, uncertainty.xi_bs, sense='max')

    return float(np.log2(1 + direct ** 2 / (cascaded ** 2 + scenario.noise_power)))


def psr_secondary_snr(channels, design, scenario, perturbation=None):
    """
    SNR of the secondary signal after successive interference cancellation.
    """
    return abs(_cascaded(channels, design, perturbation)) ** 2 / scenario.noise_power


def csr_rate(channels, design, scenario, perturbation=None):
    """
    Primary rate when the secondary signal acts as an extra multipath.

    The secondary symbol is ±1 with equal probability, so the rate is the mean
    of the two combining branches.
    """
    h_u, _ = _perturbed(channels, perturbation)
    direct = np.vdot(h_u, design.w)
    cascaded = _cascaded(channels, design, perturbation)
    sigma2 = scenario.noise_power

    return float(
        0.5 * np.log2(1 + abs(direct + cascaded) ** 2 / sigma2)
        + 0.5 * np.log2(1 + abs(direct - cascaded) ** 2 / sigma2))


def csr_robust_rate_lower_bound(channels, design, uncertainty, scenario):
    """
    csr_rate with each branch replaced by its worst-case combined amplitude.
    """
    sigma2 = scenario.noise_power
    branches = [
        worst_case_combined_amplitude(
            channels.h_u, channels.h_bs, design.psi, design.w, uncertainty.xi_u, uncertainty.xi_bs,
            sign=sign)
        for sign in (1, -1)]

    return float(sum(0.5 * np.log2(1 + amplitude ** 2 / sigma2) for amplitude in branches))


def csr_secondary_snr(channels, design, scenario, perturbation=None):
    """
    SNR of the secondary signal after maximum-ratio combining over L symbols.
    """
    return scenario.symbol_span * psr_secondary_snr(channels, design, scenario, perturbation)


def primary_rate(channels, design, scenario, perturbation=None):
    """
    Nominal (or perturbed) primary rate for the scenario in `scenario`.
    """
    if scenario.scenario == 'psr':
        return float(np.log2(1 + psr_primary_sinr(channels, design, scenario, perturbation)))

    return csr_rate(channels, design, scenario, perturbation)


def secondary_snr(channels, design, scenario, perturbation=None):
    """
    Nominal (or perturbed) secondary SNR for the scenario in `scenario`.
    """
    if scenario.scenario == 'psr':
        return psr_secondary_snr(channels, design, scenario, perturbation)

    return csr_secondary_snr(channels, design, scenario, perturbation)


def robust_rate(channels, design, uncertainty, scenario):
    """
    Robust lower-bound primary rate for the scenario in `scenario`.
    """
    if scenario.scenario == 'psr':
        return psr_robust_rate_lower_bound(channels, design, uncertainty, scenario)

    return csr_robust_rate_lower_bound(channels, design, uncertainty, scenario)


def worst_case_secondary_snr(channels, design, uncertainty, scenario):
    """
    Smallest secondary SNR over the cascaded uncertainty ball.
    """
    amplitude = worst_case_cascaded_amplitude(
        channels.h_bs, design.psi, design.w, uncertainty.xi_bs, sense='min')
    snr = amplitude ** 2 / scenario.noise_power

    if scenario.scenario == 'csr':
        snr *= scenario.symbol_span

    return snr


def secondary_qos_met(channels, design, uncertainty, scenario, *, rtol=1e-6):
    """
    Does the worst-case secondary SNR reach the scenario's QoS threshold?
    """
    threshold = scenario.gamma_pmin if scenario.scenario == 'psr' else scenario.gamma_cmin
    snr = worst_case_secondary_snr(channels, design, uncertainty, scenario)

    return snr >= threshold * (1 - rtol)


def multi_pu_objective(rates):
    """
    The common primary rate of several PUs is limited by the weakest one.
    """
    rates = list(rates)
    if not rates:
        raise ValueError('At least one PU rate is required')

    return min(rates)


def multi_pu_robust_rate(channels, design, uncertainties, scenario):
    """
    Weakest robust rate over several PUs' channel sets and uncertainty models.
    """
    return multi_pu_objective(
        robust_rate(ch, design, unc, scenario) for ch, unc in zip(channels, uncertainties))


def multi_pu_qos_met(channels, design, uncertainties, scenario):
    """
    Does every PU meet the worst-case secondary QoS target?
    """
    return all(
        secondary_qos_met(ch, design, unc, scenario) for ch, unc in zip(channels, uncertainties))


def multi_pu_secondary_snr(channels, design, uncertainties, scenario):
    """
    Smallest worst-case secondary SNR over several PUs.
    """
    return min(
        worst_case_secondary_snr(ch, design, unc, scenario) for ch, unc in zip(channels, uncertainties))
