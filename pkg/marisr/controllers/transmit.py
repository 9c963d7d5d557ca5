"""
Transmit beamforming controller.

Both scenarios keep the RIS phases fixed and optimize w by SCA. Every
subproblem is built in normalized units (see scale_links()); the loops report
and compare designs with the closed-form robust rates in physical units.

Attributes:
    logger: Logger instance scoped to the current module name.
"""

import cvxpy as cp
import logging
import numpy as np
from marisr.conic import (
    Ball, ConicProblem, scalar_block, s_procedure_lmi, sign_definiteness_lmi,
    tangent_quadratic_form)
from marisr.controllers import (
    BaseController, ScaState, cascade_selector, log2, multi_pu_wrap, relative_change,
    scale_links)
from marisr.models.rates import multi_pu_qos_met, multi_pu_robust_rate

logger = logging.getLogger(__name__)


def matched_filter(h_u, p_max):
    """
    Beamformer maximizing |h_u^H w| under ||w||^2 <= p_max.
    """
    norm = np.linalg.norm(h_u)
    if norm == 0:
        return np.full(len(h_u), np.sqrt(p_max / len(h_u)), dtype=complex)

    return np.sqrt(p_max) * h_u / norm


class TransmitController(BaseController):
    """
    Transmit beamforming controller.

    Attributes:
        STAGE: Stage name used in errors and stage records.
        RATE_SLACK: Largest rate decrease still treated as "not worse".
    """

    STAGE = 'transmit'
    RATE_SLACK = 1e-9

    @classmethod
    def _check(cls, links, psi, w0):
        if not links:
            raise cls.InvalidArgument('At least one PU link is required')

        num_elements, num_mas = links[0].h_bs.shape
        if len(psi) != num_elements or len(w0) != num_mas:
            raise cls.InvalidArgument(
                f'psi has {len(psi)} entries and w0 {len(w0)}; expected {num_elements} and {num_mas}')

        return num_elements, num_mas

    @classmethod
    def _secondary_qos(cls, problem, index, link, w, w0, psi, selector, snr_target):
        """
        Robust |psi^H (H + dH) w|^2 >= snr_target through its tangent surrogate.
        """
        g = psi.conj() @ link.h_bs
        form = tangent_quadratic_form(g @ w, selector @ w, g @ w0, selector @ w0)
        omega = problem.variable(f'omega_qos_{index}', nonneg=True)

        problem.add_lmi(s_procedure_lmi(
            form._replace(p=form.p - snr_target * link.noise),
            [Ball(np.ones(len(selector)), link.xi_bs)], [omega],
            name=f'qos_{index}', family='secondary-qos'))

    @classmethod
    def build_psr_transmit_subproblem(cls, *, links, psi, w0, snr_target):
        """
        Convex PSR transmit subproblem around the expansion point w0.

        Variables are the normalized beamformer w, the direct-power lower
        bound eps_u and the interference upper bound eps_h per PU, and the
        S-procedure/Sign-Definiteness multipliers.

        Args:
            links: List of ScaledLink instances, one per PU.
            psi: Fixed RIS phase vector, shape (M,).
            w0: Normalized expansion point, shape (K,), ||w0|| <= 1.
            snr_target: Secondary SNR target (linear).

        Returns:
            ConicProblem instance.
        """
        num_elements, num_mas = cls._check(links, psi, w0)

        problem = ConicProblem(name='psr-transmit')
        w = problem.variable('w', num_mas, complex=True)
        problem.add_constraint('power', cp.norm(w, 2) <= 1)

        selector = cascade_selector(psi, num_mas)
        v = np.column_stack([psi, np.zeros(num_elements)])
        psi_norm = np.linalg.norm(psi)

        def build_pu(problem, index, link):
            g = psi.conj() @ link.h_bs
            eps_u = problem.variable(f'eps_u_{index}', nonneg=True)
            eps_h = problem.variable(f'eps_h_{index}', nonneg=True)
            omega_u = problem.variable(f'omega_u_{index}', nonneg=True)
            b = problem.variable(f'b_{index}', nonneg=True)

            cls._secondary_qos(problem, index, link, w, w0, psi, selector, snr_target)

            direct = tangent_quadratic_form(link.h_u.conj() @ w, w, np.vdot(link.h_u, w0), w0)
            problem.add_lmi(s_procedure_lmi(
                direct._replace(p=direct.p - eps_u), [Ball(np.ones(num_mas), link.xi_u)], [omega_u],
                name=f'direct_{index}', family='direct'))

            cascaded = g @ w
            border = cp.hstack([np.zeros((num_mas, 1)), cp.reshape(w, (num_mas, 1), order='F')])
            problem.add_lmi(sign_definiteness_lmi(
                scalar_block([[eps_h, cascaded], [cp.conj(cascaded), 1]]), border, v, link.xi_bs, b,
                name=f'cascaded_{index}', family='cascaded'))

            eps_h0 = (abs(g @ w0) + link.xi_bs * psi_norm * np.linalg.norm(w0)) ** 2

            return (
                log2(eps_u + eps_h + link.noise)
                - (eps_h - eps_h0) / (np.log(2) * (link.noise + eps_h0))
                - np.log2(link.noise + eps_h0))

        problem.maximize(multi_pu_wrap(problem, build_pu, links))

        return problem

    @classmethod
    def build_csr_transmit_subproblem(cls, *, links, psi, w0, snr_target):
        """
        Convex CSR transmit subproblem around the expansion point w0.

        The uncertainty vector is x = [conj(dh_u); vec(dH_bs)] with one ball
        per part, so each combining branch gets two multipliers.

        Args:
            Same as build_psr_transmit_subproblem(); `snr_target` is the
            per-symbol secondary SNR target gamma_cmin / L.

        Returns:
            ConicProblem instance.
        """
        num_elements, num_mas = cls._check(links, psi, w0)

        problem = ConicProblem(name='csr-transmit')
        w = problem.variable('w', num_mas, complex=True)
        problem.add_constraint('power', cp.norm(w, 2) <= 1)

        selector = cascade_selector(psi, num_mas)
        size = num_elements * num_mas
        balls = [
            Ball(np.concatenate([np.ones(num_mas), np.zeros(size)]), None),
            Ball(np.concatenate([np.zeros(num_mas), np.ones(size)]), None)]

        def build_pu(problem, index, link):
            g = psi.conj() @ link.h_bs
            d = link.h_u.conj()
            pu_balls = [balls[0]._replace(radius=link.xi_u), balls[1]._replace(radius=link.xi_bs)]

            cls._secondary_qos(problem, index, link, w, w0, psi, selector, snr_target)

            branches = []
            for sign, label in ((1, 'plus'), (-1, 'minus')):
                eps = problem.variable(f'eps_{label}_{index}', nonneg=True)
                multipliers = [
                    problem.variable(f'omega_{label}_u_{index}', nonneg=True),
                    problem.variable(f'omega_{label}_bs_{index}', nonneg=True)]

                form = tangent_quadratic_form(
                    d @ w + sign * (g @ w),
                    cp.hstack([w, sign * (selector @ w)]),
                    d @ w0 + sign * (g @ w0),
                    np.concatenate([w0, sign * (selector @ w0)]))
                problem.add_lmi(s_procedure_lmi(
                    form._replace(p=form.p - eps), pu_balls, multipliers,
                    name=f'combined_{label}_{index}', family='combined'))
                branches.append(eps)

            return sum(0.5 * (log2(link.noise + eps) - np.log2(link.noise)) for eps in branches)

        problem.maximize(multi_pu_wrap(problem, build_pu, links))

        return problem

    @classmethod
    def _sca(cls, *, builder, client, channels, uncertainties, scenario, design, p_max, tolerance,
             max_iterations):
        sqrt_p = np.sqrt(p_max)
        links = scale_links(channels, uncertainties, p_max=p_max, noise_power=scenario.noise_power)
        psi = design.psi

        def score(candidate):
            return (
                multi_pu_qos_met(channels, candidate, uncertainties, scenario),
                multi_pu_robust_rate(channels, candidate, uncertainties, scenario))

        feasible, rate = score(design)
        trace = [rate] if feasible else []
        converged = False
        iteration = 0

        for iteration in range(1, max_iterations + 1):
            w0 = design.w / sqrt_p
            w0 = w0 / max(1.0, np.linalg.norm(w0))
            problem = builder(links=links, psi=psi, w0=w0, snr_target=scenario.secondary_threshold)

            try:
                solution = cls.solve_stage(client, problem, stage=cls.STAGE)
            except (cls.SolverFailure, cls.Infeasible) as exc:
                if not feasible:
                    raise
                logger.warning(f'Transmit SCA stopped at iteration {iteration}, keeping the incumbent: {exc}')
                break

            candidate = design._replace(w=sqrt_p * solution.values['w'])
            candidate_feasible, candidate_rate = score(candidate)

            if feasible and not (candidate_feasible and candidate_rate >= rate - cls.RATE_SLACK):
                logger.debug(
                    f'Transmit SCA iteration {iteration}: candidate {candidate_rate:.6f} rejected '
                    f'(incumbent {rate:.6f})')
                converged = True
                break

            change = relative_change(candidate_rate, rate) if feasible else np.inf
            design, feasible, rate = candidate, candidate_feasible, candidate_rate
            if feasible:
                trace.append(rate)
            logger.debug(f'Transmit SCA iteration {iteration}: rate {rate:.6f}, feasible {feasible}')

            if feasible and change < tolerance:
                converged = True
                break

        if not feasible:
            raise cls.Infeasible(stage=cls.STAGE, family='secondary-qos')

        return design, ScaState(iteration=iteration, point=design.w, trace=trace, converged=converged)

    @classmethod
    def sca_transmit_psr(cls, *, client, channels, uncertainties, scenario, design, p_max, tolerance=1e-3,
                         max_iterations=30):
        """
        Optimize w for the PSR scenario with the RIS phases of `design` fixed.

        Args:
            client: ConicSolverClient instance.
            channels: List of ChannelSet instances, one per PU.
            uncertainties: List of matching UncertaintyModel instances.
            scenario: ScenarioConfig instance.
            design: Current Design; its w is the first expansion point.
            p_max: Transmit power budget in watts.
            tolerance: Relative robust-rate change that stops the loop.
            max_iterations: Iteration cap.

        Returns:
            Tuple of (Design with the new w, ScaState). The trace holds the
            robust rate of every accepted feasible iterate.

        Raises:
            Infeasible: A subproblem was infeasible before any iterate met the
                secondary QoS target, or none ever did. Later failures keep
                the incumbent.
        """
        return cls._sca(
            builder=cls.build_psr_transmit_subproblem, client=client, channels=channels,
            uncertainties=uncertainties, scenario=scenario, design=design, p_max=p_max,
            tolerance=tolerance, max_iterations=max_iterations)

    @classmethod
    def sca_transmit_csr(cls, *, client, channels, uncertainties, scenario, design, p_max, tolerance=1e-3,
                         max_iterations=30):
        """
        Optimize w for the CSR scenario. Arguments as sca_transmit_psr().
        """
        return cls._sca(
            builder=cls.build_csr_transmit_subproblem, client=client, channels=channels,
            uncertainties=uncertainties, scenario=scenario, design=design, p_max=p_max,
            tolerance=tolerance, max_iterations=max_iterations)

    @classmethod
    def optimize(cls, **kwargs):
        """
        Dispatch to the scenario's SCA loop.
        """
        if kwargs['scenario'].scenario == 'psr':
            return cls.sca_transmit_psr(**kwargs)

        return cls.sca_transmit_csr(**kwargs)
