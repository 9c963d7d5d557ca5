"""
Passive (RIS phase) beamforming controller.

The beamformer is fixed. Each RIS element picks one of the κ̄ grid phases
through relaxed selectors c[i, m] in [0, 1], with conj(ψ_m) = Σ_i c[i, m]
conj(f_i); a concave penalty drives c toward {0, 1}. After the SCA loop the
selectors are rounded to grid indices and polished by a coordinate search over
the grid against the closed-form robust rate.

Attributes:
    PhaseSelection: namedtuple of the relaxed selectors (κ̄ x M) and the grid
        indices recovered from them.
    logger: Logger instance scoped to the current module name.
"""

import cvxpy as cp
import logging
import numpy as np
from collections import namedtuple
from marisr.conic import (
    Ball, ConicProblem, scalar_block, s_procedure_lmi, sign_definiteness_lmi,
    tangent_quadratic_form)
from marisr.controllers import (
    BaseController, ScaState, beam_selector, log2, multi_pu_wrap, relative_change,
    scale_links)
from marisr.models.rates import (
    multi_pu_qos_met, multi_pu_robust_rate, multi_pu_secondary_snr, phase_grid)

logger = logging.getLogger(__name__)


class PhaseSelection(namedtuple('PhaseSelection', ['selectors', 'indices'])):
    """
    Relaxed selectors and the grid indices recovered from them.
    """

    __slots__ = ()

    @property
    def binary_gap(self):
        """
        Largest distance of any selector from {0, 1}.
        """
        c = np.asarray(self.selectors)

        return float(np.max(np.minimum(c, 1 - c))) if c.size else 0.0


def one_hot(indices, levels):
    """
    Selector matrix (levels x M) with a single 1 per column at each index.
    """
    indices = np.asarray(indices, dtype=int)
    selectors = np.zeros((levels, len(indices)))
    selectors[indices, np.arange(len(indices))] = 1.0

    return selectors


def recover_indices(selectors):
    """
    Grid index of the largest selector per element; ties go to the smallest index.
    """
    return np.argmax(np.asarray(selectors), axis=0).astype(int)


class PassiveController(BaseController):
    """
    Passive beamforming controller.

    Attributes:
        STAGE: Stage name used in errors and stage records.
        DECREASE_SLACK: Relative objective decrease tolerated between
            consecutive subproblems before the loop stops.
    """

    STAGE = 'passive'
    DECREASE_SLACK = 1e-6

    @classmethod
    def _check(cls, links, w, selectors0):
        if not links:
            raise cls.InvalidArgument('At least one PU link is required')

        num_elements, num_mas = links[0].h_bs.shape
        selectors0 = np.asarray(selectors0, dtype=float)
        if len(w) != num_mas or selectors0.ndim != 2 or selectors0.shape[1] != num_elements:
            raise cls.InvalidArgument(
                f'w has {len(w)} entries and selectors shape {selectors0.shape}; '
                f'expected {num_mas} and (levels, {num_elements})')

        return num_elements, num_mas, selectors0

    @classmethod
    def _selection_variables(cls, problem, selectors0, penalty):
        """
        Add the selectors c with their column-sum and box constraints.

        Returns:
            Tuple of (c, conj(ψ) expression, penalty term).
        """
        levels, num_elements = selectors0.shape
        grid = phase_grid(levels)

        c = problem.variable('c', (levels, num_elements), nonneg=True)
        problem.add_constraint('selection', c <= 1)
        problem.add_constraint('selection', cp.sum(c, axis=0) <= 1)

        conj_psi = c.T @ np.conj(grid)
        # Tangent of Σ(c - c²) at the previous selectors
        binary = cp.sum(c - 2 * cp.multiply(selectors0, c)) + float(np.sum(selectors0 ** 2))

        return c, conj_psi, penalty * binary

    @classmethod
    def _secondary_qos(cls, problem, index, link, beam, cascade, conj_psi, conj_psi0, snr_target):
        """
        Robust |ψ^H (H + dH) w|^2 >= snr_target with ψ as the decision variable.
        """
        form = tangent_quadratic_form(conj_psi @ cascade, beam @ conj_psi, conj_psi0 @ cascade, beam @ conj_psi0)
        omega = problem.variable(f'omega_qos_{index}', nonneg=True)

        problem.add_lmi(s_procedure_lmi(
            form._replace(p=form.p - snr_target * link.noise),
            [Ball(np.ones(beam.shape[0]), link.xi_bs)], [omega],
            name=f'qos_{index}', family='secondary-qos'))

    @classmethod
    def build_psr_passive_subproblem(cls, *, links, w, selectors0, snr_target, penalty):
        """
        Convex PSR passive subproblem around the selectors `selectors0`.

        The direct-link power bound eps_u is not a variable here: with w fixed
        it is the closed-form worst case, carried over from the transmit step.
        The cascaded bound uses the reduced 3x3 Sign-Definiteness block, with
        ||ψ||^2 bounded by M.

        Args:
            links: List of ScaledLink instances, one per PU.
            w: Fixed normalized beamformer, shape (K,).
            selectors0: Expansion point of the selectors, shape (κ̄, M).
            snr_target: Secondary SNR target (linear).
            penalty: Weight of the binary penalty on the selectors.

        Returns:
            ConicProblem instance.
        """
        num_elements, num_mas, selectors0 = cls._check(links, w, selectors0)
        levels = selectors0.shape[0]
        conj_psi0 = selectors0.T @ np.conj(phase_grid(levels))
        w_norm = np.linalg.norm(w)

        problem = ConicProblem(name='psr-passive')
        _, conj_psi, binary = cls._selection_variables(problem, selectors0, penalty)
        beam = beam_selector(w, num_elements)

        def build_pu(problem, index, link):
            cascade = link.h_bs @ w
            eps_u = max(abs(np.vdot(link.h_u, w)) - link.xi_u * w_norm, 0.0) ** 2
            eps_h = problem.variable(f'eps_h_{index}', nonneg=True)
            b = problem.variable(f'b_{index}', nonneg=True)

            cls._secondary_qos(problem, index, link, beam, cascade, conj_psi, conj_psi0, snr_target)

            cascaded = conj_psi @ cascade
            problem.add_lmi(sign_definiteness_lmi(
                scalar_block([[eps_h, cascaded], [cp.conj(cascaded), 1]]), np.array([[0.0, 1.0]]), None,
                link.xi_bs * w_norm, b, v_gram=np.diag([float(num_elements), 0.0]),
                name=f'cascaded_{index}', family='cascaded'))

            eps_h0 = (abs(conj_psi0 @ cascade) + link.xi_bs * np.sqrt(num_elements) * w_norm) ** 2

            return (
                log2(eps_u + eps_h + link.noise)
                - (eps_h - eps_h0) / (np.log(2) * (link.noise + eps_h0))
                - np.log2(link.noise + eps_h0))

        problem.maximize(multi_pu_wrap(problem, build_pu, links) - binary)

        return problem

    @classmethod
    def build_csr_passive_subproblem(cls, *, links, w, selectors0, snr_target, penalty):
        """
        Convex CSR passive subproblem around the selectors `selectors0`.

        Arguments as build_psr_passive_subproblem(); `snr_target` is the
        per-symbol target gamma_cmin / L. Each combining branch is bounded from
        below over x = [conj(dh_u); vec(dH_bs)] with one multiplier per ball.
        """
        num_elements, num_mas, selectors0 = cls._check(links, w, selectors0)
        levels = selectors0.shape[0]
        conj_psi0 = selectors0.T @ np.conj(phase_grid(levels))

        problem = ConicProblem(name='csr-passive')
        _, conj_psi, binary = cls._selection_variables(problem, selectors0, penalty)
        beam = beam_selector(w, num_elements)
        size = num_elements * num_mas

        def build_pu(problem, index, link):
            cascade = link.h_bs @ w
            direct = np.vdot(link.h_u, w)
            balls = [
                Ball(np.concatenate([np.ones(num_mas), np.zeros(size)]), link.xi_u),
                Ball(np.concatenate([np.zeros(num_mas), np.ones(size)]), link.xi_bs)]

            cls._secondary_qos(problem, index, link, beam, cascade, conj_psi, conj_psi0, snr_target)

            branches = []
            for sign, label in ((1, 'plus'), (-1, 'minus')):
                eps = problem.variable(f'eps_{label}_{index}', nonneg=True)
                multipliers = [
                    problem.variable(f'omega_{label}_u_{index}', nonneg=True),
                    problem.variable(f'omega_{label}_bs_{index}', nonneg=True)]

                form = tangent_quadratic_form(
                    sign * (conj_psi @ cascade) + direct,
                    cp.hstack([cp.Constant(w), sign * (beam @ conj_psi)]),
                    direct + sign * (conj_psi0 @ cascade),
                    np.concatenate([w, sign * (beam @ conj_psi0)]))
                problem.add_lmi(s_procedure_lmi(
                    form._replace(p=form.p - eps), balls, multipliers,
                    name=f'combined_{label}_{index}', family='combined'))
                branches.append(eps)

            return sum(0.5 * (log2(link.noise + eps) - np.log2(link.noise)) for eps in branches)

        problem.maximize(multi_pu_wrap(problem, build_pu, links) - binary)

        return problem

    @classmethod
    def grid_search(cls, *, channels, uncertainties, scenario, design):
        """
        One coordinate pass over the grid starting from `design`'s indices.

        Each element in turn takes the grid phase that scores best with every
        other element held, so at most κ̄·M designs are evaluated. A design
        meeting the secondary QoS worst case always beats one that does not;
        among feasible designs the robust rate decides, otherwise the worst
        secondary SNR.

        Returns:
            Design with the polished indices.

        Raises:
            NoFeasibleGrid: No visited design met the secondary QoS target.
        """
        def score(candidate):
            if multi_pu_qos_met(channels, candidate, uncertainties, scenario):
                return True, multi_pu_robust_rate(channels, candidate, uncertainties, scenario)
            return False, multi_pu_secondary_snr(channels, candidate, uncertainties, scenario)

        best, best_score = design, score(design)

        for m in range(len(design.phase_indices)):
            for level in range(design.phase_levels):
                if level == best.phase_indices[m]:
                    continue
                indices = np.array(best.phase_indices, dtype=int)
                indices[m] = level
                candidate = best._replace(phase_indices=indices)
                candidate_score = score(candidate)
                if candidate_score > best_score:
                    best, best_score = candidate, candidate_score

        if not best_score[0]:
            raise cls.NoFeasibleGrid(
                f'No grid phase configuration met the secondary QoS target '
                f'(best worst-case SNR {best_score[1]:.3e})')

        return best

    @classmethod
    def _sca(cls, *, builder, client, channels, uncertainties, scenario, design, p_max, penalty,
             tolerance, max_iterations):
        sqrt_p = np.sqrt(p_max)
        links = scale_links(channels, uncertainties, p_max=p_max, noise_power=scenario.noise_power)
        w = design.w / sqrt_p
        w = w / max(1.0, np.linalg.norm(w))

        selectors = one_hot(design.phase_indices, design.phase_levels)
        trace = []
        converged = False
        iteration = 0

        for iteration in range(1, max_iterations + 1):
            problem = builder(
                links=links, w=w, selectors0=selectors, snr_target=scenario.secondary_threshold,
                penalty=penalty)

            try:
                solution = cls.solve_stage(client, problem, stage=cls.STAGE)
            except (cls.SolverFailure, cls.Infeasible) as exc:
                if not trace and not multi_pu_qos_met(channels, design, uncertainties, scenario):
                    raise
                logger.warning(f'Passive SCA stopped at iteration {iteration}, keeping the incumbent: {exc}')
                break

            objective = solution.objective
            if trace and objective < trace[-1] - cls.DECREASE_SLACK * max(1.0, abs(trace[-1])):
                logger.debug(
                    f'Passive SCA iteration {iteration}: objective {objective:.6f} below {trace[-1]:.6f}, '
                    'keeping previous selectors')
                converged = True
                break

            change = relative_change(objective, trace[-1]) if trace else np.inf
            selectors = np.clip(solution.values['c'], 0.0, 1.0)
            trace.append(objective)
            logger.debug(f'Passive SCA iteration {iteration}: objective {objective:.6f}')

            if change < tolerance:
                converged = True
                break

        selection = PhaseSelection(selectors=selectors, indices=recover_indices(selectors))
        logger.debug(f'Passive selectors binary gap {selection.binary_gap:.3e}')

        try:
            polished = cls.grid_search(
                channels=channels, uncertainties=uncertainties, scenario=scenario,
                design=design._replace(phase_indices=selection.indices))
        except cls.NoFeasibleGrid:
            if not multi_pu_qos_met(channels, design, uncertainties, scenario):
                raise
            logger.warning('Grid recovery found no feasible phases; keeping the incumbent phases')
            polished = design

        if (multi_pu_qos_met(channels, design, uncertainties, scenario)
                and multi_pu_robust_rate(channels, design, uncertainties, scenario)
                > multi_pu_robust_rate(channels, polished, uncertainties, scenario)):
            logger.debug('Recovered phases score below the incumbent; keeping the incumbent')
            polished = design

        selection = selection._replace(indices=np.asarray(polished.phase_indices, dtype=int))
        state = ScaState(iteration=iteration, point=selection.selectors, trace=trace, converged=converged)

        return polished, selection, state

    @classmethod
    def sca_passive_psr(cls, *, client, channels, uncertainties, scenario, design, p_max, penalty=1.0,
                        tolerance=1e-3, max_iterations=30):
        """
        Optimize the RIS phase indices for the PSR scenario with w fixed.

        Args:
            client: ConicSolverClient instance.
            channels: List of ChannelSet instances, one per PU.
            uncertainties: List of matching UncertaintyModel instances.
            scenario: ScenarioConfig instance.
            design: Current Design; its phases are the first expansion point.
            p_max: Transmit power budget in watts.
            penalty: Weight of the binary selector penalty.
            tolerance: Relative objective change that stops the loop.
            max_iterations: Iteration cap.

        Returns:
            Tuple of (Design with grid-exact phases, PhaseSelection, ScaState).
            The trace holds the subproblem objectives.

        Raises:
            Infeasible: A subproblem was infeasible while the incumbent missed
                the secondary QoS target. Otherwise the incumbent is kept.
            NoFeasibleGrid: Neither the recovered nor the incumbent phases meet
                the secondary QoS target.
        """
        return cls._sca(
            builder=cls.build_psr_passive_subproblem, client=client, channels=channels,
            uncertainties=uncertainties, scenario=scenario, design=design, p_max=p_max,
            penalty=penalty, tolerance=tolerance, max_iterations=max_iterations)

    @classmethod
    def sca_passive_csr(cls, *, client, channels, uncertainties, scenario, design, p_max, penalty=1.0,
                        tolerance=1e-3, max_iterations=30):
        """
        Optimize the RIS phase indices for the CSR scenario. Arguments as sca_passive_psr().
        """
        return cls._sca(
            builder=cls.build_csr_passive_subproblem, client=client, channels=channels,
            uncertainties=uncertainties, scenario=scenario, design=design, p_max=p_max,
            penalty=penalty, tolerance=tolerance, max_iterations=max_iterations)

    @classmethod
    def optimize(cls, **kwargs):
        """
        Dispatch to the scenario's SCA loop.
        """
        if kwargs['scenario'].scenario == 'psr':
            return cls.sca_passive_psr(**kwargs)

        return cls.sca_passive_csr(**kwargs)
