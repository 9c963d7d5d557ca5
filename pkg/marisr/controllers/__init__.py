"""
Base controller and helpers shared by the beamforming controllers.

Attributes:
    ScaledLink: namedtuple of one PU's channels, radii and noise power in
        normalized units, where the beamformer satisfies ||w|| <= 1.
    ScaState: namedtuple describing where an SCA loop stopped.
"""

import cvxpy as cp
import numpy as np
from collections import namedtuple
from marisr.clients.solver import InfeasibleProblem, NumericalFailure

ScaledLink = namedtuple('ScaledLink', ['h_u', 'h_bs', 'xi_u', 'xi_bs', 'noise'])
ScaState = namedtuple('ScaState', ['iteration', 'point', 'trace', 'converged'])


class BaseController:
    """
    Base controller.

    Defines classes that are useful for all other controllers to inherit.
    """

    class ControllerError(Exception):
        """
        Base class that all controller-related exception classes inherit from.
        """
        pass

    class InvalidArgument(ControllerError):
        """
        Indicates an argument was not usable.
        """
        pass

    class Infeasible(ControllerError):
        """
        Indicates a subproblem had no feasible point.

        Attributes:
            stage: Name of the stage that failed ('transmit', 'passive', ...).
            family: Constraint family the solver client diagnosed.
            iteration: AO iteration index, when known.
        """

        def __init__(self, *, stage, family, iteration=None):
            where = f' at AO iteration {iteration}' if iteration is not None else ''
            super().__init__(f'{stage} subproblem infeasible{where} (family: {family})')
            self.stage = stage
            self.family = family
            self.iteration = iteration

    class NoFeasibleGrid(ControllerError):
        """
        Indicates no discrete phase configuration met the secondary QoS target.
        """
        pass

    class SpacingInfeasible(ControllerError):
        """
        Indicates the position search could not satisfy the spacing constraint.
        """
        pass

    class SolverFailure(ControllerError):
        """
        Indicates the solver returned no verified point.
        """
        pass

    @classmethod
    def solve_stage(cls, client, problem, *, stage):
        """
        Solve a subproblem and translate solver failures into controller errors.

        Args:
            client: ConicSolverClient instance.
            problem: ConicProblem to solve.
            stage: Stage name recorded on any raised Infeasible.

        Returns:
            Optimal ConicSolution.

        Raises:
            Infeasible: The solver certified infeasibility.
            SolverFailure: No verified point was produced.
        """
        solution = client.solve(problem)

        try:
            return solution.raise_for_status()
        except InfeasibleProblem as exc:
            raise cls.Infeasible(stage=stage, family=exc.family) from exc
        except NumericalFailure as exc:
            raise cls.SolverFailure(f'{stage}: {exc}') from exc


def scale_links(channels, uncertainties, *, p_max, noise_power):
    """
    Express every PU's channels in units where the beamformer has ||w|| <= 1.

    Channels and radii are divided by a reference amplitude r (the largest
    direct-link norm over the PUs) and the beamformer by sqrt(p_max). Then
    |h^H w|^2 / noise_power equals |h'^H w'|^2 / n' with
    n' = noise_power / (p_max r^2), so every SNR is unchanged while the
    channel entries stay of order one.

    Args:
        channels: List of ChannelSet instances, one per PU.
        uncertainties: List of matching UncertaintyModel instances.
        p_max: Transmit power budget in watts.
        noise_power: Noise power in watts.

    Returns:
        List of ScaledLink instances.
    """
    if len(channels) != len(uncertainties):
        raise BaseController.InvalidArgument(
            f'{len(channels)} channel sets but {len(uncertainties)} uncertainty models')

    reference = max(np.linalg.norm(ch.h_u) for ch in channels) or 1.0
    noise = noise_power / (p_max * reference ** 2)

    return [
        ScaledLink(
            h_u=ch.h_u / reference, h_bs=ch.h_bs / reference,
            xi_u=unc.xi_u / reference, xi_bs=unc.xi_bs / reference, noise=noise)
        for ch, unc in zip(channels, uncertainties)]


def cascade_selector(psi, num_mas):
    """
    Matrix E with E w = vec(conj(psi) w^T), so psi^H dH w = (E w)^T vec(dH).

    vec() stacks columns, so entry k*M + m of vec(dH) is dH[m, k].
    """
    return np.kron(np.eye(num_mas), np.conj(psi)[:, np.newaxis])


def beam_selector(w, num_elements):
    """
    Matrix W with W conj(psi) = vec(conj(psi) w^T), for a fixed beamformer.
    """
    return np.kron(np.asarray(w)[:, np.newaxis], np.eye(num_elements))


def multi_pu_wrap(problem, builder, links):
    """
    Add one PU's constraints per link and make the weakest surrogate the objective.

    Args:
        problem: ConicProblem holding the shared decision variables.
        builder: Callable (problem, index, link) -> concave surrogate
            expression of that PU's rate.
        links: List of per-PU inputs handed to `builder`.

    Returns:
        The objective expression (the single surrogate when there is one PU,
        otherwise an epigraph variable t with t <= every surrogate).
    """
    surrogates = [builder(problem, index, link) for index, link in enumerate(links)]

    if len(surrogates) == 1:
        return surrogates[0]

    t = problem.variable('t')
    for surrogate in surrogates:
        problem.add_constraint('objective', t <= surrogate)

    return t


def log2(expression):
    """
    cvxpy base-2 logarithm.
    """
    return cp.log(expression) / np.log(2)


def relative_change(new, old):
    return abs(new - old) / max(abs(old), 1e-12)
