"""
Client for the conic solvers behind cvxpy.

The client tries each configured solver in turn, verifies the returned point
independently of the solver's own report, and turns every outcome into one of
three statuses. Nothing here is silent: a caller either gets a verified optimum
or an exception (directly or through ConicSolution.raise_for_status()).

Attributes:
    ConicSolution: namedtuple returned by ConicSolverClient.solve().
    logger: Logger instance scoped to the current module name.
"""

import cvxpy as cp
import enum
import logging
import numpy as np
from collections import namedtuple

logger = logging.getLogger(__name__)


class ConicSolverError(Exception):
    """
    Base exception class for any error that occurs within this client code.
    """
    pass


class InfeasibleProblem(ConicSolverError):
    """
    Indicates the problem has no feasible point.

    Attributes:
        family: The constraint family that is infeasible on its own, or
            'joint' when only the combination of families is.
    """

    def __init__(self, message='', *, family='joint'):
        super().__init__(message or f'Problem is infeasible (family: {family})')
        self.family = family


class NumericalFailure(ConicSolverError):
    """
    Indicates every solver failed or returned a point that did not verify.
    """
    pass


@enum.unique
class SolveStatus(enum.Enum):
    """
    The enumerated set of outcomes of a solve.

    Attributes:
        OPTIMAL: A verified optimal point is available.
        INFEASIBLE: At least one solver certified infeasibility.
        NUMERICAL_FAILURE: No solver produced a usable, verified point.
    """
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    NUMERICAL_FAILURE = 'numerical-failure'


class ConicSolution(namedtuple('ConicSolution', [
        'status', 'objective', 'values', 'solver', 'max_residual', 'min_psd_eigenvalue', 'family'])):
    """
    Outcome of one conic solve.

    Attributes:
        status: SolveStatus member.
        objective: Optimal objective value, or None.
        values: Dict of variable name to numpy value (empty unless optimal).
        solver: Name of the solver that produced the outcome.
        max_residual: Largest violation over the non-PSD constraints.
        min_psd_eigenvalue: Smallest eigenvalue over all LMI blocks.
        family: For infeasible outcomes, the diagnosed constraint family.
    """

    __slots__ = ()

    def raise_for_status(self):
        """
        Raise the matching ConicSolverError subclass unless the solve was optimal.

        Returns:
            The instance itself, for chaining.
        """
        if self.status is SolveStatus.INFEASIBLE:
            raise InfeasibleProblem(family=self.family)
        if self.status is SolveStatus.NUMERICAL_FAILURE:
            raise NumericalFailure(f'Solver {self.solver} failed to produce a verified point')

        return self


class ConicSolverClient:
    """
    Solves ConicProblem instances with a fallback chain of cvxpy solvers.

    Attributes:
        OPTIMAL_STATUSES: cvxpy statuses that are candidates for verification.
        INFEASIBLE_STATUSES: cvxpy statuses that certify infeasibility.
    """

    OPTIMAL_STATUSES = (cp.OPTIMAL, cp.OPTIMAL_INACCURATE)
    INFEASIBLE_STATUSES = (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE)

    def __init__(self, *, solvers, feasibility_tol=1e-6, solver_options=None):
        """
        Constructor.

        Args:
            solvers: Solver names in order of preference. Names that are not
                installed are skipped at solve time.
            feasibility_tol: Largest residual (and negative PSD eigenvalue,
                relative to block scale) accepted on an optimal point.
            solver_options: Optional dict of solver name to keyword arguments
                for cvxpy's Problem.solve().
        """
        self.solvers = list(solvers)
        self.feasibility_tol = feasibility_tol
        self.solver_options = dict(solver_options or {})

    @property
    def available_solvers(self):
        """
        The configured solvers that cvxpy can actually use, in preference order.
        """
        installed = set(cp.installed_solvers())

        return [name for name in self.solvers if name in installed]

    def _run(self, cvx_problem, solver, *, label):
        options = self.solver_options.get(solver, {})
        logger.debug(f'Solving {label} with {solver}...')

        try:
            cvx_problem.solve(solver=solver, **options)
        except cp.SolverError as exc:
            logger.debug(f'...{solver} raised {exc}')
            return None

        logger.debug(f'...{solver} status is {cvx_problem.status}')

        return cvx_problem.status

    def verify(self, problem):
        """
        Recompute residuals at the current variable values.

        Args:
            problem: ConicProblem that was solved.

        Returns:
            Tuple of (passed, max_residual, min_psd_eigenvalue).
        """
        if any(var.value is None for var in problem.variables.values()):
            return False, None, None

        residuals = [0.0]
        for _, constraint in problem.constraints:
            violation = constraint.violation()
            residuals.append(float(np.max(violation)) if np.size(violation) else 0.0)

        eigenvalues = [block.min_eigenvalue() for block in problem.lmis]
        psd_ok = all(block.is_satisfied(self.feasibility_tol) for block in problem.lmis)
        max_residual = max(residuals)
        min_eigenvalue = min(eigenvalues) if eigenvalues else None

        return (max_residual <= self.feasibility_tol and psd_ok), max_residual, min_eigenvalue

    def diagnose(self, problem, *, solver=None):
        """
        Find the first constraint family that is infeasible on its own.

        Args:
            problem: ConicProblem that was reported infeasible.
            solver: Solver to re-run each family with; the first available
                solver if omitted.

        Returns:
            The family name, or 'joint' if every family is feasible alone.
        """
        if solver is None:
            solver = self.available_solvers[0]

        for family in problem.families:
            subproblem = problem.to_cvxpy(families=[family])
            status = self._run(subproblem, solver, label=f'{problem.name}[{family}]')
            if status in self.INFEASIBLE_STATUSES:
                logger.debug(f'Family {family} of {problem.name} is infeasible on its own')
                return family

        return 'joint'

    def solve(self, problem):
        """
        Solve a ConicProblem and verify the result.

        Args:
            problem: ConicProblem instance with an objective.

        Returns:
            ConicSolution instance. On OPTIMAL, the problem's variables also
            hold the solution values.

        Raises:
            ConicSolverError: None of the configured solvers is installed.
        """
        solvers = self.available_solvers
        if not solvers:
            raise ConicSolverError(
                f'None of {self.solvers} is installed (have {cp.installed_solvers()})')

        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f'Model of {problem.name}:\n{problem.dump()}')

        cvx_problem = problem.to_cvxpy()
        last = None

        for solver in solvers:
            status = self._run(cvx_problem, solver, label=problem.name)

            if status in self.INFEASIBLE_STATUSES:
                family = self.diagnose(problem, solver=solver)
                logger.debug(f'{problem.name} is infeasible, diagnosed family {family}')
                return ConicSolution(
                    status=SolveStatus.INFEASIBLE, objective=None, values={}, solver=solver,
                    max_residual=None, min_psd_eigenvalue=None, family=family)

            if status in self.OPTIMAL_STATUSES:
                passed, residual, eigenvalue = self.verify(problem)
                if passed:
                    return ConicSolution(
                        status=SolveStatus.OPTIMAL,
                        objective=float(cvx_problem.value),
                        values={name: np.array(var.value) for name, var in problem.variables.items()},
                        solver=solver, max_residual=residual, min_psd_eigenvalue=eigenvalue,
                        family=None)
                logger.debug(
                    f'{solver} point did not verify for {problem.name}: residual {residual}, '
                    f'min eigenvalue {eigenvalue}')

            last = solver

        return ConicSolution(
            status=SolveStatus.NUMERICAL_FAILURE, objective=None, values={}, solver=last,
            max_residual=None, min_psd_eigenvalue=None, family=None)


def solve_conic(problem, *, client):
    """
    Solve `problem` with `client` and return the ConicSolution.

    The status is one of optimal, infeasible or numerical-failure; callers that
    want exceptions chain .raise_for_status().
    """
    return client.solve(problem)
