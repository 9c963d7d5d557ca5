"""
Tests for the conic solver client.
"""

import cvxpy as cp
import logging
import pytest
from marisr.clients.solver import (
    ConicSolution, ConicSolverClient, ConicSolverError, InfeasibleProblem, NumericalFailure, SolveStatus,
    solve_conic)
from marisr.conic import ConicProblem, LmiBlock, complex_to_real_embedding, scalar_block
from unittest.mock import patch


def _toy_problem(*, floor=None, contradiction=False):
    """
    Maximize x subject to |x| <= 2 (as an LMI) and x <= 1.5.
    """
    problem = ConicProblem(name='toy')
    x = problem.variable('x')
    problem.add_constraint('cap', x <= 1.5)
    problem.add_lmi(LmiBlock(
        name='square', family='lmi', matrix=complex_to_real_embedding(scalar_block([[1, x], [x, 4]]))))
    if floor is not None:
        problem.add_constraint('floor', x >= floor)
    if contradiction:
        problem.add_constraint('bad', x >= 1)
        problem.add_constraint('bad', x <= 0)
    problem.maximize(x)

    return problem


def test_solve_optimal(client):
    """
    Should return a verified optimum with values copied out.
    """
    problem = _toy_problem()

    solution = solve_conic(problem, client=client)

    assert solution.status is SolveStatus.OPTIMAL
    assert solution.objective == pytest.approx(1.5, abs=1e-5)
    assert solution.values['x'] == pytest.approx(1.5, abs=1e-5)
    assert solution.solver in client.available_solvers
    assert solution.max_residual <= client.feasibility_tol
    assert solution.raise_for_status() is solution


def test_solve_infeasible_joint(client):
    """
    Families that are feasible alone but not together should diagnose as joint.
    """
    solution = client.solve(_toy_problem(floor=3.0))

    assert solution.status is SolveStatus.INFEASIBLE
    assert solution.family == 'joint'
    with pytest.raises(InfeasibleProblem) as excinfo:
        solution.raise_for_status()
    assert excinfo.value.family == 'joint'


def test_solve_infeasible_family(client):
    """
    Should name the family that is infeasible on its own.
    """
    solution = client.solve(_toy_problem(contradiction=True))

    assert solution.status is SolveStatus.INFEASIBLE
    assert solution.family == 'bad'


def test_solver_fallback():
    """
    Should fall through to the next solver when one fails.
    """
    client = ConicSolverClient(solvers=['FIRST', 'SECOND'])
    problem = _toy_problem()

    with patch('marisr.clients.solver.cp.installed_solvers', return_value=['FIRST', 'SECOND']), \
            patch.object(client, '_run', side_effect=[None, cp.OPTIMAL]) as mock_run, \
            patch.object(client, 'verify', return_value=(True, 0.0, 0.1)), \
            patch.object(cp.Problem, 'value', 1.5):
        solution = client.solve(problem)

    assert mock_run.call_count == 2
    assert solution.status is SolveStatus.OPTIMAL
    assert solution.solver == 'SECOND'


def test_solver_numerical_failure():
    """
    Should report a numerical failure when no point verifies.
    """
    client = ConicSolverClient(solvers=['FIRST', 'SECOND'])

    with patch('marisr.clients.solver.cp.installed_solvers', return_value=['SECOND', 'FIRST']), \
            patch.object(client, '_run', return_value=cp.OPTIMAL_INACCURATE), \
            patch.object(client, 'verify', return_value=(False, 1.0, -1.0)):
        solution = client.solve(_toy_problem())

    assert solution.status is SolveStatus.NUMERICAL_FAILURE
    assert solution.solver == 'SECOND'
    assert solution.values == {}
    with pytest.raises(NumericalFailure):
        solution.raise_for_status()


def test_available_solvers():
    """
    Should keep preference order and drop solvers that are not installed.
    """
    client = ConicSolverClient(solvers=['B', 'MISSING', 'A'])

    with patch('marisr.clients.solver.cp.installed_solvers', return_value=['A', 'B']):
        assert client.available_solvers == ['B', 'A']


def test_no_solvers_installed():
    """
    Should refuse to solve without any usable solver.
    """
    client = ConicSolverClient(solvers=['NOT_A_SOLVER'])

    with pytest.raises(ConicSolverError):
        client.solve(_toy_problem())


def test_verify_unsolved():
    """
    Should fail verification while variables are unset.
    """
    client = ConicSolverClient(solvers=[])

    assert client.verify(_toy_problem()) == (False, None, None)


def test_raise_for_status_messages():
    """
    Should carry the diagnosed family in the exception.
    """
    solution = ConicSolution(
        status=SolveStatus.INFEASIBLE, objective=None, values={}, solver='X', max_residual=None,
        min_psd_eigenvalue=None, family='qos')

    with pytest.raises(InfeasibleProblem, match='qos'):
        solution.raise_for_status()


def test_diagnose_uses_reporting_solver():
    """
    Should re-run the families with the solver that certified infeasibility.
    """
    client = ConicSolverClient(solvers=['FIRST', 'SECOND'])
    calls = []

    def fake_run(cvx_problem, solver, *, label):
        calls.append((solver, label))
        if label == 'toy':
            return None if solver == 'FIRST' else cp.INFEASIBLE
        return cp.INFEASIBLE if label == 'toy[bad]' else cp.OPTIMAL

    with patch('marisr.clients.solver.cp.installed_solvers', return_value=['FIRST', 'SECOND']), \
            patch.object(client, '_run', side_effect=fake_run):
        solution = client.solve(_toy_problem(contradiction=True))

    assert solution.status is SolveStatus.INFEASIBLE
    assert solution.solver == 'SECOND'
    assert solution.family == 'bad'
    assert calls[:2] == [('FIRST', 'toy'), ('SECOND', 'toy')]
    assert [solver for solver, _ in calls[2:]] == ['SECOND'] * len(calls[2:])
    assert calls[-1] == ('SECOND', 'toy[bad]')


def test_solve_dumps_model_at_debug(caplog):
    """
    Should log the model description only when DEBUG is enabled.
    """
    client = ConicSolverClient(solvers=['FIRST'])

    with patch('marisr.clients.solver.cp.installed_solvers', return_value=['FIRST']), \
            patch.object(client, '_run', return_value=cp.OPTIMAL), \
            patch.object(client, 'verify', return_value=(True, 0.0, 0.1)), \
            patch.object(cp.Problem, 'value', 1.5):
        caplog.set_level(logging.INFO, logger='marisr.clients.solver')
        client.solve(_toy_problem())
        assert 'Model of toy' not in caplog.text

        caplog.set_level(logging.DEBUG, logger='marisr.clients.solver')
        client.solve(_toy_problem())

    assert 'Model of toy' in caplog.text
    assert '"family": "lmi"' in caplog.text
