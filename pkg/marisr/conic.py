"""
Conic program representation and LMI construction primitives.

Complex Hermitian blocks are realized through the real embedding
[[Re H, -Im H], [Im H, Re H]], which is PSD exactly when H is. Every builder
here accepts plain numpy values as well as cvxpy expressions; with numpy
inputs the blocks are concrete matrices that can be checked directly.

Attributes:
    PSD_TOLERANCE: Smallest eigenvalue (relative to the block scale) tolerated
        when a PSD block is checked after a solve.
    HERMITIAN_TOLERANCE: Largest |H - H^H| entry accepted by the embedding.
    QuadraticForm: namedtuple (q, g, p) standing for the real function
        x^H q x + 2 Re{g^H x} + p of a complex vector x.
    Ball: namedtuple (selector, radius) for the constraint
        sum_i selector_i |x_i|^2 <= radius^2.
    logger: Logger instance scoped to the current module name.
"""

import cvxpy as cp
import json
import logging
import numpy as np
from collections import namedtuple

PSD_TOLERANCE = 1e-6
HERMITIAN_TOLERANCE = 1e-9

QuadraticForm = namedtuple('QuadraticForm', ['q', 'g', 'p'])
Ball = namedtuple('Ball', ['selector', 'radius'])

logger = logging.getLogger(__name__)


class ConicModelError(ValueError):
    """
    Base exception class for malformed conic models.
    """
    pass


class DimensionMismatch(ConicModelError):
    """
    Indicates blocks whose shapes do not fit together.
    """
    pass


class NotHermitian(ConicModelError):
    """
    Indicates a matrix that was required to be Hermitian but is not.
    """
    pass


def _is_expr(value):
    return isinstance(value, cp.Expression)


def _shape(value):
    return value.shape if _is_expr(value) else np.shape(value)


def _column(value):
    n = _shape(value)[0]
    if _is_expr(value):
        return cp.reshape(value, (n, 1), order='F')

    return np.asarray(value).reshape(n, 1)


def _row(value):
    n = _shape(value)[0]
    if _is_expr(value):
        return cp.reshape(value, (1, n), order='F')

    return np.asarray(value).reshape(1, n)


def _scalar(value):
    if _is_expr(value):
        return cp.reshape(value, (1, 1), order='F')

    return np.asarray(value).reshape(1, 1)


def _conj(value):
    return cp.conj(value) if _is_expr(value) else np.conj(value)


def _outer(x, y):
    """
    x y^T for vectors that may be cvxpy expressions (at most one of them).
    """
    if _is_expr(x) or _is_expr(y):
        return _column(x) @ _row(y)

    return np.outer(x, y)


def _block(rows):
    if any(_is_expr(item) for row in rows for item in row):
        return cp.bmat([[item if _is_expr(item) else cp.Constant(item) for item in row] for row in rows])

    return np.block([[np.asarray(item) for item in row] for row in rows])


def _value(value):
    return value.value if _is_expr(value) else np.asarray(value)


def scalar_block(rows):
    """
    Assemble a matrix from a nested list of scalars (numbers or expressions).
    """
    return _block([[_scalar(item) for item in row] for row in rows])


def complex_to_real_embedding(h):
    """
    Embed a complex Hermitian n x n matrix as a real symmetric 2n x 2n one.

    Args:
        h: numpy array or cvxpy expression. Numeric input is checked for
            Hermitian symmetry; expressions are symmetrized instead, which
            leaves any Hermitian-by-construction block unchanged.

    Returns:
        [[Re h, -Im h], [Im h, Re h]] in the same kind (array or expression).

    Raises:
        DimensionMismatch: The input is not square.
        NotHermitian: Numeric input deviates from h^H by more than
            HERMITIAN_TOLERANCE.
    """
    shape = _shape(h)
    if len(shape) != 2 or shape[0] != shape[1]:
        raise DimensionMismatch(f'Expected a square matrix, got shape {shape}')

    if _is_expr(h):
        real = cp.real(h)
        imag = cp.imag(h) if h.is_complex() else np.zeros(shape)
        embedded = _block([[real, -imag], [imag, real]])
        return (embedded + embedded.T) / 2

    h = np.asarray(h, dtype=complex)
    deviation = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if deviation > HERMITIAN_TOLERANCE:
        raise NotHermitian(f'Matrix deviates from its conjugate transpose by {deviation:.3e}')

    return np.block([[h.real, -h.imag], [h.imag, h.real]])


class LmiBlock:
    """
    One real symmetric linear matrix inequality, M >> 0.

    Attributes:
        name: Label that is unique within a ConicProblem.
        family: Constraint family the block belongs to (for diagnosis).
        matrix: Real symmetric embedded matrix, as a numpy array or a cvxpy
            expression affine in the decision variables.
    """

    def __init__(self, *, name, family, matrix):
        shape = _shape(matrix)
        if len(shape) != 2 or shape[0] != shape[1]:
            raise DimensionMismatch(f'LMI {name} is not square: {shape}')

        self.name = name
        self.family = family
        self.matrix = matrix

    def __repr__(self):
        return f'<LmiBlock {self.name} family={self.family} dim={self.dimension}>'

    @property
    def dimension(self):
        return _shape(self.matrix)[0]

    @property
    def value(self):
        """
        The numeric matrix, or None if the decision variables are unset.
        """
        return _value(self.matrix)

    def constraint(self):
        """
        The cvxpy PSD constraint for this block.
        """
        matrix = self.matrix if _is_expr(self.matrix) else cp.Constant(self.matrix)

        return matrix >> 0

    def min_eigenvalue(self):
        value = self.value
        if value is None:
            return None

        return float(np.linalg.eigvalsh((value + value.T) / 2)[0])

    def is_satisfied(self, tol=PSD_TOLERANCE):
        """
        Is the smallest eigenvalue above -tol, scaled by the block's magnitude?
        """
        value = self.value
        if value is None:
            return False

        scale = max(1.0, float(np.max(np.abs(value))))

        return self.min_eigenvalue() >= -tol * scale


def ball_constraint(selector, radius):
    """
    Quadratic form of radius^2 - sum_i selector_i |x_i|^2, i.e. the ball as f >= 0.
    """
    selector = np.asarray(selector, dtype=float)

    return QuadraticForm(q=-np.diag(selector).astype(complex), g=np.zeros(len(selector), dtype=complex),
                         p=float(radius) ** 2)


def tangent_quadratic_form(c, beta, c0, beta0):
    """
    SCA surrogate of |c + beta^T x|^2 expanded at (c0, beta0), as a quadratic form in x.

    Uses |v|^2 >= 2 Re{conj(v0) v} - |v0|^2 with v = c + beta^T x and
    v0 = c0 + beta0^T x. The surrogate is affine in (c, beta), so it is a
    valid convex constraint body when c and beta are affine expressions of
    the decision variables. At (c, beta) = (c0, beta0) it equals |c0 + beta0^T x|^2
    for every x.

    Args:
        c: Complex scalar (number or cvxpy expression).
        beta: Complex vector of length n (array or cvxpy expression).
        c0: Complex scalar at the expansion point.
        beta0: Complex vector at the expansion point.

    Returns:
        QuadraticForm with q (n x n), g (n,) and p (real scalar).
    """
    c0 = complex(c0)
    beta0 = np.asarray(beta0, dtype=complex)

    if _shape(beta) != beta0.shape:
        raise DimensionMismatch(f'beta has shape {_shape(beta)}, beta0 has {beta0.shape}')

    q = _outer(beta0.conj(), beta) + _outer(_conj(beta), beta0) - np.outer(beta0.conj(), beta0)

    if _is_expr(c):
        g = c0 * _conj(beta) + cp.multiply(c, beta0.conj()) - c0 * beta0.conj()
        p = 2 * cp.real(c0.conjugate() * c) - abs(c0) ** 2
    else:
        g = c0 * _conj(beta) + complex(c) * beta0.conj() - c0 * beta0.conj()
        p = 2 * np.real(np.conj(c0) * complex(c)) - abs(c0) ** 2

    return QuadraticForm(q=q, g=g, p=p)


def evaluate_quadratic_form(form, x):
    """
    Numeric value of x^H q x + 2 Re{g^H x} + p.
    """
    x = np.asarray(x, dtype=complex)
    q, g, p = (_value(part) for part in form)

    return float(np.real(np.vdot(x, q @ x)) + 2 * np.real(np.vdot(g, x)) + np.real(p))


def s_procedure_lmi(form, balls, multipliers, *, name, family):
    """
    LMI certifying form(x) >= 0 for every x inside all of the given balls.

    Emits [[q, g], [g^H, p]] - sum_i w_i [[q_i, g_i], [g_i^H, p_i]] >> 0 with
    the ball forms of ball_constraint() and multipliers w_i >= 0 (the caller
    owns their sign constraints). With a single ball covering all of x this is
    the classic bordered form [[q + w I, g], [g^H, p - w r^2]].

    Args:
        form: QuadraticForm of the constrained function.
        balls: List of Ball instances over disjoint parts of x.
        multipliers: List of scalars (numbers or cvxpy variables), one per ball.
        name: LMI label.
        family: Constraint family label.

    Returns:
        LmiBlock of dimension 2(n + 1).

    Raises:
        DimensionMismatch: Shapes or counts disagree.
    """
    q, g, p = form
    n = _shape(q)[0]
    if _shape(q) != (n, n) or _shape(g) != (n,):
        raise DimensionMismatch(f'Quadratic form shapes q={_shape(q)} g={_shape(g)} are inconsistent')
    if len(balls) != len(multipliers):
        raise DimensionMismatch(f'{len(balls)} balls but {len(multipliers)} multipliers')

    top_left = q
    corner = p
    for ball, multiplier in zip(balls, multipliers):
        if len(ball.selector) != n:
            raise DimensionMismatch(f'Ball selector has length {len(ball.selector)}, expected {n}')
        q_i, _, p_i = ball_constraint(ball.selector, ball.radius)
        top_left = -(multiplier * q_i) + top_left
        corner = -(multiplier * p_i) + corner

    hermitian = _block([[top_left, _column(g)], [_row(_conj(g)), _scalar(corner)]])

    return LmiBlock(name=name, family=family, matrix=complex_to_real_embedding(hermitian))


def sign_definiteness_lmi(b, u, v, radius, multiplier, *, name, family, v_gram=None):
    """
    LMI certifying b + v^H X u + u^H X^H v >> 0 for every ||X||_F <= radius.

    Emits [[b - m v^H v, -radius u^H], [-radius u, m I]] >> 0 with m >= 0 (the
    caller owns its sign constraint). If v_gram is given it replaces v^H v; any
    upper bound on the Gram matrix keeps the certificate sound.

    Args:
        b: Hermitian matrix (r x r), numeric or expression.
        u: Matrix (k x r) multiplying X on the right. Numeric or expression.
        v: Matrix (n x r) multiplying X on the left, or None when v_gram is given.
        radius: Frobenius radius of X.
        multiplier: Scalar m.
        name: LMI label.
        family: Constraint family label.
        v_gram: Optional r x r replacement for v^H v.

    Returns:
        LmiBlock of dimension 2(r + k).

    Raises:
        DimensionMismatch: Shapes disagree.
    """
    r = _shape(b)[0]
    k, u_cols = _shape(u)
    if _shape(b) != (r, r) or u_cols != r:
        raise DimensionMismatch(f'b is {_shape(b)} but u is {_shape(u)}')

    if v_gram is None:
        if v is None:
            raise DimensionMismatch('Either v or v_gram is required')
        v = np.asarray(v, dtype=complex)
        if v.shape[1] != r:
            raise DimensionMismatch(f'v has {v.shape[1]} columns, expected {r}')
        v_gram = v.conj().T @ v
    if np.shape(v_gram) != (r, r):
        raise DimensionMismatch(f'v_gram has shape {np.shape(v_gram)}, expected {(r, r)}')

    u_h = _conj(u).T
    hermitian = _block([
        [-(multiplier * np.asarray(v_gram)) + b, -float(radius) * u_h],
        [-float(radius) * u, multiplier * np.eye(k)]])

    return LmiBlock(name=name, family=family, matrix=complex_to_real_embedding(hermitian))


class ConicProblem:
    """
    Named decision variables, family-tagged constraints and a concave objective.

    Constraint families group constraints for infeasibility diagnosis; every
    LMI and every plain cvxpy constraint carries one.
    """

    def __init__(self, *, name):
        self.name = name
        self.variables = {}
        self.lmis = []
        self.constraints = []
        self.objective = None
        self.sense = None

    def __repr__(self):
        return f'<ConicProblem {self.name} vars={len(self.variables)} lmis={len(self.lmis)}>'

    def variable(self, name, shape=(), **kwargs):
        """
        Create and register a cvxpy Variable. `kwargs` go to cp.Variable.
        """
        if name in self.variables:
            raise ConicModelError(f'Variable {name} already exists in {self.name}')

        var = cp.Variable(shape, name=name, **kwargs)
        self.variables[name] = var

        return var

    def add_lmi(self, block):
        if any(existing.name == block.name for existing in self.lmis):
            raise ConicModelError(f'LMI {block.name} already exists in {self.name}')

        self.lmis.append(block)

        return block

    def add_constraint(self, family, constraint):
        self.constraints.append((family, constraint))

    def maximize(self, expression):
        self.objective = expression
        self.sense = 'max'

    def minimize(self, expression):
        self.objective = expression
        self.sense = 'min'

    @property
    def families(self):
        """
        Every constraint family, in order of first appearance.
        """
        seen = []
        for family in [f for f, _ in self.constraints] + [block.family for block in self.lmis]:
            if family not in seen:
                seen.append(family)

        return seen

    def to_cvxpy(self, *, families=None):
        """
        Build the cvxpy Problem.

        Args:
            families: If given, keep only constraints in these families and
                replace the objective by zero (a pure feasibility problem).

        Returns:
            cvxpy Problem instance.
        """
        if self.objective is None and families is None:
            raise ConicModelError(f'{self.name} has no objective')

        def keep(family):
            return families is None or family in families

        constraints = [c for f, c in self.constraints if keep(f)]
        constraints += [block.constraint() for block in self.lmis if keep(block.family)]

        if families is not None:
            objective = cp.Minimize(0)
        elif self.sense == 'max':
            objective = cp.Maximize(self.objective)
        else:
            objective = cp.Minimize(self.objective)

        return cp.Problem(objective, constraints)

    def describe(self):
        """
        Dimensions, block list and sparsity of the model, as a JSON-ready dict.
        """
        def density(block):
            value = block.value
            if value is None:
                return None
            return float(np.count_nonzero(np.abs(value) > 0) / value.size)

        return {
            'name': self.name,
            'sense': self.sense,
            'variables': {
                name: {'shape': list(var.shape), 'complex': bool(var.is_complex())}
                for name, var in self.variables.items()},
            'scalar_variables': int(sum(
                var.size * (2 if var.is_complex() else 1) for var in self.variables.values())),
            'lmis': [
                {'name': block.name, 'family': block.family, 'dimension': block.dimension,
                 'density': density(block)}
                for block in self.lmis],
            'constraints': [
                {'family': family, 'type': type(constraint).__name__, 'size': int(constraint.size)}
                for family, constraint in self.constraints]}

    def dump(self):
        """
        describe() serialized as indented JSON text.
        """
        return json.dumps(self.describe(), indent=2)
