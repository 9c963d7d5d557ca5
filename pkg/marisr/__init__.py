"""
Main Flask application for marisr.

The application object is never served over HTTP. It carries the layered
configuration, the package logger and the click command group used by the
`marisr` console script.

This application accepts an optional `MARISR_CONFIG` environment variable. This
is interpreted as a filename containing configuration variables that augment
those in marisr.configs.base. Run configuration files given on the command line
(see marisr.utils.load_run_config) are applied on top of both.

Attributes:
    __version__: Semantic version number of this release of the application.
    app: The fully-configured Flask app.
"""

from flask import Flask
from flask.logging import default_handler
from marisr.clients.solver import ConicSolverClient

__version__ = '1.0.0'

app = Flask(__name__)
app.config.from_pyfile('configs/base.py')
app.config.from_envvar('MARISR_CONFIG', silent=True)

for h in app.logger.handlers:
    app.logger.removeHandler(h)  # pragma: nocover
app.logger.addHandler(default_handler)
app.logger.handlers[0].setFormatter(app.config['APP_LOG_FORMATTER'])
app.logger.setLevel(app.config['APP_LOG_LEVEL'])

app.solver_client = ConicSolverClient(
    solvers=app.config['CONIC_SOLVERS'],
    feasibility_tol=app.config['CONIC_FEASIBILITY_TOL'],
    solver_options=app.config['CONIC_SOLVER_OPTIONS'])


import marisr.cli  # noqa: E402
