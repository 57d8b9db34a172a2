"""Error types raised by the solvers and observable pipelines.

Input-validation problems raise plain ValueError; SimulationError and its
subclasses mark failures of a numerical routine on otherwise valid input.
The CLI maps ValueError to exit code 1 and SimulationError to exit code 2.
"""


class SimulationError(Exception):
    """A solver or observable pipeline failed on valid input."""


class OutsidePlateauError(SimulationError):
    """Gate voltage lies outside the one-electron charge plateau."""


class IncompatibleFramesError(SimulationError):
    """Two lasers coherently drive the same transition at different
    frequencies, so no time-independent rotating frame exists."""


class DegenerateKernelError(SimulationError):
    """The Liouvillian kernel is not one-dimensional; the steady state is
    not unique."""


class PositivityError(SimulationError):
    """A density matrix violated positivity beyond tolerance."""


class QuadratureConvergenceError(SimulationError):
    """Gauss-Hermite node doubling failed to converge below tolerance."""


class CycleConvergenceError(SimulationError):
    """A pulse cycle did not reach a periodic steady state within the
    configured repetition budget."""
