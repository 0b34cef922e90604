# -*- coding: utf-8 -*-

"""
    gotkit.exceptions
    ~~~~~~~~~~~~~~~~~

    Exception hierarchy shared by the library and the command line.
"""


class GotkitError(Exception):
    """Base class for every error raised by gotkit."""


class ValidationError(GotkitError, ValueError):
    """
        Invalid input: dimensions, signs, stochasticity, indices or config fields.

        :param message:
            Human readable description.
        :param path:
            Dotted path of the offending field, e.g. ``system.kernels[1][2]``.
    """

    def __init__(self, message, path=None):
        self.path = path
        self.message = message
        super().__init__(f'{path}: {message}' if path else message)


class StateSpaceTooLarge(ValidationError):
    """Exhaustive policy enumeration was requested on a model that is too large."""


class NonFiniteError(GotkitError, ArithmeticError):
    """A penalty or cost evaluated to NaN or infinity."""


class MultichainError(GotkitError, RuntimeError):
    """
        The induced Markov chain has more than one recurrent class.

        ``classes`` holds the recurrent classes found, each as a list of states.
    """

    def __init__(self, classes):
        self.classes = [list(c) for c in classes]
        shown = '; '.join('{' + ', '.join(map(str, c[:6])) + (', ...' if len(c) > 6 else '') + '}'
                          for c in self.classes)
        super().__init__(f'{len(self.classes)} recurrent classes found: {shown}')


class ConvergenceError(GotkitError, RuntimeError):
    """Relative value iteration did not reach the span tolerance."""

    def __init__(self, iterations, span):
        self.iterations = iterations
        self.span = span
        super().__init__(f'no convergence after {iterations} iterations (span {span:.3e})')
