# -*- coding: utf-8 -*-

from .info import *


from .exceptions import GotkitError, ValidationError, NonFiniteError, MultichainError, ConvergenceError, StateSpaceTooLarge
from .core import *
