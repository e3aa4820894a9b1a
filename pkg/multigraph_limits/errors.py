"""
Exception hierarchy for the multigraph toolkit
"""


class MultigraphError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(MultigraphError, ValueError):
    """An argument lies outside the mathematical domain of an operation"""


class InvalidAdjacencyError(MultigraphError, ValueError):
    """A matrix violates the adjacency-matrix invariants"""


class InvalidUrnError(MultigraphError, ValueError):
    """An urn word has entries outside its colour range or the wrong length"""


class OddDegreeSumError(MultigraphError, ValueError):
    """A degree sequence has an odd sum, so no stub matching exists"""


class InconsistentDegreeLawError(MultigraphError, ValueError):
    """A degree law does not match the graph it is evaluated against"""


class EdgeListFormatError(MultigraphError, ValueError):
    """An edge-list document does not follow the file format"""


class DivergenceError(MultigraphError, ArithmeticError):
    """A series or integral does not converge within its limits"""


class ConvergenceError(MultigraphError, ArithmeticError):
    """An iterative numerical routine failed to reach its tolerance"""


class BudgetExceededError(MultigraphError):
    """An enumeration would exceed its configured evaluation budget"""


class StateSpaceTooLargeError(BudgetExceededError):
    """A Markov chain state space is too large to enumerate"""


class DegenerateBinningError(MultigraphError, ValueError):
    """A goodness-of-fit histogram cannot be binned into at least two cells"""


class ConfigError(MultigraphError, ValueError):
    """An experiment configuration is invalid"""
