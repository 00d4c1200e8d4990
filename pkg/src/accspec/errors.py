"""Exception hierarchy shared by all accspec modules."""


class AccspecError(Exception):
    """Base class for library errors."""


class InvalidLatticeError(AccspecError, ValueError):
    pass


class InvalidMaskError(AccspecError, ValueError):
    pass


class InsufficientResolutionError(AccspecError, ValueError):
    pass


class DivergenceError(AccspecError):
    """A lattice sum does not appear to converge."""


class NoFrameError(AccspecError, ValueError):
    """Lattice density too low for the window to generate a frame."""


class IllConditionedFrameError(AccspecError):
    pass


class EmptyMaskError(AccspecError, ValueError):
    pass


class GramSizeError(AccspecError, ValueError):
    pass


class DeflatedEigenvalueError(AccspecError, ValueError):
    pass


class NumericalError(AccspecError):
    pass


class TightnessError(AccspecError):
    """Raised when an operation that assumes a tight frame gets a non-tight one."""


class ConfigError(AccspecError, ValueError):
    pass
