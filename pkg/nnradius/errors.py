""" Exceptions raised by nnradius

Every error is also a :py:class:`ValueError`, so code that does not know
about this module can still catch it.
"""


class NnRadiusError(Exception):
    """ Base class for all nnradius errors """


class RangeError(NnRadiusError, ValueError):
    """ An index, count or radius lies outside its admissible range """


class ShapeError(NnRadiusError, ValueError):
    """ Array dimensions do not agree """


class ParameterError(NnRadiusError, ValueError):
    """ A model parameter is outside its valid domain """


class DomainError(ParameterError):
    """ A special function was evaluated outside its domain """


class SingularityError(NnRadiusError, ValueError):
    """ A fit has no unique solution, e.g. constant regressors """


class InsufficientDataError(NnRadiusError, ValueError):
    """ Too few observations for the requested operation """


class DegenerateSampleError(NnRadiusError, ValueError):
    """ The sample contains coincident points

    .. py:attribute:: count

        Number of points whose leave-one-out radius is zero
    """

    def __init__(self, message: str, count: int = 0):
        super().__init__(message)
        self.count = count


class ConfigurationError(NnRadiusError, ValueError):
    """ A configuration value is invalid or unknown

    .. py:attribute:: key

        Dotted name of the offending key, like ``exp1.d_list``, or ``None``
        when the problem is not tied to a single key.
    """

    def __init__(self, message: str, key: str = None):
        if key:
            message = f"{key}: {message}"
        super().__init__(message)
        self.key = key
