"""Exception types shared across the package."""


class LipboundError(Exception):
    """Base class for all errors raised by lipbound."""


class NetworkFormatError(LipboundError):
    """Malformed network description (parse failure, shape mismatch, non-finite entry)."""


class DomainFormatError(LipboundError):
    """Malformed or inconsistent input-domain description."""


class NonPolyhedralDomainError(LipboundError):
    """A polyhedral-only operation was asked to work on an L2 ball."""


class DomainEmptyError(LipboundError):
    """The input domain contains no points."""


class SimplexBreakdownError(LipboundError):
    """The LP solver could not make progress (degenerate pivots, iteration cap)."""


class EnumerationGuardError(LipboundError):
    """A brute-force enumeration was requested on a network that is too large."""


class ModelFormatError(LipboundError):
    """Malformed MIQCQP model or assignment file."""


class WitnessUnavailableError(LipboundError):
    """A witness assignment was requested for an infeasible or missing optimum."""
