class CapillaryError(Exception):
    """Base class for every failure raised by the toolkit."""


class ValidationError(CapillaryError):
    """A document, config or argument violates an invariant."""


class LpNumericError(CapillaryError):
    """The simplex broke down (cycling, ill-conditioning). Not infeasibility."""


class StructuralError(CapillaryError):
    """The routing problem admits no valid flow."""


class DisconnectedError(StructuralError):
    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = sorted(component) if component else []


class FecCapError(CapillaryError):
    """Block length search ran past Config.FEC_BLOCK_CAP."""
