from dataclasses import dataclass

from .config import Config
from .errors import ValidationError


@dataclass(frozen=True)
class FecParams:
    """M source packets per block and the acceptable decoding error rate."""
    M: int = Config.FEC_M
    DER: float = Config.FEC_DER

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValidationError(f"FEC block needs M >= 1 source packets, got {self.M}")
        if not 0.0 < self.DER < 1.0:
            raise ValidationError(f"DER must lie in (0, 1), got {self.DER}")


@dataclass(frozen=True)
class LossRate:
    p: float

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValidationError(f"Loss rate must lie in [0, 1), got {self.p}")

    @property
    def q(self):
        return 1.0 - self.p


@dataclass(frozen=True)
class StaticTolerance:
    """Loss rate the default stream already absorbs with its constant weak FEC."""
    t: float

    def __post_init__(self):
        if not 0.0 <= self.t < 1.0:
            raise ValidationError(f"Static tolerance must lie in [0, 1), got {self.t}")


@dataclass(frozen=True)
class TrafficVolume:
    D: float  # total single-link failure time, seconds
    P: float  # packets per second

    def __post_init__(self):
        if self.D < 0:
            raise ValidationError(f"Failure time D must be >= 0, got {self.D}")
        if self.P <= 0:
            raise ValidationError(f"Packet rate P must be > 0, got {self.P}")
