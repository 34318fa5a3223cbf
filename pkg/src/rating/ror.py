import math
from dataclasses import dataclass, field
from typing import List, Tuple

from rating.fec import fec_block_size
from routing.capillary import RoutingPattern
from utils.config import Config
from utils.errors import ValidationError
from utils.models import FecParams, StaticTolerance, TrafficVolume

SHORT = "short"
LARGE = "large"
MODES = (SHORT, LARGE)

ENTIRE_TRAFFIC = "entire_traffic"
WITHIN_TOLERANCE = "within_tolerance"


@dataclass
class Contribution:
    link: Tuple[int, int]
    load: float
    overhead: float


@dataclass
class Exclusion:
    link: Tuple[int, int]
    load: float
    reason: str


@dataclass
class RorReport:
    """ROR of one pattern: the per-link rate overheads that sum to it, plus skipped links."""
    ror: float
    mode: str
    t: float
    contributions: List[Contribution] = field(default_factory=list)
    excluded: List[Exclusion] = field(default_factory=list)

    def to_dict(self):
        return {
            "ror": self.ror,
            "mode": self.mode,
            "t": self.t,
            "contributions": [
                {"i": c.link[0], "j": c.link[1], "load": c.load, "overhead": c.overhead}
                for c in self.contributions
            ],
            "excluded": [
                {"i": e.link[0], "j": e.link[1], "load": e.load, "reason": e.reason}
                for e in self.excluded
            ],
        }


def _tolerance(t):
    return t if isinstance(t, StaticTolerance) else StaticTolerance(float(t))


def _rate(pattern: RoutingPattern, t: float, mode: str, overhead) -> RorReport:
    report = RorReport(ror=0.0, mode=mode, t=t)
    for pl in pattern.links:
        link = (pl.tail, pl.head)
        if pl.load >= 1.0 - Config.EPS_LOAD:
            # failure of a link carrying everything cannot be compensated
            report.excluded.append(Exclusion(link, pl.load, ENTIRE_TRAFFIC))
        elif pl.load <= t:
            report.excluded.append(Exclusion(link, pl.load, WITHIN_TOLERANCE))
        else:
            report.contributions.append(Contribution(link, pl.load, overhead(pl.load)))
    report.ror = math.fsum(c.overhead for c in report.contributions)
    return report


def ror_short_buffer(pattern: RoutingPattern, t, params: FecParams = FecParams()) -> RorReport:
    """Sum of FEC_r(l) / FEC_t - 1 over links loaded above t (short playback buffer)."""
    tol = _tolerance(t)
    base = fec_block_size(tol.t, params)
    return _rate(pattern, tol.t, SHORT, lambda r: fec_block_size(r, params) / base - 1.0)


def ror_large_blocks(pattern: RoutingPattern, t) -> RorReport:
    """Sum of (1 - t) / (1 - r(l)) - 1 over links loaded above t (FEC_p = M / (1 - p))."""
    tol = _tolerance(t)
    return _rate(pattern, tol.t, LARGE, lambda r: (1.0 - tol.t) / (1.0 - r) - 1.0)


def rate_pattern(pattern: RoutingPattern, t, mode, params: FecParams = FecParams()) -> RorReport:
    if mode == SHORT:
        return ror_short_buffer(pattern, t, params)
    if mode == LARGE:
        return ror_large_blocks(pattern, t)
    raise ValidationError(f"Unknown ROR mode {mode!r}; expected one of {', '.join(MODES)}")


def ror_from_rates(base_rate, failure_rates) -> float:
    """ROR straight from its definition: sum of P_l / P - 1 over single-link failures."""
    if base_rate <= 0:
        raise ValidationError(f"Base packet rate must be > 0, got {base_rate}")
    return math.fsum(rate / base_rate - 1.0 for rate in failure_rates)


def redundant_packet_volume(vol: TrafficVolume, ror: float) -> float:
    """D * P * ROR: adaptive redundant packets needed over the whole communication."""
    if ror < 0:
        raise ValidationError(f"ROR must be >= 0, got {ror}")
    return vol.D * vol.P * ror
