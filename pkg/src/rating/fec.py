"""
FEC block sizing for an MDS code: a block of N packets carrying M source
packets decodes iff at least M packets arrive, so under random loss rate p
the decoding failure probability is the binomial tail P(losses > N - M).
FEC_p is the shortest block whose failure probability meets the DER.
"""
import math
from functools import lru_cache

import pandas as pd

from utils.config import Config
from utils.errors import FecCapError, ValidationError
from utils.models import FecParams, LossRate

# delta == DER counts as success; this absorbs the last-ulp error of exp/log
DER_RTOL = 1e-9


def _loss(p):
    return p if isinstance(p, LossRate) else LossRate(float(p))


def decoding_failure_prob(N, M, p) -> float:
    """
    Sum over n = N-M+1..N of C(N, n) p^n q^(N-n). Terms are generated in
    log space by the ratio recurrence starting at n = N, then summed
    smallest first with fsum.
    """
    loss = _loss(p)
    if M < 1 or N < M:
        raise ValidationError(f"Need N >= M >= 1, got N={N}, M={M}")
    if loss.p == 0.0:
        return 0.0

    log_p, log_q = math.log(loss.p), math.log(loss.q)
    log_term = N * log_p
    logs = [log_term]
    for n in range(N, N - M + 1, -1):
        # C(N, n-1) / C(N, n) = n / (N - n + 1)
        log_term += math.log(n) - math.log(N - n + 1) + log_q - log_p
        logs.append(log_term)
    terms = sorted(math.exp(t) for t in logs)
    return min(1.0, math.fsum(terms))


@lru_cache(maxsize=1 << 16)
def _block_size(p, M, DER):
    threshold = DER * (1.0 + DER_RTOL)

    def meets(N):
        return decoding_failure_prob(N, M, p) <= threshold

    if meets(M):
        return M

    # gallop to a passing length, then bisect; the tail shrinks as N grows,
    # so this returns the same minimal N as a linear scan from M
    failing, step = M, 1
    passing = M + step
    while not meets(passing):
        failing = passing
        if passing >= Config.FEC_BLOCK_CAP:
            raise FecCapError(
                f"No block length <= {Config.FEC_BLOCK_CAP} reaches DER={DER} at p={p}, M={M}")
        step *= 2
        passing = min(M + step, Config.FEC_BLOCK_CAP)
    while passing - failing > 1:
        middle = (failing + passing) // 2
        if meets(middle):
            passing = middle
        else:
            failing = middle
    return passing


def fec_block_size(p, params: FecParams = FecParams()) -> int:
    """FEC_p: minimal N >= M with decoding_failure_prob(N, M, p) <= DER."""
    return _block_size(_loss(p).p, params.M, params.DER)


def rate_increase_factor(p, params: FecParams = FecParams()) -> float:
    return fec_block_size(p, params) / params.M


def fec_table(der=Config.FEC_DER, m_max=10, p_values=None) -> pd.DataFrame:
    """Rate increase factors FEC_p / M, one row per p and one column per M."""
    if m_max < 1:
        raise ValidationError(f"m_max must be >= 1, got {m_max}")
    if p_values is None:
        p_values = [round(0.01 * k, 2) for k in range(1, 51)]
    rows = []
    for p in p_values:
        row = {"p": p}
        for M in range(1, m_max + 1):
            row[f"M={M}"] = rate_increase_factor(p, FecParams(M=M, DER=der))
        rows.append(row)
    return pd.DataFrame(rows, columns=["p"] + [f"M={M}" for M in range(1, m_max + 1)])
