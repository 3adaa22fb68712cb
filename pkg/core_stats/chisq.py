"""
Chi-square Tail Probabilities
Upper-tail probabilities of the chi-square reference distributions, in
linear and log space, and the TestResult container built from them
"""

from __future__ import annotations

import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from scipy import optimize, special

from core_stats.errors import InputError

logger = logging.getLogger(__name__)

LN10 = math.log(10.0)

# below this gammaincc loses relative accuracy to underflow
_LOG_SPACE_CUTOFF = 1e-280
_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10000


def _check_args(w, df):
    if df < 1 or int(df) != df:
        raise InputError(f"Degrees of freedom must be a positive integer, got {df}")
    if not w >= 0:
        raise InputError(f"Chi-square statistic must be non-negative, got {w}")


def chisq_sf(w, df):
    """
    Upper-tail probability Q(df/2, w/2)

    Args:
        w: Non-negative statistic
        df: Positive integer degrees of freedom

    Returns:
        P(X >= w) for X ~ chi-square(df); 1 at w = 0
    """
    _check_args(w, df)
    if w == 0:
        return 1.0
    if df == 1:
        return float(special.erfc(math.sqrt(w / 2.0)))
    return float(special.gammaincc(df / 2.0, w / 2.0))


def _log_upper_gamma_cf(a, x):
    """log Q(a, x) by Lentz's continued fraction; valid for x > a + 1"""
    b = x + 1.0 - a
    c = 1.0 / _CF_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = b + an / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    else:
        logger.warning(f"Continued fraction did not converge for a={a}, x={x}")
    return -x + a * math.log(x) - float(special.gammaln(a)) + math.log(h)


def chisq_logsf(w, df):
    """
    Natural log of the upper-tail probability, finite for very large w

    Args:
        w: Non-negative statistic
        df: Positive integer degrees of freedom

    Returns:
        log P(X >= w)
    """
    _check_args(w, df)
    if w == 0:
        return 0.0
    if df == 1:
        # erfc(sqrt(w/2)) == 2 * Phi(-sqrt(w))
        return math.log(2.0) + float(special.log_ndtr(-math.sqrt(w)))

    a = df / 2.0
    x = w / 2.0
    q = float(special.gammaincc(a, x))
    if q > _LOG_SPACE_CUTOFF:
        return math.log(q)
    return _log_upper_gamma_cf(a, x)


def neg_log10_p(w, df):
    """-log10 of the chi-square tail probability, computed in log space"""
    return -chisq_logsf(w, df) / LN10


@lru_cache(maxsize=64)
def chisq_median(df):
    """
    Median of chi-square(df) by numerical inversion of chisq_sf

    Args:
        df: Positive integer degrees of freedom

    Returns:
        m with chisq_sf(m, df) = 0.5
    """
    _check_args(0.0, df)
    # the median is below the mean df
    return optimize.brentq(lambda w: chisq_sf(w, df) - 0.5, 0.0, df + 10.0, xtol=1e-14, rtol=1e-15)


@dataclass(frozen=True)
class TestResult:
    """
    Outcome of one Wald test

    statistic/p_value/neg_log10_p are None when the variant is untestable (NA).
    """

    statistic: Optional[float]
    df: int
    p_value: Optional[float]
    neg_log10_p: Optional[float]
    note: str = ""

    __test__ = False  # not a pytest test class

    @classmethod
    def from_statistic(cls, statistic, df):
        """
        Build a result from a Wald statistic

        Args:
            statistic: Non-negative W
            df: Degrees of freedom of the chi-square reference

        Returns:
            TestResult with p-value and -log10 p
        """
        p_value = chisq_sf(statistic, df)
        if p_value <= 0.0:
            # underflow; the log-space value stays exact
            p_value = math.ulp(0.0)
        return cls(statistic=statistic, df=df, p_value=p_value, neg_log10_p=neg_log10_p(statistic, df))

    @classmethod
    def not_available(cls, df, note):
        return cls(statistic=None, df=df, p_value=None, neg_log10_p=None, note=note)

    @property
    def is_na(self):
        return self.statistic is None

    def is_significant(self, threshold):
        return not self.is_na and self.p_value < threshold
