"""
sdMAF Wald Tests
Closed-form single-population, multi-population, pooled, pairwise-difference
and omnibus-difference tests for sex differences in allele frequency
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations

from core_stats.chisq import TestResult
from core_stats.errors import DegenerateVariance, InputError
from core_stats.genotypes import estimate_stratum, pool_pairs, variance_term

logger = logging.getLogger(__name__)

NA_DEGENERATE = "degenerate variance"
NA_POPULATION = "untestable population"
NA_TOO_FEW = "fewer than two testable populations"


@dataclass(frozen=True)
class SdmafComponents:
    """Estimated sdMAF d = p_f - p_m and its variance for one population"""

    label: str
    d: float
    variance: float


def sdmaf_components(pair, region):
    """
    Estimate sdMAF and its variance for one population

    Args:
        pair: PopulationStratumPair
        region: RegionClass of the variant

    Returns:
        SdmafComponents
    """
    pair.check_region(region)
    female = estimate_stratum(pair.female)
    male = estimate_stratum(pair.male)
    return SdmafComponents(
        label=pair.population_label,
        d=female.p_hat - male.p_hat,
        variance=variance_term(female) + variance_term(male),
    )


def _wald_ratio(difference, variance):
    """
    difference^2 / variance with the degenerate cases resolved

    Raises:
        DegenerateVariance: variance is zero while the difference is not
    """
    if variance > 0.0:
        return difference * difference / variance
    if difference == 0.0:
        return 0.0
    raise DegenerateVariance(f"sdMAF {difference} with zero variance")


def _single_from_components(comp):
    try:
        return TestResult.from_statistic(_wald_ratio(comp.d, comp.variance), 1)
    except DegenerateVariance as e:
        logger.debug(f"{comp.label}: {e}")
        return TestResult.not_available(1, NA_DEGENERATE)


def sdmaf_single(pair, region):
    """
    Single-population 1-df sdMAF test

    Args:
        pair: PopulationStratumPair
        region: RegionClass (decides the male variance term)

    Returns:
        TestResult with df = 1; W = 0, p = 1 for strata monomorphic in both
        sexes; NA when only the denominator vanishes
    """
    return _single_from_components(sdmaf_components(pair, region))


def sdmaf_per_population(pairs, region):
    """Single-population test for every population, in input order"""
    return [sdmaf_single(pair, region) for pair in pairs]


def sdmaf_multi(pairs, region):
    """
    K-df multi-population sdMAF test (sum of the per-population statistics)

    Args:
        pairs: One PopulationStratumPair per population (K >= 1)
        region: RegionClass

    Returns:
        TestResult with df = K, or NA if any population is untestable
    """
    pairs = list(pairs)
    if not pairs:
        raise InputError("Multi-population test needs at least one population")

    singles = sdmaf_per_population(pairs, region)
    df = len(pairs)
    if any(result.is_na for result in singles):
        return TestResult.not_available(df, NA_POPULATION)
    # fsum is correctly rounded, so the sum does not depend on population order
    statistic = math.fsum(result.statistic for result in singles)
    return TestResult.from_statistic(statistic, df)


def sdmaf_pooled(pairs, region):
    """
    Existing 1-df test on counts pooled across populations

    Ignores population structure; conservative when population MAFs differ.
    """
    return sdmaf_single(pool_pairs(pairs), region)


def _pair_diff_from_components(comp_k, comp_l):
    try:
        statistic = _wald_ratio(comp_k.d - comp_l.d, comp_k.variance + comp_l.variance)
        return TestResult.from_statistic(statistic, 1)
    except DegenerateVariance as e:
        logger.debug(f"{comp_k.label} vs {comp_l.label}: {e}")
        return TestResult.not_available(1, NA_DEGENERATE)


def sdmaf_pair_diff(pair_k, pair_l, region):
    """
    1-df test that two populations share the same sdMAF

    Args:
        pair_k: PopulationStratumPair of population k
        pair_l: PopulationStratumPair of population l
        region: RegionClass

    Returns:
        TestResult with df = 1; symmetric in (k, l)
    """
    return _pair_diff_from_components(sdmaf_components(pair_k, region), sdmaf_components(pair_l, region))


def sdmaf_all_pairs(pairs, region):
    """
    Pairwise difference test for every unordered population pair

    Returns:
        List of ((label_k, label_l), TestResult) in input order
    """
    components = [sdmaf_components(pair, region) for pair in pairs]
    return [
        ((comp_k.label, comp_l.label), _pair_diff_from_components(comp_k, comp_l))
        for comp_k, comp_l in combinations(components, 2)
    ]


def sdmaf_omnibus_diff(pairs, region):
    """
    (K-1)-df test that all populations share one sdMAF

    Weights are U_k = 1 / Var(d_k). Populations with zero variance are
    excluded with a warning and the df drops accordingly.

    Args:
        pairs: One PopulationStratumPair per population (K >= 2)
        region: RegionClass

    Returns:
        TestResult invariant to the order of pairs, or NA if fewer than two
        testable populations remain
    """
    pairs = list(pairs)
    if len(pairs) < 2:
        raise InputError("Omnibus difference test needs at least two populations")

    components = [sdmaf_components(pair, region) for pair in pairs]
    testable = [comp for comp in components if comp.variance > 0.0]
    excluded = [comp.label for comp in components if comp.variance <= 0.0]
    if excluded:
        logger.warning(f"Omnibus difference test: excluded zero-variance populations {excluded}")
    if len(testable) < 2:
        return TestResult.not_available(max(1, len(testable) - 1), NA_TOO_FEW)

    if len(testable) == 2:
        return _pair_diff_from_components(testable[0], testable[1])

    # sum_k U_k (d_k - d_bar)^2, the cancellation-free form of
    # sum d^2 U - (sum d U)^2 / sum U
    weights = [1.0 / comp.variance for comp in testable]
    total_weight = math.fsum(weights)
    d_bar = math.fsum(w * comp.d for w, comp in zip(weights, testable)) / total_weight
    statistic = math.fsum(w * (comp.d - d_bar) ** 2 for w, comp in zip(weights, testable))
    return TestResult.from_statistic(max(0.0, statistic), len(testable) - 1)
